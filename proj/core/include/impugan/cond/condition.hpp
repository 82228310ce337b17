#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "impugan/ad/graph.hpp"
#include "impugan/data/table.hpp"
#include "impugan/data/transformer.hpp"
#include "impugan/rng.hpp"

namespace impugan::cond {

using data::EncodedLayout;
using data::TableSchema;

// Multi-hot selection over a subset of discrete columns.
struct ConditionVector {
  std::vector<double> bits;              // condition_width entries
  std::map<std::size_t, int> selections;  // schema column -> category index

  bool empty() const { return selections.empty(); }
};

// Throws DataError for unknown columns or categories, and for continuous
// columns.
ConditionVector build_condition(const std::map<std::size_t, int>& selections, const TableSchema& schema,
                                const EncodedLayout& layout);
ConditionVector build_condition(const std::map<std::string, std::string>& selections, const TableSchema& schema,
                                const EncodedLayout& layout);

// Parses repeated "column=category" flags. The first '=' splits.
std::map<std::string, std::string> parse_condition_flags(const std::vector<std::string>& flags);

// Decodes the selections held in one row of a condition matrix.
std::map<std::size_t, int> selections_of(std::span<const double> bits, const EncodedLayout& layout);

struct ConditionBatch {
  ad::Matrix conditions;          // B x condition_width
  std::vector<std::size_t> rows;  // matched real rows
  std::vector<std::size_t> column;  // sampled discrete column per element
  std::vector<int> category;        // sampled category per element
};

// Training-by-sampling over the rows of a complete table.
class TrainingSampler {
 public:
  TrainingSampler(const data::Table& table, const EncodedLayout& layout);

  // False when the table has no discrete columns.
  bool enabled() const { return !layout_.discrete_columns.empty(); }
  std::size_t rows() const { return rows_; }
  // Category of `row` in the k-th discrete column.
  int category(std::size_t row, std::size_t k) const { return codes_[row * layout_.discrete_columns.size() + k]; }
  const std::vector<std::size_t>& rows_with(std::size_t k, int category) const { return index_[k][static_cast<std::size_t>(category)]; }
  // Sampling probability of each category of the k-th discrete column.
  std::vector<double> category_probabilities(std::size_t k) const;

  // One column uniformly, a category with weight log(1 + frequency), then a
  // matching row uniformly. Without discrete columns: uniform rows, zero
  // conditions.
  ConditionBatch sample(std::size_t batch, Rng& rng) const;

  // Adds further discrete columns of each matched row to its condition. Each
  // element draws u ~ U(0,1) and includes every other column with
  // probability u.
  void extend(ConditionBatch& batch, Rng& rng) const;

 private:
  EncodedLayout layout_;
  std::size_t rows_ = 0;
  std::vector<int> codes_;
  std::vector<std::vector<std::vector<std::size_t>>> index_;
  std::vector<std::vector<double>> cumulative_;  // per column, over categories
};

// Overwrites each conditioned span with the exact one-hot of the requested
// category. Other entries are untouched.
void hard_apply(std::span<double> activated, const ConditionVector& condition, const EncodedLayout& layout);
// Row-wise version driven by a multi-hot condition matrix.
void hard_apply(ad::Matrix& activated, const ad::Matrix& conditions, const EncodedLayout& layout);

}  // namespace impugan::cond
