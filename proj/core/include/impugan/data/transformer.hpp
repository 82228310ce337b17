#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "impugan/ad/graph.hpp"
#include "impugan/data/gmm.hpp"
#include "impugan/data/table.hpp"
#include "impugan/rng.hpp"

namespace impugan::data {

struct ColumnEncoding {
  std::size_t column = 0;
  ColumnKind kind = ColumnKind::kContinuous;
  // Continuous: index of the alpha slot; -1 for discrete columns.
  int alpha = -1;
  // Mode-indicator span (continuous) or one-hot span (discrete).
  ad::Span span;
  // Discrete: offset of this column's block in the condition vector.
  int condition_offset = -1;
};

struct EncodedLayout {
  std::vector<ColumnEncoding> columns;  // schema order
  std::vector<std::size_t> discrete_columns;
  int width = 0;
  int condition_width = 0;

  // tanh on alpha slots, softmax on every span.
  ad::ActivationLayout activation() const;
  // Encoded index for each condition slot.
  std::vector<int> condition_to_encoded() const;
  // Throws unless the slots tile [0, width) exactly once.
  void validate() const;
};

struct TransformerOptions {
  int modes = 10;
  std::uint64_t seed = 0;
  GmmOptions gmm;
};

// Mode-specific normalization for continuous columns, one-hot for discrete.
class Transformer {
 public:
  Transformer() = default;

  // Fits on the observed cells of `table`. Vocabularies come from the
  // table's schema; categories with no observed rows keep their slot.
  static Transformer fit(const Table& table, const TransformerOptions& options = {});

  const TableSchema& schema() const { return schema_; }
  const EncodedLayout& layout() const { return layout_; }
  int width() const { return layout_.width; }
  const GmmModel& gmm(std::size_t column) const { return gmms_[column]; }
  // Observed count per category (discrete columns).
  const std::vector<std::size_t>& frequencies(std::size_t column) const { return frequencies_[column]; }

  // Throws DataError unless `schema` has the same columns, kinds and
  // vocabularies.
  void check_compatible(const TableSchema& schema) const;

  // Every cell of the row must be observed.
  void transform_row(const Table& table, std::size_t row, Rng& rng, std::span<double> out) const;
  ad::Matrix transform(const Table& table, Rng& rng) const;

  void inverse_row(std::span<const double> encoded, Table& out, std::size_t row) const;
  Table inverse_transform(const ad::Matrix& encoded) const;

  nlohmann::json to_json() const;
  static Transformer from_json(const nlohmann::json& j);

 private:
  void build_layout();

  TableSchema schema_;
  EncodedLayout layout_;
  std::vector<GmmModel> gmms_;
  std::vector<std::vector<std::size_t>> frequencies_;
};

}  // namespace impugan::data
