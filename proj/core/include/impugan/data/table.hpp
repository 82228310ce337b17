#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace impugan::data {

enum class ColumnKind { kContinuous, kDiscrete };

std::string_view to_string(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view text);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
  // Discrete only; sorted, unique, non-empty.
  std::vector<std::string> categories;

  bool discrete() const { return kind == ColumnKind::kDiscrete; }
  // Index of `category`, or -1.
  int category_index(std::string_view category) const;
};

struct TableSchema {
  std::vector<ColumnSpec> columns;
  // Cell texts read as missing. The first one is used when writing.
  std::vector<std::string> missing_tokens{"", "?"};

  std::size_t size() const { return columns.size(); }
  // Index of the named column, or -1.
  int find(std::string_view name) const;
  // Like find() but throws DataError when absent.
  std::size_t index(std::string_view name) const;
  bool is_missing_token(std::string_view cell) const;
  // Throws DataError on duplicate names or empty/unsorted vocabularies.
  void validate() const;
};

// Observation indicator aligned with a table: 1 observed, 0 missing.
class MaskMatrix {
 public:
  MaskMatrix() = default;
  MaskMatrix(std::size_t rows, std::size_t cols, std::uint8_t fill = 1)
      : rows_(rows), cols_(cols), bits_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool observed(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool observed) { bits_[r * cols_ + c] = observed ? 1 : 0; }
  std::size_t missing_count() const;

  bool operator==(const MaskMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Column-major table of doubles. Continuous cells hold their value, discrete
// cells the index into the column's vocabulary; NaN marks a missing cell.
class Table {
 public:
  Table() = default;
  // All cells start missing.
  Table(TableSchema schema, std::size_t rows);

  const TableSchema& schema() const { return schema_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return schema_.size(); }

  double at(std::size_t r, std::size_t c) const { return columns_[c][r]; }
  void set(std::size_t r, std::size_t c, double v) { columns_[c][r] = v; }
  void set_missing(std::size_t r, std::size_t c) { columns_[c][r] = NAN; }
  bool missing(std::size_t r, std::size_t c) const { return std::isnan(columns_[c][r]); }
  std::span<const double> column(std::size_t c) const { return columns_[c]; }

  // Discrete cells only.
  int category(std::size_t r, std::size_t c) const { return static_cast<int>(columns_[c][r]); }
  const std::string& category_name(std::size_t r, std::size_t c) const;
  // Text form of a cell (missing -> first missing token).
  std::string cell_text(std::size_t r, std::size_t c) const;

  MaskMatrix mask() const;
  bool complete_row(std::size_t r) const;
  Table select_rows(std::span<const std::size_t> rows) const;
  // Values of the observed cells of column c.
  std::vector<double> observed_values(std::size_t c) const;

  // Bitwise comparison; NaN == NaN.
  bool identical(const Table& other) const;

 private:
  TableSchema schema_;
  std::size_t rows_ = 0;
  std::vector<std::vector<double>> columns_;
};

std::string format_number(double v);

// {"format":"impugan-schema","version":1,"missing_tokens":[...],"columns":[{name,kind,categories?}]}
nlohmann::json schema_to_json(const TableSchema& schema);
TableSchema schema_from_json(const nlohmann::json& j);

}  // namespace impugan::data
