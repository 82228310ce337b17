#include "impugan/data/table.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <set>

#include <nlohmann/json.hpp>

#include "impugan/error.hpp"

namespace impugan::data {

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::kContinuous ? "continuous" : "discrete";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "continuous") return ColumnKind::kContinuous;
  if (text == "discrete") return ColumnKind::kDiscrete;
  throw ConfigError("unknown column kind '" + std::string(text) + "'");
}

int ColumnSpec::category_index(std::string_view category) const {
  auto it = std::lower_bound(categories.begin(), categories.end(), category);
  if (it == categories.end() || *it != category) return -1;
  return static_cast<int>(it - categories.begin());
}

int TableSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::size_t TableSchema::index(std::string_view name) const {
  const int i = find(name);
  if (i < 0) throw DataError("unknown column '" + std::string(name) + "'");
  return static_cast<std::size_t>(i);
}

bool TableSchema::is_missing_token(std::string_view cell) const {
  return std::find(missing_tokens.begin(), missing_tokens.end(), cell) != missing_tokens.end();
}

void TableSchema::validate() const {
  std::set<std::string_view> seen;
  for (const auto& c : columns) {
    if (!seen.insert(c.name).second) throw DataError("duplicate column name '" + c.name + "'");
    if (c.discrete()) {
      if (c.categories.empty()) throw DataError("column '" + c.name + "' has an empty vocabulary");
      for (std::size_t i = 1; i < c.categories.size(); ++i) {
        if (!(c.categories[i - 1] < c.categories[i])) {
          throw DataError("column '" + c.name + "' vocabulary is not sorted and unique");
        }
      }
    }
  }
}

std::size_t MaskMatrix::missing_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{0}));
}

Table::Table(TableSchema schema, std::size_t rows)
    : schema_(std::move(schema)), rows_(rows), columns_(schema_.size(), std::vector<double>(rows, NAN)) {}

const std::string& Table::category_name(std::size_t r, std::size_t c) const {
  return schema_.columns[c].categories[static_cast<std::size_t>(category(r, c))];
}

std::string Table::cell_text(std::size_t r, std::size_t c) const {
  if (missing(r, c)) return schema_.missing_tokens.empty() ? std::string() : schema_.missing_tokens[0];
  if (schema_.columns[c].discrete()) return category_name(r, c);
  return format_number(at(r, c));
}

MaskMatrix Table::mask() const {
  MaskMatrix m(rows_, cols());
  for (std::size_t c = 0; c < cols(); ++c) {
    for (std::size_t r = 0; r < rows_; ++r) {
      if (missing(r, c)) m.set(r, c, false);
    }
  }
  return m;
}

bool Table::complete_row(std::size_t r) const {
  for (std::size_t c = 0; c < cols(); ++c) {
    if (missing(r, c)) return false;
  }
  return true;
}

Table Table::select_rows(std::span<const std::size_t> rows) const {
  Table out(schema_, rows.size());
  for (std::size_t c = 0; c < cols(); ++c) {
    for (std::size_t i = 0; i < rows.size(); ++i) out.columns_[c][i] = columns_[c][rows[i]];
  }
  return out;
}

std::vector<double> Table::observed_values(std::size_t c) const {
  std::vector<double> out;
  out.reserve(rows_);
  for (double v : columns_[c]) {
    if (!std::isnan(v)) out.push_back(v);
  }
  return out;
}

bool Table::identical(const Table& other) const {
  if (rows_ != other.rows_ || cols() != other.cols()) return false;
  for (std::size_t c = 0; c < cols(); ++c) {
    if (schema_.columns[c].name != other.schema_.columns[c].name) return false;
    for (std::size_t r = 0; r < rows_; ++r) {
      const double a = columns_[c][r];
      const double b = other.columns_[c][r];
      if (std::isnan(a) != std::isnan(b)) return false;
      if (!std::isnan(a) && std::memcmp(&a, &b, sizeof(double)) != 0) return false;
    }
  }
  return true;
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, end);
}

nlohmann::json schema_to_json(const TableSchema& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : schema.columns) {
    nlohmann::json o{{"name", c.name}, {"kind", std::string(to_string(c.kind))}};
    if (c.discrete()) o["categories"] = c.categories;
    cols.push_back(std::move(o));
  }
  return {{"format", "impugan-schema"}, {"version", 1}, {"missing_tokens", schema.missing_tokens}, {"columns", cols}};
}

TableSchema schema_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != "impugan-schema" || j.value("version", 0) != 1) {
      throw DataError("unsupported schema format");
    }
    TableSchema s;
    s.missing_tokens = j.at("missing_tokens").get<std::vector<std::string>>();
    for (const auto& c : j.at("columns")) {
      ColumnSpec spec;
      spec.name = c.at("name").get<std::string>();
      spec.kind = parse_column_kind(c.at("kind").get<std::string>());
      if (spec.discrete()) spec.categories = c.at("categories").get<std::vector<std::string>>();
      s.columns.push_back(std::move(spec));
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed schema JSON: ") + e.what());
  }
}

}  // namespace impugan::data
