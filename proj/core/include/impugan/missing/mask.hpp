#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "impugan/data/table.hpp"

namespace impugan::missing {

using data::MaskMatrix;
using data::Table;

enum class Mechanism { kMcar, kMar, kMnar };

std::string_view to_string(Mechanism m);
Mechanism parse_mechanism(std::string_view text);

struct MissingnessSpec {
  Mechanism mechanism = Mechanism::kMcar;
  double rate = 0.2;
  std::uint64_t seed = 0;
  // Columns that are never masked. MAR drivers are drawn from these.
  std::vector<std::string> exempt;
  // MAR: target column -> driver column. Unlisted targets use the default
  // driver (the exempt column whose name follows the target's, cyclically).
  std::map<std::string, std::string> drivers;
  // MNAR: cells above this quantile of their own column are the candidates.
  double quantile = 0.5;

  // Throws ConfigError on a bad rate/quantile or unknown column.
  void validate(const data::TableSchema& schema) const;
};

nlohmann::json to_json(const MissingnessSpec& spec);
MissingnessSpec spec_from_json(const nlohmann::json& j);

// Observation mask after simulated missingness. Cells already missing in
// `table` stay 0; exempt cells stay as they are. Every row keeps at least one
// observed cell when it had one.
MaskMatrix generate_mask(const Table& table, const MissingnessSpec& spec);

// Driver column chosen for every maskable column under MAR (schema index ->
// schema index).
std::map<std::size_t, std::size_t> mar_drivers(const data::TableSchema& schema, const MissingnessSpec& spec);

struct IncompleteTable {
  Table incomplete;
  Table truth;
  MaskMatrix mask;

  // Masked cells whose ground truth is known.
  bool evaluated(std::size_t r, std::size_t c) const { return !mask.observed(r, c) && !truth.missing(r, c); }
  double ground_truth(std::size_t r, std::size_t c) const { return truth.at(r, c); }
};

IncompleteTable apply_mask(const Table& table, const MaskMatrix& mask);

void write_mask_csv(std::ostream& out, const MaskMatrix& mask, const data::TableSchema& schema);
void write_mask_csv(const std::filesystem::path& path, const MaskMatrix& mask, const data::TableSchema& schema);
MaskMatrix read_mask_csv(const std::filesystem::path& path, const data::TableSchema& schema);

}  // namespace impugan::missing
