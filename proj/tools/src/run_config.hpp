#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "impugan/data/table.hpp"
#include "impugan/eval/report.hpp"
#include "impugan/gan/config.hpp"
#include "impugan/missing/mask.hpp"

namespace impugan::cli {

struct DatasetConfig {
  std::filesystem::path path;
  std::string name;  // defaults to the file stem
  std::filesystem::path schema;  // optional schema JSON; overrides inference
  std::map<std::string, data::ColumnKind> kinds;
  std::vector<std::string> missing_tokens{"", "?"};
  std::string label;
  bool drop_incomplete = false;
  std::size_t subsample = 0;  // 0 keeps every row
};

struct RunConfig {
  DatasetConfig dataset;
  std::vector<missing::MissingnessSpec> missingness;
  std::vector<bool> missingness_seeded;  // true where the spec JSON fixed its own seed
  std::vector<std::string> methods{"impugan", "gm", "fv"};
  gan::TrainConfig train;
  eval::EvalConfig evaluation;
  std::filesystem::path output{"out"};
  std::uint64_t seed = 0;

  // Command inputs.
  std::filesystem::path checkpoint;  // impute: defaults to <output>/model
  std::filesystem::path input;       // impute: incomplete CSV
  std::filesystem::path truth;       // evaluate
  std::filesystem::path imputed;     // evaluate
  std::filesystem::path mask;        // evaluate
  std::filesystem::path test;        // evaluate: optional fully observed test split
  std::size_t samples = 0;           // train/impute: synthetic rows to emit
  double fv_constant = 0.0;
  double train_fraction = 0.75;
  int workers = 1;
  bool force = false;

  std::string dataset_name() const;
};

// Unknown fields are rejected. Relative paths resolve against `base`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

// Mask sweep used when a benchmark config lists no missingness spec.
std::vector<missing::MissingnessSpec> default_sweep();

// "MCAR-0.3"
std::string spec_label(const missing::MissingnessSpec& spec);
// Seed of a mask spec: its own seed when the JSON fixed one, otherwise
// derived from the master seed and the spec label.
std::uint64_t spec_seed(const RunConfig& c, std::size_t index);

std::uint64_t fnv1a(const std::string& text);
std::string hex64(std::uint64_t v);
std::string config_hash(const RunConfig& c);
// {config_hash, seed, versions, command}
nlohmann::json provenance(const RunConfig& c, const std::string& command);

}  // namespace impugan::cli
