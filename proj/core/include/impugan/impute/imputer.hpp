#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "impugan/data/table.hpp"
#include "impugan/gan/model.hpp"

namespace impugan::impute {

// Per-cell origin of an imputed table.
enum class Provenance : std::uint8_t {
  kObserved = 'O',
  kImputed = 'I',
  // Imputed from an unconditional sample because the row had no observed cell.
  kUnconditional = 'U',
};

struct ImputationResult {
  data::Table completed;
  std::vector<Provenance> provenance;  // row-major, rows x cols
  std::string method;
  std::uint64_t seed = 0;
  // impugan only: the generated row behind each imputed row (other rows are
  // left missing).
  std::optional<data::Table> generated;

  Provenance at(std::size_t r, std::size_t c) const { return provenance[r * completed.cols() + c]; }
};

// One generator draw per incomplete row, conditioned on every observed
// discrete cell of that row and hard-applied. Row i uses the stream
// derive_seed(seed, i), so results do not depend on batching.
ImputationResult impute_impugan(const gan::ImpuganModel& model, const data::Table& incomplete, std::uint64_t seed);
// m independent completions; draw k uses derive_seed(seed, k) as its seed.
std::vector<ImputationResult> impute_impugan_multiple(const gan::ImpuganModel& model, const data::Table& incomplete,
                                                      std::uint64_t seed, int draws);

// Column mean (continuous) or mode (discrete, lowest index on ties).
ImputationResult impute_gm(const data::Table& incomplete);
// `constant` for continuous cells, the first vocabulary entry for discrete.
ImputationResult impute_fv(const data::Table& incomplete, double constant = 0.0);

void write_provenance_csv(std::ostream& out, const ImputationResult& result);
void write_provenance_csv(const std::filesystem::path& path, const ImputationResult& result);

}  // namespace impugan::impute
