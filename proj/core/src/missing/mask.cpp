#include "impugan/missing/mask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "impugan/data/csv.hpp"
#include "impugan/error.hpp"
#include "impugan/rng.hpp"

namespace impugan::missing {
namespace {

constexpr int kRowRedraws = 100;

double quantile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<bool> exempt_flags(const data::TableSchema& schema, const MissingnessSpec& spec) {
  std::vector<bool> exempt(schema.size(), false);
  for (const auto& name : spec.exempt) exempt[schema.index(name)] = true;
  return exempt;
}

// Effective exempt set: MAR needs at least one always-observed driver.
std::vector<bool> effective_exempt(const data::TableSchema& schema, const MissingnessSpec& spec) {
  std::vector<bool> exempt = exempt_flags(schema, spec);
  if (spec.mechanism == Mechanism::kMar && std::none_of(exempt.begin(), exempt.end(), [](bool b) { return b; }) &&
      spec.drivers.empty()) {
    std::size_t first = 0;
    for (std::size_t j = 1; j < schema.size(); ++j) {
      if (schema.columns[j].name < schema.columns[first].name) first = j;
    }
    exempt[first] = true;
  }
  for (const auto& [target, driver] : spec.drivers) exempt[schema.index(driver)] = true;
  return exempt;
}

}  // namespace

std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::kMcar:
      return "MCAR";
    case Mechanism::kMar:
      return "MAR";
    case Mechanism::kMnar:
      return "MNAR";
  }
  return "?";
}

Mechanism parse_mechanism(std::string_view text) {
  std::string up(text);
  for (char& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "MCAR") return Mechanism::kMcar;
  if (up == "MAR") return Mechanism::kMar;
  if (up == "MNAR") return Mechanism::kMnar;
  throw ConfigError("unknown missingness mechanism '" + std::string(text) + "'");
}

void MissingnessSpec::validate(const data::TableSchema& schema) const {
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("missingness rate must lie in (0, 1), got " + std::to_string(rate));
  if (!(quantile > 0.0 && quantile < 1.0)) throw ConfigError("MNAR quantile must lie in (0, 1)");
  for (const auto& name : exempt) {
    if (schema.find(name) < 0) throw ConfigError("exempt column '" + name + "' is not in the schema");
  }
  for (const auto& [target, driver] : drivers) {
    if (schema.find(target) < 0) throw ConfigError("MAR target column '" + target + "' is not in the schema");
    if (schema.find(driver) < 0) throw ConfigError("MAR driver column '" + driver + "' is not in the schema");
    if (target == driver) throw ConfigError("MAR column '" + target + "' cannot drive itself");
  }
}

nlohmann::json to_json(const MissingnessSpec& spec) {
  return {{"mechanism", std::string(to_string(spec.mechanism))},
          {"rate", spec.rate},
          {"seed", spec.seed},
          {"exempt", spec.exempt},
          {"drivers", spec.drivers},
          {"quantile", spec.quantile}};
}

MissingnessSpec spec_from_json(const nlohmann::json& j) {
  MissingnessSpec s;
  try {
    s.mechanism = parse_mechanism(j.value("mechanism", std::string("MCAR")));
    s.rate = j.value("rate", s.rate);
    s.seed = j.value("seed", s.seed);
    s.exempt = j.value("exempt", s.exempt);
    s.drivers = j.value("drivers", s.drivers);
    s.quantile = j.value("quantile", s.quantile);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed missingness spec: ") + e.what());
  }
  return s;
}

std::map<std::size_t, std::size_t> mar_drivers(const data::TableSchema& schema, const MissingnessSpec& spec) {
  const std::vector<bool> exempt = effective_exempt(schema, spec);
  std::vector<std::size_t> pool;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (exempt[j]) pool.push_back(j);
  }
  std::sort(pool.begin(), pool.end(),
            [&](std::size_t a, std::size_t b) { return schema.columns[a].name < schema.columns[b].name; });
  std::map<std::size_t, std::size_t> out;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (exempt[j]) continue;
    if (auto it = spec.drivers.find(schema.columns[j].name); it != spec.drivers.end()) {
      out[j] = schema.index(it->second);
      continue;
    }
    if (pool.empty()) throw ConfigError("MAR needs at least one exempt driver column");
    const auto next = std::find_if(pool.begin(), pool.end(), [&](std::size_t k) {
      return schema.columns[k].name > schema.columns[j].name;
    });
    out[j] = next == pool.end() ? pool.front() : *next;
  }
  return out;
}

MaskMatrix generate_mask(const Table& table, const MissingnessSpec& spec) {
  const data::TableSchema& schema = table.schema();
  spec.validate(schema);
  const std::size_t n = table.rows();
  const std::size_t d = table.cols();
  const std::vector<bool> exempt = effective_exempt(schema, spec);

  // Per-cell masking probability; 0 for cells that are exempt or already missing.
  std::vector<double> prob(n * d, 0.0);
  auto p = [&](std::size_t r, std::size_t c) -> double& { return prob[r * d + c]; };

  switch (spec.mechanism) {
    case Mechanism::kMcar:
      for (std::size_t c = 0; c < d; ++c) {
        if (exempt[c]) continue;
        for (std::size_t r = 0; r < n; ++r) p(r, c) = spec.rate;
      }
      break;
    case Mechanism::kMar: {
      for (const auto& [c, driver] : mar_drivers(schema, spec)) {
        const std::vector<double> obs = table.observed_values(driver);
        double mean = 0;
        double sd = 0;
        if (!obs.empty()) {
          for (double v : obs) mean += v;
          mean /= static_cast<double>(obs.size());
          for (double v : obs) sd += (v - mean) * (v - mean);
          sd = std::sqrt(sd / static_cast<double>(obs.size()));
        }
        std::vector<double> s(n);
        double s_mean = 0;
        for (std::size_t r = 0; r < n; ++r) {
          const double z = table.missing(r, driver) || sd == 0 ? 0.0 : (table.at(r, driver) - mean) / sd;
          s[r] = 1.0 / (1.0 + std::exp(-z));
          s_mean += s[r];
        }
        s_mean /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) p(r, c) = std::min(1.0, spec.rate * s[r] / s_mean);
      }
      break;
    }
    case Mechanism::kMnar:
      for (std::size_t c = 0; c < d; ++c) {
        if (exempt[c]) continue;
        const std::vector<double> obs = table.observed_values(c);
        if (obs.empty()) continue;
        const double threshold = quantile_of(obs, spec.quantile);
        const auto above = static_cast<double>(std::count_if(obs.begin(), obs.end(), [&](double v) { return v > threshold; }));
        if (above == 0) {
          spdlog::warn("MNAR: column '{}' has no values above its {} quantile; left unmasked", schema.columns[c].name,
                       spec.quantile);
          continue;
        }
        const double q = std::min(1.0, spec.rate * static_cast<double>(obs.size()) / above);
        for (std::size_t r = 0; r < n; ++r) {
          if (!table.missing(r, c) && table.at(r, c) > threshold) p(r, c) = q;
        }
      }
      break;
  }

  MaskMatrix mask = table.mask();
  std::size_t guarded = 0;
  for (std::size_t r = 0; r < n; ++r) {
    Rng rng(derive_seed(spec.seed, r));
    bool any_observed_before = false;
    for (std::size_t c = 0; c < d; ++c) any_observed_before = any_observed_before || mask.observed(r, c);
    std::vector<bool> drop(d, false);
    for (int attempt = 0; attempt <= kRowRedraws; ++attempt) {
      bool any_left = false;
      for (std::size_t c = 0; c < d; ++c) {
        drop[c] = !table.missing(r, c) && p(r, c) > 0 && uniform01(rng) < p(r, c);
        any_left = any_left || (mask.observed(r, c) && !drop[c]);
      }
      if (any_left || !any_observed_before) break;
      if (attempt == kRowRedraws) {
        std::vector<std::size_t> candidates;
        for (std::size_t c = 0; c < d; ++c) {
          if (drop[c]) candidates.push_back(c);
        }
        drop[candidates[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(candidates.size())) %
                        candidates.size()]] = false;
        ++guarded;
      }
    }
    for (std::size_t c = 0; c < d; ++c) {
      if (drop[c]) mask.set(r, c, false);
    }
  }
  if (guarded > 0) spdlog::info("generate_mask: kept one cell observed in {} rows after {} redraws", guarded, kRowRedraws);
  return mask;
}

IncompleteTable apply_mask(const Table& table, const MaskMatrix& mask) {
  if (mask.rows() != table.rows() || mask.cols() != table.cols()) {
    throw ShapeError("apply_mask: mask is " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) +
                     ", table is " + std::to_string(table.rows()) + "x" + std::to_string(table.cols()));
  }
  IncompleteTable out{table, table, mask};
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
      if (!mask.observed(r, c)) out.incomplete.set_missing(r, c);
    }
  }
  return out;
}

void write_mask_csv(std::ostream& out, const MaskMatrix& mask, const data::TableSchema& schema) {
  data::CsvRecord rec;
  for (const auto& c : schema.columns) rec.push_back(c.name);
  data::write_csv_record(out, rec);
  std::string line;
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    line.clear();
    for (std::size_t c = 0; c < mask.cols(); ++c) {
      if (c) line.push_back(',');
      line.push_back(mask.observed(r, c) ? '1' : '0');
    }
    line.push_back('\n');
    out << line;
  }
}

void write_mask_csv(const std::filesystem::path& path, const MaskMatrix& mask, const data::TableSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_mask_csv(out, mask, schema);
}

MaskMatrix read_mask_csv(const std::filesystem::path& path, const data::TableSchema& schema) {
  const auto records = data::read_csv_file(path);
  if (records.empty()) throw DataError("mask file '" + path.string() + "' is empty");
  if (records[0].size() != schema.size()) throw DataError("mask file column count does not match the table");
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (records[0][c] != schema.columns[c].name) throw DataError("mask file column '" + records[0][c] + "' does not match '" + schema.columns[c].name + "'");
  }
  MaskMatrix m(records.size() - 1, schema.size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != schema.size()) throw DataError("mask file row " + std::to_string(r) + " is ragged");
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto& cell = records[r][c];
      if (cell != "0" && cell != "1") throw DataError("mask file row " + std::to_string(r) + ": entry '" + cell + "' is not 0/1");
      m.set(r - 1, c, cell == "1");
    }
  }
  return m;
}

}  // namespace impugan::missing
