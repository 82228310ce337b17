#include "impugan/impute/imputer.hpp"

#include <fstream>
#include <map>
#include <ostream>
#include <random>

#include "impugan/cond/condition.hpp"
#include "impugan/data/csv.hpp"
#include "impugan/error.hpp"
#include "impugan/rng.hpp"

namespace impugan::impute {
namespace {

ImputationResult start(const data::Table& incomplete, std::string method, std::uint64_t seed) {
  ImputationResult r{incomplete, {}, std::move(method), seed, std::nullopt};
  r.provenance.assign(incomplete.rows() * incomplete.cols(), Provenance::kObserved);
  return r;
}

void fill(ImputationResult& r, std::size_t row, std::size_t col, double value, Provenance p = Provenance::kImputed) {
  r.completed.set(row, col, value);
  r.provenance[row * r.completed.cols() + col] = p;
}

}  // namespace

ImputationResult impute_impugan(const gan::ImpuganModel& model, const data::Table& incomplete, std::uint64_t seed) {
  const data::Transformer& tr = model.transformer;
  tr.check_compatible(incomplete.schema());
  const data::EncodedLayout& layout = tr.layout();
  const std::size_t d = incomplete.cols();

  std::vector<std::size_t> targets;
  for (std::size_t r = 0; r < incomplete.rows(); ++r) {
    if (!incomplete.complete_row(r)) targets.push_back(r);
  }
  const auto m = static_cast<Eigen::Index>(targets.size());
  ad::Matrix z(m, model.config.noise_dim);
  ad::Matrix conditions = ad::Matrix::Zero(m, layout.condition_width);
  std::vector<bool> unconditional(targets.size(), false);
  std::vector<bool> conditioned(targets.size(), false);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::size_t row = targets[i];
    Rng rng(derive_seed(seed, row));
    for (int k = 0; k < model.config.noise_dim; ++k) z(static_cast<Eigen::Index>(i), k) = normal(rng);
    bool any_observed = false;
    for (std::size_t c = 0; c < d; ++c) {
      if (incomplete.missing(row, c)) continue;
      any_observed = true;
      const auto& e = layout.columns[c];
      if (e.kind == data::ColumnKind::kDiscrete) {
        conditions(static_cast<Eigen::Index>(i), e.condition_offset + incomplete.category(row, c)) = 1.0;
        conditioned[i] = true;
      }
    }
    unconditional[i] = !any_observed;
    if (!conditioned[i]) conditions.row(static_cast<Eigen::Index>(i)) = gan::unconditional_conditions(model, 1, rng);
  }

  ad::Matrix act = gan::generate(model, z, conditions);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!conditioned[static_cast<std::size_t>(i)]) conditions.row(i).setZero();
  }
  cond::hard_apply(act, conditions, layout);

  ImputationResult out = start(incomplete, "impugan", seed);
  out.generated = data::Table(tr.schema(), incomplete.rows());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::size_t row = targets[i];
    const auto enc = act.row(static_cast<Eigen::Index>(i));
    tr.inverse_row(std::span<const double>(enc.data(), static_cast<std::size_t>(enc.size())), *out.generated, row);
    const Provenance p = unconditional[i] ? Provenance::kUnconditional : Provenance::kImputed;
    for (std::size_t c = 0; c < d; ++c) {
      if (incomplete.missing(row, c)) fill(out, row, c, out.generated->at(row, c), p);
    }
  }
  return out;
}

std::vector<ImputationResult> impute_impugan_multiple(const gan::ImpuganModel& model, const data::Table& incomplete,
                                                      std::uint64_t seed, int draws) {
  if (draws < 1) throw ConfigError("multiple imputation needs at least one draw");
  std::vector<ImputationResult> out;
  for (int k = 0; k < draws; ++k) out.push_back(impute_impugan(model, incomplete, derive_seed(seed, static_cast<std::uint64_t>(k))));
  return out;
}

ImputationResult impute_gm(const data::Table& incomplete) {
  ImputationResult out = start(incomplete, "gm", 0);
  for (std::size_t c = 0; c < incomplete.cols(); ++c) {
    const auto& spec = incomplete.schema().columns[c];
    const std::vector<double> obs = incomplete.observed_values(c);
    if (obs.empty()) throw DataError("GM imputation: column '" + spec.name + "' is entirely missing");
    double value = 0;
    if (spec.discrete()) {
      std::vector<std::size_t> counts(spec.categories.size(), 0);
      for (double v : obs) ++counts[static_cast<std::size_t>(v)];
      value = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    } else {
      for (double v : obs) value += v;
      value /= static_cast<double>(obs.size());
    }
    for (std::size_t r = 0; r < incomplete.rows(); ++r) {
      if (incomplete.missing(r, c)) fill(out, r, c, value);
    }
  }
  return out;
}

ImputationResult impute_fv(const data::Table& incomplete, double constant) {
  ImputationResult out = start(incomplete, "fv", 0);
  for (std::size_t c = 0; c < incomplete.cols(); ++c) {
    const double value = incomplete.schema().columns[c].discrete() ? 0.0 : constant;
    for (std::size_t r = 0; r < incomplete.rows(); ++r) {
      if (incomplete.missing(r, c)) fill(out, r, c, value);
    }
  }
  return out;
}

void write_provenance_csv(std::ostream& out, const ImputationResult& result) {
  data::CsvRecord rec;
  for (const auto& c : result.completed.schema().columns) rec.push_back(c.name);
  data::write_csv_record(out, rec);
  std::string line;
  for (std::size_t r = 0; r < result.completed.rows(); ++r) {
    line.clear();
    for (std::size_t c = 0; c < result.completed.cols(); ++c) {
      if (c) line.push_back(',');
      line.push_back(static_cast<char>(result.at(r, c)));
    }
    line.push_back('\n');
    out << line;
  }
}

void write_provenance_csv(const std::filesystem::path& path, const ImputationResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_provenance_csv(out, result);
}

}  // namespace impugan::impute
