#include "impugan/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "impugan/error.hpp"

namespace impugan::eval {
namespace {

void require_nonempty(std::span<const double> p, std::span<const double> q, const char* what) {
  if (p.empty() || q.empty()) throw DataError(std::string(what) + ": empty sample");
}

std::vector<double> sorted(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return s;
}

bool constant(std::span<const double> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

// Values of both columns on rows observed in both tables.
struct PairSample {
  std::vector<double> ra, rb, ia, ib;
};

PairSample pair_sample(const data::Table& real, const data::Table& imputed, ColumnPair p) {
  PairSample s;
  for (std::size_t r = 0; r < real.rows(); ++r) {
    if (real.missing(r, p.first) || real.missing(r, p.second) || imputed.missing(r, p.first) ||
        imputed.missing(r, p.second)) {
      continue;
    }
    s.ra.push_back(real.at(r, p.first));
    s.rb.push_back(real.at(r, p.second));
    s.ia.push_back(imputed.at(r, p.first));
    s.ib.push_back(imputed.at(r, p.second));
  }
  return s;
}

void check_aligned(const data::Table& real, const data::Table& imputed, const char* what) {
  if (real.rows() != imputed.rows() || real.cols() != imputed.cols()) {
    throw DataError(std::string(what) + ": table dimensions differ");
  }
}

std::vector<ColumnPair> all_pairs(const data::TableSchema& s, int want) {
  // want: 0 discrete-discrete, 1 continuous-continuous, 2 any.
  std::vector<ColumnPair> out;
  for (std::size_t a = 0; a < s.size(); ++a) {
    for (std::size_t b = a + 1; b < s.size(); ++b) {
      const bool da = s.columns[a].discrete();
      const bool db = s.columns[b].discrete();
      if (want == 2 || (want == 0 && da && db) || (want == 1 && !da && !db)) out.emplace_back(a, b);
    }
  }
  return out;
}

MetricValue mean_of(std::string name, const std::vector<double>& values) {
  if (values.empty()) return {std::move(name), 0.0, false};
  return {std::move(name), std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size()), true};
}

}  // namespace

ErrorPair rmse_mae(std::span<const double> truth, std::span<const double> imputed) {
  if (truth.size() != imputed.size()) throw DataError("rmse_mae: length mismatch");
  if (truth.empty()) throw DataError("rmse_mae: no evaluated cells");
  double sq = 0.0;
  double ab = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - imputed[i];
    sq += d * d;
    ab += std::abs(d);
  }
  const auto n = static_cast<double>(truth.size());
  return {std::sqrt(sq / n), ab / n};
}

double ks_statistic(std::span<const double> p, std::span<const double> q) {
  require_nonempty(p, q, "ks_statistic");
  const auto a = sorted(p);
  const auto b = sorted(q);
  const auto n = static_cast<double>(a.size());
  const auto m = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double best = 0.0;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j == b.size() || (i < a.size() && a[i] <= b[j])) {
      x = a[i];
    } else {
      x = b[j];
    }
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return best;
}

double emd_1d(std::span<const double> p, std::span<const double> q) {
  require_nonempty(p, q, "emd_1d");
  const auto a = sorted(p);
  const auto b = sorted(q);
  if (a.size() == b.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
  }
  // Integral of |F - G| over the merged support.
  const auto n = static_cast<double>(a.size());
  const auto m = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double total = 0.0;
  double prev = std::min(a.front(), b.front());
  while (i < a.size() || j < b.size()) {
    const double x = (j == b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
    total += std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m) * (x - prev);
    prev = x;
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
  }
  return total;
}

double jsd_counts(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DataError("jsd: support mismatch");
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  if (sp <= 0.0 || sq <= 0.0) throw DataError("jsd: empty sample");
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double a = p[k] / sp;
    const double b = q[k] / sq;
    const double m = 0.5 * (a + b);
    if (a > 0.0) total += 0.5 * a * std::log2(a / m);
    if (b > 0.0) total += 0.5 * b * std::log2(b / m);
  }
  return std::clamp(total, 0.0, 1.0);
}

double jsd_continuous(std::span<const double> p, std::span<const double> q, int bins) {
  require_nonempty(p, q, "jsd");
  if (bins < 1) throw ConfigError("jsd: bins must be positive");
  const auto [pl, ph] = std::minmax_element(p.begin(), p.end());
  const auto [ql, qh] = std::minmax_element(q.begin(), q.end());
  const double lo = std::min(*pl, *ql);
  const double hi = std::max(*ph, *qh);
  std::vector<double> cp(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> cq(cp.size(), 0.0);
  auto bin = [&](double v) {
    if (!(hi > lo)) return std::size_t{0};
    const auto k = static_cast<std::ptrdiff_t>((v - lo) / (hi - lo) * bins);
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, bins - 1));
  };
  for (double v : p) cp[bin(v)] += 1.0;
  for (double v : q) cq[bin(v)] += 1.0;
  return jsd_counts(cp, cq);
}

double jsd_discrete(std::span<const double> p, std::span<const double> q, int categories) {
  require_nonempty(p, q, "jsd");
  std::vector<double> cp(static_cast<std::size_t>(categories), 0.0);
  std::vector<double> cq(cp.size(), 0.0);
  auto add = [&](std::vector<double>& c, double v) {
    const auto k = static_cast<std::ptrdiff_t>(v);
    if (k < 0 || k >= categories) throw DataError("jsd: category index out of range");
    c[static_cast<std::size_t>(k)] += 1.0;
  };
  for (double v : p) add(cp, v);
  for (double v : q) add(cq, v);
  return jsd_counts(cp, cq);
}

double chi2_normalized(std::span<const double> observed, std::span<const double> reference) {
  if (observed.size() != reference.size()) throw DataError("chi2: contingency shapes differ");
  const double no = std::accumulate(observed.begin(), observed.end(), 0.0);
  const double nr = std::accumulate(reference.begin(), reference.end(), 0.0);
  if (no <= 0.0 || nr <= 0.0) throw DataError("chi2: empty contingency");
  double stat = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double e = reference[k] * no / nr;
    if (e <= 0.0) continue;
    const double d = observed[k] - e;
    stat += d * d / e;
  }
  return stat / no;
}

double mutual_information(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) throw DataError("mutual_information: length mismatch");
  if (x.empty()) throw DataError("mutual_information: empty sample");
  const int kx = *std::max_element(x.begin(), x.end()) + 1;
  const int ky = *std::max_element(y.begin(), y.end()) + 1;
  std::vector<double> joint(static_cast<std::size_t>(kx) * ky, 0.0);
  std::vector<double> px(static_cast<std::size_t>(kx), 0.0);
  std::vector<double> py(static_cast<std::size_t>(ky), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0 || y[i] < 0) throw DataError("mutual_information: negative code");
    joint[static_cast<std::size_t>(x[i]) * ky + y[i]] += 1.0;
    px[static_cast<std::size_t>(x[i])] += 1.0;
    py[static_cast<std::size_t>(y[i])] += 1.0;
  }
  const auto n = static_cast<double>(x.size());
  double mi = 0.0;
  for (int a = 0; a < kx; ++a) {
    for (int b = 0; b < ky; ++b) {
      const double j = joint[static_cast<std::size_t>(a) * ky + b];
      if (j > 0.0) mi += j / n * std::log(j * n / (px[static_cast<std::size_t>(a)] * py[static_cast<std::size_t>(b)]));
    }
  }
  return std::max(mi, 0.0);
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pearson: length mismatch");
  if (x.size() < 2 || constant(x) || constant(y)) return std::nullopt;
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> quantile_edges(std::span<const double> values, int bins) {
  if (bins < 1) throw ConfigError("quantile bins must be positive");
  const auto s = sorted(values);
  std::vector<double> edges;
  if (s.empty()) return edges;
  for (int k = 1; k < bins; ++k) {
    edges.push_back(s[static_cast<std::size_t>(k) * s.size() / static_cast<std::size_t>(bins)]);
  }
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  // A cut at the minimum would leave its lower bin empty.
  if (!edges.empty() && edges.front() == s.front()) edges.erase(edges.begin());
  return edges;
}

int bin_of(std::span<const double> edges, double v) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
}

MetricValue chi2_pairwise(const data::Table& real, const data::Table& imputed, std::vector<ColumnPair> pairs) {
  check_aligned(real, imputed, "chi2_pairwise");
  if (pairs.empty()) pairs = all_pairs(real.schema(), 0);
  std::vector<double> values;
  std::size_t eligible = 0;
  for (const auto& p : pairs) {
    const auto& ca = real.schema().columns[p.first];
    const auto& cb = real.schema().columns[p.second];
    if (!ca.discrete() || !cb.discrete()) throw DataError("chi2_pairwise: pair '" + ca.name + "','" + cb.name + "' is not categorical");
    const PairSample s = pair_sample(real, imputed, p);
    if (s.ra.empty() || constant(s.ra) || constant(s.rb)) {
      spdlog::debug("chi2: skipping degenerate pair ({}, {})", ca.name, cb.name);
      continue;
    }
    ++eligible;
    if (constant(s.ia) || constant(s.ib)) continue;
    const std::size_t kb = cb.categories.size();
    std::vector<double> obs(ca.categories.size() * kb, 0.0);
    std::vector<double> ref(obs.size(), 0.0);
    for (std::size_t i = 0; i < s.ra.size(); ++i) {
      ref[static_cast<std::size_t>(s.ra[i]) * kb + static_cast<std::size_t>(s.rb[i])] += 1.0;
      obs[static_cast<std::size_t>(s.ia[i]) * kb + static_cast<std::size_t>(s.ib[i])] += 1.0;
    }
    values.push_back(chi2_normalized(obs, ref));
  }
  if (eligible == 0) spdlog::warn("chi2: no eligible categorical pairs");
  return mean_of("chi2", values);
}

MetricValue mi_deviation(const data::Table& real, const data::Table& imputed, std::vector<ColumnPair> pairs, int bins) {
  check_aligned(real, imputed, "mi_deviation");
  if (pairs.empty()) pairs = all_pairs(real.schema(), 2);
  std::vector<std::vector<double>> edges(real.cols());
  for (std::size_t c = 0; c < real.cols(); ++c) {
    if (!real.schema().columns[c].discrete()) edges[c] = quantile_edges(real.observed_values(c), bins);
  }
  auto code = [&](std::size_t c, double v) {
    return real.schema().columns[c].discrete() ? static_cast<int>(v) : bin_of(edges[c], v);
  };
  std::vector<double> values;
  std::size_t skipped = 0;
  for (const auto& p : pairs) {
    const PairSample s = pair_sample(real, imputed, p);
    std::vector<int> ra, rb, ia, ib;
    for (std::size_t i = 0; i < s.ra.size(); ++i) {
      ra.push_back(code(p.first, s.ra[i]));
      rb.push_back(code(p.second, s.rb[i]));
      ia.push_back(code(p.first, s.ia[i]));
      ib.push_back(code(p.second, s.ib[i]));
    }
    auto single = [](const std::vector<int>& v) {
      return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
    };
    if (ra.empty() || single(ra) || single(rb)) {
      ++skipped;
      spdlog::debug("mi: skipping pair ({}, {}) with a single-category variable", real.schema().columns[p.first].name,
                    real.schema().columns[p.second].name);
      continue;
    }
    values.push_back(std::abs(mutual_information(ra, rb) - mutual_information(ia, ib)));
  }
  if (skipped > 0) spdlog::info("mi: skipped {} of {} pairs with a single-category variable", skipped, pairs.size());
  return mean_of("mi_dev", values);
}

MetricValue pearson_deviation(const data::Table& real, const data::Table& imputed, std::vector<ColumnPair> pairs) {
  check_aligned(real, imputed, "pearson_deviation");
  if (pairs.empty()) pairs = all_pairs(real.schema(), 1);
  std::vector<double> values;
  for (const auto& p : pairs) {
    const PairSample s = pair_sample(real, imputed, p);
    const auto rr = pearson(s.ra, s.rb);
    if (!rr) continue;
    const auto ri = pearson(s.ia, s.ib);
    if (!ri) continue;
    values.push_back(std::abs(*rr - *ri));
  }
  return mean_of("pearson_dev", values);
}

Range column_range(const data::Table& table, std::size_t column) {
  const auto v = table.observed_values(column);
  if (v.empty()) return {};
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

}  // namespace impugan::eval
