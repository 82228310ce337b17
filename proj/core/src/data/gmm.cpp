#include "impugan/data/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "impugan/error.hpp"
#include "impugan/rng.hpp"

namespace impugan::data {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

struct Moments {
  double mean = 0;
  double sd = 0;
};

Moments moments(std::span<const double> v) {
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

// k-means++ seeding followed by a few Lloyd passes on the sorted values.
std::vector<double> initial_centers(std::span<const double> sorted, std::span<const double> distinct, int k,
                                    Rng& rng) {
  if (static_cast<int>(distinct.size()) == k) return {distinct.begin(), distinct.end()};
  const std::size_t n = sorted.size();
  std::vector<double> centers;
  centers.push_back(sorted[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (sorted[i] - c) * (sorted[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0) break;
    double u = uniform01(rng) * total;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      u -= d2[i];
      if (u < 0) {
        pick = i;
        break;
      }
    }
    centers.push_back(sorted[pick]);
  }
  std::sort(centers.begin(), centers.end());
  std::vector<double> sum(centers.size());
  std::vector<std::size_t> count(centers.size());
  for (int pass = 0; pass < 10; ++pass) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (double x : sorted) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < centers.size(); ++c) {
        if (std::abs(x - centers[c]) < std::abs(x - centers[best])) best = c;
      }
      sum[best] += x;
      ++count[best];
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (count[c]) centers[c] = sum[c] / static_cast<double>(count[c]);
    }
  }
  return centers;
}

}  // namespace

void GmmModel::log_joint(double v, std::span<double> out) const {
  for (std::size_t m = 0; m < weights.size(); ++m) {
    if (weights[m] <= 0) {
      out[m] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double z = (v - means[m]) / stds[m];
    out[m] = std::log(weights[m]) - std::log(stds[m]) - kLogSqrt2Pi - 0.5 * z * z;
  }
}

double GmmModel::mean_log_likelihood(std::span<const double> values) const {
  std::vector<double> lj(weights.size());
  double total = 0;
  for (double v : values) {
    log_joint(v, lj);
    total += log_sum_exp(lj);
  }
  return total / static_cast<double>(values.size());
}

GmmFit fit_gmm(std::span<const double> values, int k, std::uint64_t seed, const GmmOptions& options) {
  if (values.empty()) throw DataError("fit_gmm: no values");
  if (k < 1) throw ConfigError("fit_gmm: component count must be positive");
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("fit_gmm: non-finite value");
  }
  GmmFit fit;
  fit.requested_components = k;

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (static_cast<int>(distinct.size()) < k) {
    spdlog::info("fit_gmm: {} distinct values, reducing components from {} to {}", distinct.size(), k,
                 distinct.size());
    k = static_cast<int>(distinct.size());
  }

  const Moments all = moments(values);
  const double floor = all.sd > 0 ? 1e-3 * all.sd : 1e-6 * std::max(1.0, std::abs(all.mean));
  const std::size_t n = values.size();
  const double nd = static_cast<double>(n);

  GmmModel& model = fit.model;
  if (k == 1) {
    model = {{1.0}, {all.mean}, {std::max(all.sd, floor)}};
    fit.trace.push_back(model.mean_log_likelihood(values));
    fit.converged = true;
    return fit;
  }

  Rng rng(mix_seed(seed));
  const std::vector<double> centers = initial_centers(sorted, distinct, k, rng);
  k = static_cast<int>(centers.size());
  model.means = centers;
  model.weights.assign(centers.size(), 0.0);
  model.stds.assign(centers.size(), 0.0);
  {
    std::vector<double> ss(centers.size());
    std::vector<double> cnt(centers.size());
    for (double x : values) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < centers.size(); ++c) {
        if (std::abs(x - centers[c]) < std::abs(x - centers[best])) best = c;
      }
      ss[best] += (x - centers[best]) * (x - centers[best]);
      cnt[best] += 1;
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      // Empty clusters keep a small share so EM can still move them.
      model.weights[c] = std::max(cnt[c], 1.0) / (nd + static_cast<double>(centers.size()));
      model.stds[c] = cnt[c] > 0 ? std::max(std::sqrt(ss[c] / cnt[c]), floor) : std::max(all.sd, floor);
    }
    double wsum = 0;
    for (double w : model.weights) wsum += w;
    for (double& w : model.weights) w /= wsum;
  }

  const std::size_t kk = centers.size();
  std::vector<double> resp(n * kk);
  std::vector<double> lj(kk);
  std::vector<double> offset(kk);
  std::vector<double> inv_sd(kk);
  auto e_step = [&] {
    for (std::size_t m = 0; m < kk; ++m) {
      offset[m] = model.weights[m] > 0 ? std::log(model.weights[m]) - std::log(model.stds[m]) - kLogSqrt2Pi
                                       : -std::numeric_limits<double>::infinity();
      inv_sd[m] = 1.0 / model.stds[m];
    }
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < kk; ++m) {
        const double z = (values[i] - model.means[m]) * inv_sd[m];
        lj[m] = offset[m] - 0.5 * z * z;
        top = std::max(top, lj[m]);
      }
      double sum = 0;
      for (std::size_t m = 0; m < kk; ++m) {
        lj[m] = std::exp(lj[m] - top);
        sum += lj[m];
      }
      total += top + std::log(sum);
      const double inv = 1.0 / sum;
      for (std::size_t m = 0; m < kk; ++m) resp[i * kk + m] = lj[m] * inv;
    }
    return total / nd;
  };

  double ll = e_step();
  fit.trace.push_back(ll);
  for (int it = 0; it < options.max_iterations; ++it) {
    for (std::size_t m = 0; m < kk; ++m) {
      double nk = 0;
      double sx = 0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * kk + m];
        sx += resp[i * kk + m] * values[i];
      }
      model.weights[m] = nk / nd;
      if (nk < 1e-12) continue;
      const double mu = sx / nk;
      double sv = 0;
      for (std::size_t i = 0; i < n; ++i) sv += resp[i * kk + m] * (values[i] - mu) * (values[i] - mu);
      model.means[m] = mu;
      model.stds[m] = std::max(std::sqrt(sv / nk), floor);
    }
    double wsum = 0;
    for (double w : model.weights) wsum += w;
    for (double& w : model.weights) w /= wsum;
    const double next = e_step();
    fit.trace.push_back(next);
    if (next - ll < options.tolerance) {
      fit.converged = true;
      break;
    }
    ll = next;
  }
  return fit;
}

}  // namespace impugan::data
