#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace impugan::data {

struct GmmModel {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stds;

  int components() const { return static_cast<int>(weights.size()); }
  // log(weight_m) + log N(v; mean_m, std_m) for every component.
  void log_joint(double v, std::span<double> out) const;
  double mean_log_likelihood(std::span<const double> values) const;
};

struct GmmOptions {
  int max_iterations = 100;
  // Stop once the mean per-sample log-likelihood gains less than this.
  double tolerance = 1e-6;
};

struct GmmFit {
  GmmModel model;
  // Mean log-likelihood after initialization and after every EM iteration.
  std::vector<double> trace;
  int requested_components = 0;
  bool converged = false;
};

// EM fit of a univariate mixture, seeded by k-means++. With fewer distinct
// values than k the component count drops to the distinct count.
GmmFit fit_gmm(std::span<const double> values, int k, std::uint64_t seed, const GmmOptions& options = {});

}  // namespace impugan::data
