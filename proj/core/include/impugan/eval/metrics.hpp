#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "impugan/data/table.hpp"

namespace impugan::eval {

struct MetricValue {
  std::string name;
  double value = 0.0;
  // false when the formula is undefined on the inputs (zero variance).
  bool defined = true;

  bool operator==(const MetricValue&) const = default;
};

using ColumnPair = std::pair<std::size_t, std::size_t>;

struct ErrorPair {
  double rmse = 0.0;
  double mae = 0.0;
};

// Inputs are expected to be already normalized.
ErrorPair rmse_mae(std::span<const double> truth, std::span<const double> imputed);

// sup |F_p - F_q| over the merged sample points.
double ks_statistic(std::span<const double> p, std::span<const double> q);
// Wasserstein-1 between the two empirical distributions.
double emd_1d(std::span<const double> p, std::span<const double> q);
// Jensen-Shannon divergence (base 2) between two count vectors.
double jsd_counts(std::span<const double> p, std::span<const double> q);
// Equal-width bins over the pooled range.
double jsd_continuous(std::span<const double> p, std::span<const double> q, int bins = 20);
// Samples hold category indices in [0, categories).
double jsd_discrete(std::span<const double> p, std::span<const double> q, int categories);

// Normalized chi-square of one contingency table against another.
// `observed` is the imputed contingency; `reference` is rescaled to its total.
// Cells with zero reference count are skipped.
double chi2_normalized(std::span<const double> observed, std::span<const double> reference);

// Plug-in mutual information (nats) of two aligned integer codings.
double mutual_information(std::span<const int> x, std::span<const int> y);

// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Quantile bin edges fitted on `values` (interior cut points, deduplicated).
std::vector<double> quantile_edges(std::span<const double> values, int bins);
int bin_of(std::span<const double> edges, double v);

// Table-level dependence metrics. Rows with a missing cell in either table
// for the pair are dropped. Default pair sets are used when `pairs` is empty:
// discrete-discrete for chi2, continuous-continuous for pearson, all pairs
// for MI.
MetricValue chi2_pairwise(const data::Table& real, const data::Table& imputed, std::vector<ColumnPair> pairs = {});
MetricValue mi_deviation(const data::Table& real, const data::Table& imputed, std::vector<ColumnPair> pairs = {},
                         int bins = 10);
MetricValue pearson_deviation(const data::Table& real, const data::Table& imputed, std::vector<ColumnPair> pairs = {});

// Min-max scaling by [lo, hi]; zero range maps everything to v - lo.
struct Range {
  double lo = 0.0;
  double hi = 1.0;
  double scale(double v) const { return hi > lo ? (v - lo) / (hi - lo) : v - lo; }
};
Range column_range(const data::Table& table, std::size_t column);

}  // namespace impugan::eval
