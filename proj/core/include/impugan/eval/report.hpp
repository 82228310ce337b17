#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "impugan/data/table.hpp"
#include "impugan/eval/downstream.hpp"
#include "impugan/eval/metrics.hpp"

namespace impugan::eval {

struct EvalConfig {
  std::string label;  // empty disables downstream accuracy
  int jsd_bins = 20;
  int mi_bins = 10;
  std::vector<ClassifierKind> classifiers{ClassifierKind::kLinearSvm, ClassifierKind::kMlp};
  ClassifierOptions classifier;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const EvalConfig& config);
EvalConfig eval_config_from_json(const nlohmann::json& j);

// Fixed metric order of every report and of the CSV columns.
const std::vector<std::string>& metric_names();

struct EvaluationReport {
  std::string dataset;
  std::string method;
  std::string missingness;  // serialized MissingnessSpec JSON, "{}" when absent
  std::vector<MetricValue> metrics;     // metric_names() order
  std::vector<MetricValue> accuracies;  // one per configured classifier
  std::uint64_t seed = 0;
  std::string provenance;  // serialized JSON object supplied by the caller

  const MetricValue& metric(const std::string& name) const;
};

// `mask` marks the evaluated cells (0 = masked). When `test` is given and the
// config names a label, classifiers are trained on `imputed` and scored on
// `test`.
EvaluationReport evaluate_all(const data::Table& truth, const data::Table& imputed, const data::MaskMatrix& mask,
                              const EvalConfig& config, const data::Table* test = nullptr);

nlohmann::json report_to_json(const EvaluationReport& report);
// dataset -> method -> list of reports.
nlohmann::json reports_to_json(const std::vector<EvaluationReport>& reports);
EvaluationReport report_from_json(const nlohmann::json& j);

std::vector<std::string> csv_header(const EvalConfig& config);
void write_reports_csv(std::ostream& out, const std::vector<EvaluationReport>& reports, const EvalConfig& config);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per label class: rows in table order, seeded shuffle, first
// round(fraction * n_class) to train. Both index lists come back sorted.
Split stratified_split(const data::Table& table, std::size_t label, double train_fraction, std::uint64_t seed);

}  // namespace impugan::eval
