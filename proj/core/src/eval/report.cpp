#include "impugan/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

#include "impugan/data/csv.hpp"
#include "impugan/error.hpp"
#include "impugan/rng.hpp"

namespace impugan::eval {
namespace {

double average(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

MetricValue averaged(const std::string& name, const std::vector<double>& v) {
  if (v.empty()) return {name, 0.0, false};
  return {name, average(v), true};
}

nlohmann::json value_json(const MetricValue& m) { return m.defined ? nlohmann::json(m.value) : nlohmann::json(nullptr); }

MetricValue value_from_json(const std::string& name, const nlohmann::json& j) {
  if (j.is_null()) return {name, 0.0, false};
  return {name, j.get<double>(), true};
}

std::string cell(const MetricValue& m) { return m.defined ? data::format_number(m.value) : "null"; }

}  // namespace

void EvalConfig::validate() const {
  if (jsd_bins < 1) throw ConfigError("evaluation: jsd_bins must be positive");
  if (mi_bins < 1) throw ConfigError("evaluation: mi_bins must be positive");
  if (classifier.mlp_hidden < 1 || classifier.mlp_max_epochs < 1 || classifier.batch_size < 1 ||
      classifier.svm_epochs < 1) {
    throw ConfigError("evaluation: classifier sizes must be positive");
  }
}

nlohmann::json to_json(const EvalConfig& c) {
  nlohmann::json cls = nlohmann::json::array();
  for (auto k : c.classifiers) cls.push_back(to_string(k));
  return {{"label", c.label},
          {"jsd_bins", c.jsd_bins},
          {"mi_bins", c.mi_bins},
          {"classifiers", cls},
          {"seed", c.seed},
          {"mlp_hidden", c.classifier.mlp_hidden},
          {"mlp_max_epochs", c.classifier.mlp_max_epochs},
          {"svm_epochs", c.classifier.svm_epochs},
          {"batch_size", c.classifier.batch_size}};
}

EvalConfig eval_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("evaluation config must be a JSON object");
  EvalConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "label") c.label = value.get<std::string>();
      else if (key == "jsd_bins") c.jsd_bins = value.get<int>();
      else if (key == "mi_bins") c.mi_bins = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "mlp_hidden") c.classifier.mlp_hidden = value.get<int>();
      else if (key == "mlp_max_epochs") c.classifier.mlp_max_epochs = value.get<int>();
      else if (key == "svm_epochs") c.classifier.svm_epochs = value.get<int>();
      else if (key == "batch_size") c.classifier.batch_size = value.get<int>();
      else if (key == "classifiers") {
        c.classifiers.clear();
        for (const auto& k : value) c.classifiers.push_back(parse_classifier(k.get<std::string>()));
      } else {
        throw ConfigError("evaluation: unknown field '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("evaluation config: ") + e.what());
  }
  c.validate();
  return c;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"rmse", "mae", "ks", "emd", "jsd", "chi2", "mi_dev", "pearson_dev"};
  return names;
}

const MetricValue& EvaluationReport::metric(const std::string& name) const {
  for (const auto& m : metrics) {
    if (m.name == name) return m;
  }
  for (const auto& m : accuracies) {
    if (m.name == name) return m;
  }
  throw Error("report has no metric '" + name + "'");
}

EvaluationReport evaluate_all(const data::Table& truth, const data::Table& imputed, const data::MaskMatrix& mask,
                              const EvalConfig& config, const data::Table* test) {
  config.validate();
  if (truth.rows() != imputed.rows() || truth.cols() != imputed.cols() || mask.rows() != truth.rows() ||
      mask.cols() != truth.cols()) {
    throw DataError("evaluate_all: truth, imputed table and mask dimensions differ");
  }
  const auto& schema = truth.schema();
  std::vector<double> t_all, i_all, ks, emd, jsd;
  for (std::size_t c = 0; c < truth.cols(); ++c) {
    const bool discrete = schema.columns[c].discrete();
    const Range range = column_range(truth, c);
    std::vector<double> tv, iv;
    for (std::size_t r = 0; r < truth.rows(); ++r) {
      if (mask.observed(r, c)) continue;
      if (truth.missing(r, c)) continue;
      if (imputed.missing(r, c)) {
        throw DataError("evaluate_all: imputed table leaves row " + std::to_string(r + 1) + " column '" +
                        schema.columns[c].name + "' missing");
      }
      tv.push_back(discrete ? truth.at(r, c) : range.scale(truth.at(r, c)));
      iv.push_back(discrete ? imputed.at(r, c) : range.scale(imputed.at(r, c)));
    }
    if (tv.empty()) continue;
    if (discrete) {
      jsd.push_back(jsd_discrete(tv, iv, static_cast<int>(schema.columns[c].categories.size())));
      continue;
    }
    t_all.insert(t_all.end(), tv.begin(), tv.end());
    i_all.insert(i_all.end(), iv.begin(), iv.end());
    ks.push_back(ks_statistic(tv, iv));
    emd.push_back(emd_1d(tv, iv));
    jsd.push_back(jsd_continuous(tv, iv, config.jsd_bins));
  }

  EvaluationReport rep;
  rep.seed = config.seed;
  rep.missingness = "{}";
  rep.provenance = "{}";
  if (t_all.empty()) {
    rep.metrics.push_back({"rmse", 0.0, false});
    rep.metrics.push_back({"mae", 0.0, false});
  } else {
    const ErrorPair e = rmse_mae(t_all, i_all);
    rep.metrics.push_back({"rmse", e.rmse, true});
    rep.metrics.push_back({"mae", e.mae, true});
  }
  rep.metrics.push_back(averaged("ks", ks));
  rep.metrics.push_back(averaged("emd", emd));
  rep.metrics.push_back(averaged("jsd", jsd));
  rep.metrics.push_back(chi2_pairwise(truth, imputed));
  rep.metrics.push_back(mi_deviation(truth, imputed, {}, config.mi_bins));
  rep.metrics.push_back(pearson_deviation(truth, imputed));

  if (test != nullptr && !config.label.empty()) {
    const std::size_t label = schema.index(config.label);
    for (std::size_t k = 0; k < config.classifiers.size(); ++k) {
      const auto kind = config.classifiers[k];
      const double acc = downstream_accuracy(imputed, *test, label, kind, derive_seed(config.seed, 300 + k),
                                             config.classifier);
      rep.accuracies.push_back({"acc_" + to_string(kind), acc, true});
    }
  }
  return rep;
}

nlohmann::json report_to_json(const EvaluationReport& r) {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& m : r.metrics) metrics[m.name] = value_json(m);
  nlohmann::json acc = nlohmann::json::object();
  for (const auto& m : r.accuracies) acc[m.name] = value_json(m);
  return {{"dataset", r.dataset},
          {"method", r.method},
          {"missingness", nlohmann::json::parse(r.missingness)},
          {"metrics", metrics},
          {"accuracy", acc},
          {"seed", r.seed},
          {"provenance", nlohmann::json::parse(r.provenance)}};
}

nlohmann::json reports_to_json(const std::vector<EvaluationReport>& reports) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& r : reports) {
    nlohmann::json entry = report_to_json(r);
    entry.erase("dataset");
    entry.erase("method");
    out[r.dataset][r.method].push_back(std::move(entry));
  }
  return out;
}

EvaluationReport report_from_json(const nlohmann::json& j) {
  try {
    EvaluationReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.missingness = j.at("missingness").dump();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.provenance = j.value("provenance", nlohmann::json::object()).dump();
    const auto& m = j.at("metrics");
    for (const auto& name : metric_names()) r.metrics.push_back(value_from_json(name, m.at(name)));
    for (const auto& [name, v] : j.at("accuracy").items()) r.accuracies.push_back(value_from_json(name, v));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::vector<std::string> csv_header(const EvalConfig& config) {
  std::vector<std::string> h{"dataset", "method", "mechanism", "rate", "seed"};
  for (const auto& n : metric_names()) h.push_back(n);
  if (!config.label.empty()) {
    for (auto k : config.classifiers) h.push_back("acc_" + to_string(k));
  }
  return h;
}

void write_reports_csv(std::ostream& out, const std::vector<EvaluationReport>& reports, const EvalConfig& config) {
  const auto header = csv_header(config);
  data::write_csv_record(out, header);
  for (const auto& r : reports) {
    const auto spec = nlohmann::json::parse(r.missingness);
    std::vector<std::string> row{r.dataset, r.method, spec.value("mechanism", std::string()),
                                 spec.contains("rate") ? data::format_number(spec["rate"].get<double>()) : "",
                                 std::to_string(r.seed)};
    for (std::size_t k = 5; k < header.size(); ++k) {
      const MetricValue* m = nullptr;
      for (const auto& x : r.metrics) {
        if (x.name == header[k]) m = &x;
      }
      for (const auto& x : r.accuracies) {
        if (x.name == header[k]) m = &x;
      }
      row.push_back(m ? cell(*m) : "null");
    }
    data::write_csv_record(out, row);
  }
}

Split stratified_split(const data::Table& table, std::size_t label, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
  if (label >= table.cols() || !table.schema().columns[label].discrete()) {
    throw DataError("split: label column must be categorical");
  }
  std::vector<std::vector<std::size_t>> by_class(table.schema().columns[label].categories.size());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    if (table.missing(r, label)) throw DataError("split: label missing on row " + std::to_string(r + 1));
    by_class[static_cast<std::size_t>(table.category(r, label))].push_back(r);
  }
  Split s;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    auto& rows = by_class[k];
    Rng rng(derive_seed(seed, k));
    for (std::size_t i = rows.size(); i > 1; --i) {
      std::swap(rows[i - 1], rows[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
    }
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
    s.train.insert(s.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.insert(s.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace impugan::eval
