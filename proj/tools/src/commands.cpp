#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

#include "impugan/cond/condition.hpp"
#include "impugan/data/csv.hpp"
#include "impugan/error.hpp"
#include "impugan/gan/model.hpp"
#include "impugan/impute/imputer.hpp"
#include "impugan/rng.hpp"

namespace impugan::cli {
namespace fs = std::filesystem;
namespace {

// Master-seed streams.
constexpr std::uint64_t kSubsampleStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kTrainStream = 3;
constexpr std::uint64_t kImputeStream = 4;
constexpr std::uint64_t kEvalStream = 5;
constexpr std::uint64_t kSampleStream = 6;

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " path is not set");
  if (!fs::is_regular_file(p)) throw ConfigError(what + " '" + p.string() + "' does not exist");
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("write failed for '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_manifest(const fs::path& dir, const nlohmann::json& prov, const std::vector<std::string>& artifacts) {
  write_json(dir / "manifest.json", {{"provenance", prov}, {"artifacts", artifacts}});
}

data::TableSchema read_schema(const fs::path& path) { return data::schema_from_json(read_json(path)); }

data::Table ingest_with(const fs::path& path, const RunConfig& c, const std::optional<data::TableSchema>& schema) {
  data::IngestOptions o;
  o.schema = schema;
  o.missing_tokens = c.dataset.missing_tokens;
  o.kinds = c.dataset.kinds;
  if (schema) o.schema->missing_tokens = c.dataset.missing_tokens;
  return data::ingest_csv(path, o);
}

std::optional<data::TableSchema> configured_schema(const RunConfig& c) {
  if (c.dataset.schema.empty()) return std::nullopt;
  require_file(c.dataset.schema, "schema");
  return read_schema(c.dataset.schema);
}

gan::TrainConfig train_config(const RunConfig& c) {
  gan::TrainConfig t = c.train;
  t.seed = derive_seed(c.seed, kTrainStream);
  return t;
}

void emit_samples(const gan::ImpuganModel& model, const RunConfig& c, const std::vector<std::string>& flags,
                  const fs::path& path) {
  std::optional<cond::ConditionVector> cv;
  if (!flags.empty()) {
    cv = cond::build_condition(cond::parse_condition_flags(flags), model.transformer.schema(),
                               model.transformer.layout());
  }
  const data::Table t = gan::sample(model, c.samples, cv ? &*cv : nullptr, derive_seed(c.seed, kSampleStream));
  data::write_table_csv(path, t);
  spdlog::info("wrote {} synthetic rows to {}", t.rows(), path.string());
}

// Trains and saves to `dir`, appending epoch lines to train_log.jsonl. On
// divergence the snapshot goes to divergence.json and the error is rethrown.
gan::ImpuganModel train_and_save(const data::Table& table, const RunConfig& c, const fs::path& dir,
                                 const nlohmann::json& prov) {
  fs::create_directories(dir);
  const fs::path log_path = dir / "train_log.jsonl";
  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  const gan::TrainConfig tc = train_config(c);
  try {
    auto result = gan::fit(table, tc, [&](const gan::EpochLog& e) {
      log << gan::to_json(e).dump() << '\n';
      log.flush();
      spdlog::info("epoch {}/{} loss_d {:.4f} loss_g {:.4f} cond {:.4f} |grad| {:.3f}", e.epoch, tc.epochs, e.loss_d,
                   e.loss_g, e.loss_cond, e.grad_norm);
    });
    result.model.save(dir);
    write_manifest(dir, prov, {"model.params", "transformer.json", "config.json", "train_log.jsonl"});
    return std::move(result.model);
  } catch (const DivergenceError& e) {
    const fs::path snap = dir / "divergence.json";
    write_text(snap, e.snapshot() + "\n");
    spdlog::error("training diverged; diagnostic snapshot: {}", snap.string());
    throw;
  }
}

impute::ImputationResult run_method(const std::string& method, const data::Table& incomplete,
                                    const gan::ImpuganModel* model, const RunConfig& c, std::uint64_t seed) {
  if (method == "gm") return impute::impute_gm(incomplete);
  if (method == "fv") return impute::impute_fv(incomplete, c.fv_constant);
  if (!model) throw ConfigError("method impugan needs a checkpoint");
  return impute::impute_impugan(*model, incomplete, seed);
}

std::vector<std::size_t> complete_rows(const data::Table& t) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    if (t.complete_row(r)) rows.push_back(r);
  }
  return rows;
}

}  // namespace

data::Table load_dataset(const RunConfig& c) {
  require_file(c.dataset.path, "dataset");
  data::Table t = ingest_with(c.dataset.path, c, configured_schema(c));
  if (c.dataset.drop_incomplete) {
    const auto keep = complete_rows(t);
    if (keep.size() != t.rows()) spdlog::info("dropped {} incomplete rows", t.rows() - keep.size());
    t = t.select_rows(keep);
  }
  if (c.dataset.subsample > 0 && c.dataset.subsample < t.rows()) {
    std::vector<std::size_t> idx(t.rows());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(c.seed, kSubsampleStream));
    for (std::size_t i = 0; i < c.dataset.subsample; ++i) {
      std::swap(idx[i], idx[std::uniform_int_distribution<std::size_t>(i, idx.size() - 1)(rng)]);
    }
    idx.resize(c.dataset.subsample);
    std::sort(idx.begin(), idx.end());
    t = t.select_rows(idx);
  }
  if (t.rows() == 0) throw DataError("dataset '" + c.dataset.path.string() + "' has no usable rows");
  return t;
}

void cmd_train(const RunConfig& c, const std::vector<std::string>& conditions) {
  require_file(c.dataset.path, "dataset");
  c.train.validate();
  const data::Table table = load_dataset(c);
  fs::create_directories(c.output);
  const auto prov = provenance(c, "train");
  const fs::path dir = c.output / "model";
  const auto model = train_and_save(table, c, dir, prov);
  write_json(c.output / "run.json", {{"provenance", prov}, {"config", to_json(c)}});
  if (c.samples > 0) emit_samples(model, c, conditions, c.output / "samples.csv");
  spdlog::info("checkpoint written to {}", dir.string());
}

void cmd_mask(const RunConfig& c) {
  require_file(c.dataset.path, "dataset");
  if (c.missingness.size() != 1) throw ConfigError("mask needs exactly one missingness spec");
  const data::Table table = load_dataset(c);
  missing::MissingnessSpec spec = c.missingness[0];
  spec.seed = spec_seed(c, 0);
  spec.validate(table.schema());
  const data::MaskMatrix mask = missing::generate_mask(table, spec);
  const auto inc = missing::apply_mask(table, mask);
  fs::create_directories(c.output);
  data::write_table_csv(c.output / "masked.csv", inc.incomplete);
  missing::write_mask_csv(c.output / "mask.csv", mask, table.schema());
  data::write_table_csv(c.output / "truth.csv", inc.truth);
  write_json(c.output / "schema.json", data::schema_to_json(table.schema()));
  write_json(c.output / "mask_spec.json", missing::to_json(spec));
  write_manifest(c.output, provenance(c, "mask"), {"masked.csv", "mask.csv", "truth.csv", "schema.json", "mask_spec.json"});
  const std::size_t cells = table.rows() * table.cols();
  spdlog::info("masked {} of {} cells ({:.4f})", mask.missing_count(), cells,
               static_cast<double>(mask.missing_count()) / static_cast<double>(cells));
}

void cmd_impute(const RunConfig& c, const std::vector<std::string>& conditions) {
  const bool wants_model =
      c.samples > 0 || std::find(c.methods.begin(), c.methods.end(), "impugan") != c.methods.end();
  const fs::path ckpt = c.checkpoint.empty() ? c.output / "model" : c.checkpoint;
  if (wants_model && !fs::is_directory(ckpt)) throw ConfigError("checkpoint '" + ckpt.string() + "' does not exist");
  const bool imputing = !c.input.empty();
  if (imputing) require_file(c.input, "input");
  if (!imputing && c.samples == 0) throw ConfigError("impute needs an input table or a sample count");

  std::optional<gan::ImpuganModel> model;
  if (wants_model) model = gan::ImpuganModel::load(ckpt);
  fs::create_directories(c.output);
  const auto prov = provenance(c, "impute");
  std::vector<std::string> artifacts;
  if (imputing) {
    std::optional<data::TableSchema> schema = configured_schema(c);
    if (!schema && model) schema = model->transformer.schema();
    const data::Table incomplete = ingest_with(c.input, c, schema);
    for (const auto& method : c.methods) {
      const auto result = run_method(method, incomplete, model ? &*model : nullptr, c, derive_seed(c.seed, kImputeStream));
      const fs::path dir = c.output / method;
      fs::create_directories(dir);
      data::write_table_csv(dir / "completed.csv", result.completed);
      impute::write_provenance_csv(dir / "provenance.csv", result);
      artifacts.push_back(method + "/completed.csv");
      artifacts.push_back(method + "/provenance.csv");
      spdlog::info("{}: imputed {} cells", method, incomplete.mask().missing_count());
    }
  }
  if (c.samples > 0) {
    emit_samples(*model, c, conditions, c.output / "samples.csv");
    artifacts.push_back("samples.csv");
  }
  write_manifest(c.output, prov, artifacts);
}

void cmd_evaluate(const RunConfig& c) {
  require_file(c.truth, "truth");
  require_file(c.imputed, "imputed");
  require_file(c.mask, "mask");
  if (!c.test.empty()) require_file(c.test, "test");
  c.evaluation.validate();
  std::optional<data::TableSchema> schema = configured_schema(c);
  const data::Table truth = ingest_with(c.truth, c, schema);
  if (!schema) schema = truth.schema();
  const data::Table imputed = ingest_with(c.imputed, c, schema);
  const data::MaskMatrix mask = missing::read_mask_csv(c.mask, *schema);
  std::optional<data::Table> test;
  if (!c.test.empty()) test = ingest_with(c.test, c, schema);
  eval::EvalConfig ec = c.evaluation;
  if (ec.label.empty()) ec.label = c.dataset.label;
  if (!test) ec.label.clear();
  ec.seed = derive_seed(c.seed, kEvalStream);
  auto report = eval::evaluate_all(truth, imputed, mask, ec, test ? &*test : nullptr);
  report.dataset = c.dataset_name();
  report.method = c.methods.size() == 1 ? c.methods[0] : "imputed";
  report.seed = c.seed;
  if (c.missingness.size() == 1) {
    missing::MissingnessSpec spec = c.missingness[0];
    spec.seed = spec_seed(c, 0);
    report.missingness = missing::to_json(spec).dump();
  }
  const auto prov = provenance(c, "evaluate");
  report.provenance = prov.dump();
  fs::create_directories(c.output);
  write_json(c.output / "report.json", eval::report_to_json(report));
  std::ostringstream csv;
  eval::write_reports_csv(csv, {report}, ec);
  write_text(c.output / "report.csv", csv.str());
  write_manifest(c.output, prov, {"report.json", "report.csv"});
  for (const auto& m : report.metrics) {
    spdlog::info("{:>12} {}", m.name, m.defined ? data::format_number(m.value) : "null");
  }
  for (const auto& m : report.accuracies) spdlog::info("{:>12} {}", m.name, data::format_number(m.value));
}

void cmd_benchmark(const RunConfig& cfg) {
  require_file(cfg.dataset.path, "dataset");
  cfg.train.validate();
  cfg.evaluation.validate();
  RunConfig c = cfg;
  if (c.missingness.empty()) {
    c.missingness = default_sweep();
    c.missingness_seeded.assign(c.missingness.size(), false);
  }
  eval::EvalConfig ec = c.evaluation;
  if (ec.label.empty()) ec.label = c.dataset.label;
  if (ec.label.empty()) throw ConfigError("benchmark needs a label column (dataset.label)");
  ec.seed = derive_seed(c.seed, kEvalStream);

  const data::Table full = load_dataset(c);
  const std::size_t label = full.schema().index(ec.label);
  for (auto& s : c.missingness) {
    if (s.exempt.empty()) s.exempt = {ec.label};
    s.validate(full.schema());
  }
  const auto split = eval::stratified_split(full, label, c.train_fraction, derive_seed(c.seed, kSplitStream));
  const data::Table train = full.select_rows(split.train);
  const data::Table test = full.select_rows(split.test);
  spdlog::info("benchmark {}: {} train rows, {} test rows, {} specs x {} methods", c.dataset_name(), train.rows(),
               test.rows(), c.missingness.size(), c.methods.size());

  fs::create_directories(c.output);
  const auto prov = provenance(c, "benchmark");
  write_json(c.output / "run.json", {{"provenance", prov}, {"config", to_json(c)}});
  write_json(c.output / "schema.json", data::schema_to_json(full.schema()));

  std::optional<gan::ImpuganModel> model;
  if (std::find(c.methods.begin(), c.methods.end(), "impugan") != c.methods.end()) {
    const fs::path dir = c.output / "model";
    // The model depends on the data, split and training settings only.
    const std::string key = hex64(fnv1a(nlohmann::json{{"dataset", to_json(c)["dataset"]},
                                                       {"train", gan::to_json(train_config(c))},
                                                       {"split", c.train_fraction},
                                                       {"seed", c.seed}}
                                            .dump()));
    const fs::path key_file = dir / "model_key.txt";
    bool reuse = false;
    if (!c.force && fs::is_regular_file(key_file)) {
      std::ifstream in(key_file);
      std::string existing;
      std::getline(in, existing);
      reuse = existing == key;
    }
    if (reuse) {
      spdlog::info("reusing checkpoint {}", dir.string());
      model = gan::ImpuganModel::load(dir);
    } else {
      try {
        model = train_and_save(train, c, dir, prov);
      } catch (const DivergenceError&) {
        throw;
      } catch (const Error& e) {
        throw Error(std::string("benchmark stage 'train' failed: ") + e.what());
      }
      write_text(key_file, key + "\n");
    }
  }

  struct Cell {
    std::size_t spec;
    std::string method;
    fs::path dir;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < c.missingness.size(); ++s) {
    for (const auto& m : c.methods) {
      cells.push_back({s, m, c.output / "cells" / spec_label(c.missingness[s]) / m});
    }
  }
  std::vector<eval::EvaluationReport> reports(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::string failure;
  auto run_cell = [&](std::size_t i) {
    const Cell& cell = cells[i];
    const fs::path report_path = cell.dir / "report.json";
    if (!c.force && fs::is_regular_file(report_path)) {
      reports[i] = eval::report_from_json(read_json(report_path));
      spdlog::info("skipping {}/{} (report exists)", spec_label(c.missingness[cell.spec]), cell.method);
      return;
    }
    std::string stage = "mask";
    try {
      missing::MissingnessSpec spec = c.missingness[cell.spec];
      spec.seed = spec_seed(c, cell.spec);
      const data::MaskMatrix mask = missing::generate_mask(train, spec);
      const data::Table incomplete = missing::apply_mask(train, mask).incomplete;
      stage = "impute";
      const auto imputed = run_method(cell.method, incomplete, model ? &*model : nullptr, c,
                                      derive_seed(spec.seed, kImputeStream));
      stage = "evaluate";
      auto report = eval::evaluate_all(train, imputed.completed, mask, ec, &test);
      report.dataset = c.dataset_name();
      report.method = cell.method;
      report.missingness = missing::to_json(spec).dump();
      report.seed = c.seed;
      report.provenance = prov.dump();
      stage = "write";
      fs::create_directories(cell.dir);
      write_json(report_path, eval::report_to_json(report));
      spdlog::info("{}/{}: mae {} emd {} jsd {}", spec_label(spec), cell.method,
                   report.metric("mae").defined ? data::format_number(report.metric("mae").value) : "null",
                   data::format_number(report.metric("emd").value), data::format_number(report.metric("jsd").value));
      reports[i] = std::move(report);
    } catch (const std::exception& e) {
      std::lock_guard lock(err_mu);
      if (failure.empty()) {
        failure = "benchmark cell " + spec_label(c.missingness[cell.spec]) + "/" + cell.method + " failed at stage '" +
                  stage + "': " + e.what();
      }
    }
  };
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      {
        std::lock_guard lock(err_mu);
        if (!failure.empty()) return;
      }
      run_cell(i);
    }
  };
  const int n_workers = std::min<int>(c.workers, static_cast<int>(std::max<std::size_t>(cells.size(), 1)));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (!failure.empty()) throw Error(failure);

  write_json(c.output / "report.json", {{"provenance", prov}, {"results", eval::reports_to_json(reports)}});
  std::ostringstream csv;
  eval::write_reports_csv(csv, reports, ec);
  write_text(c.output / "report.csv", csv.str());
  write_manifest(c.output, prov, {"run.json", "schema.json", "report.json", "report.csv"});
  spdlog::info("benchmark reports written to {}", (c.output / "report.csv").string());
}

}  // namespace impugan::cli
