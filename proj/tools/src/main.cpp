#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "impugan/error.hpp"
#include "impugan/platform.hpp"
#include "impugan/version.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace impugan;
  tune_allocator();
  spdlog::set_default_logger(spdlog::stderr_color_mt("impugan"));
  spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");

  CLI::App app{"ImpuGAN tabular imputation: train, mask, impute, evaluate, benchmark"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> conds;
  std::optional<std::size_t> samples;
  bool verbose = false;
  bool quiet = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_option("--cond", conds, "condition column=category for sampling (repeatable)")->take_all();
    sub->add_option("--samples", samples, "synthetic rows to emit after train or from a checkpoint");
    sub->add_flag("-v,--verbose", verbose, "debug logging");
    sub->add_flag("-q,--quiet", quiet, "warnings and errors only");
  };
  auto* train = app.add_subcommand("train", "fit a model and write a checkpoint");
  auto* mask = app.add_subcommand("mask", "simulate missingness: masked, mask and ground-truth CSVs");
  auto* impute = app.add_subcommand("impute", "complete a table (or sample rows) with the configured methods");
  auto* evaluate = app.add_subcommand("evaluate", "score an imputed table against ground truth");
  auto* benchmark = app.add_subcommand("benchmark", "split, mask sweep, impute and evaluate every cell");
  for (auto* s : {train, mask, impute, evaluate, benchmark}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    cli::RunConfig config = config_path.empty() ? cli::run_config_from_json(nlohmann::json::object())
                                                : cli::load_run_config(config_path);
    if (seed) config.seed = *seed;
    if (!out.empty()) config.output = out;
    if (samples) config.samples = *samples;
    if (!conds.empty() && !(train->parsed() || impute->parsed())) {
      throw ConfigError("--cond applies to train and impute only");
    }
    if (train->parsed()) cli::cmd_train(config, conds);
    else if (mask->parsed()) cli::cmd_mask(config);
    else if (impute->parsed()) cli::cmd_impute(config, conds);
    else if (evaluate->parsed()) cli::cmd_evaluate(config);
    else cli::cmd_benchmark(config);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return 0;
}
