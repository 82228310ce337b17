#pragma once

#include <string>
#include <vector>

#include "run_config.hpp"

namespace impugan::cli {

// Each command throws ConfigError for invalid input (exit 2) and Error for
// runtime failures (exit 1). `conditions` holds raw `column=category` flags.
void cmd_train(const RunConfig& config, const std::vector<std::string>& conditions);
void cmd_mask(const RunConfig& config);
void cmd_impute(const RunConfig& config, const std::vector<std::string>& conditions);
void cmd_evaluate(const RunConfig& config);
void cmd_benchmark(const RunConfig& config);

// Loads the configured dataset: schema file or inference, then optional
// complete-row filter and seeded subsample (row order kept).
data::Table load_dataset(const RunConfig& config);

}  // namespace impugan::cli
