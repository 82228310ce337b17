#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace impugan::gan {

struct TrainConfig {
  int epochs = 300;
  int batch_size = 500;
  int critic_steps = 1;
  // 0 = max(1, rows / batch).
  int steps_per_epoch = 0;
  double lr_generator = 2e-4;
  double lr_critic = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double gp_weight = 10.0;
  double cond_weight = 1.0;
  int pac = 10;
  int noise_dim = 128;
  std::vector<int> generator_hidden{256, 256};
  std::vector<int> critic_hidden{256, 256};
  double critic_slope = 0.2;
  double p_hard = 0.5;
  bool multi_column_conditions = true;
  // Modes per continuous column in the transformer.
  int modes = 10;
  double divergence_threshold = 1e6;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  // Batch actually used on `rows` training rows: min(batch, rows) rounded
  // down to a multiple of pac, at least pac.
  int effective_batch(std::size_t rows) const;
  int effective_steps(std::size_t rows) const;
};

nlohmann::json to_json(const TrainConfig& c);
// Missing fields keep their defaults; unknown fields are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace impugan::gan
