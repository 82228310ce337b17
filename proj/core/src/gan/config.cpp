#include "impugan/gan/config.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "impugan/error.hpp"

namespace impugan::gan {

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("train config: ") + what);
  };
  need(epochs >= 1, "epochs must be >= 1");
  need(pac >= 1, "pac must be >= 1");
  need(batch_size >= pac && batch_size % pac == 0, "batch_size must be a positive multiple of pac");
  need(critic_steps >= 1, "critic_steps must be >= 1");
  need(steps_per_epoch >= 0, "steps_per_epoch must be >= 0");
  need(lr_generator > 0 && lr_critic > 0, "learning rates must be > 0");
  need(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "Adam betas must lie in [0, 1)");
  need(gp_weight >= 0, "gp_weight must be >= 0");
  need(cond_weight >= 0, "cond_weight must be >= 0");
  need(noise_dim >= 1, "noise_dim must be >= 1");
  need(std::all_of(generator_hidden.begin(), generator_hidden.end(), [](int h) { return h > 0; }) &&
           std::all_of(critic_hidden.begin(), critic_hidden.end(), [](int h) { return h > 0; }),
       "hidden sizes must be > 0");
  need(critic_slope >= 0 && critic_slope < 1, "critic_slope must lie in [0, 1)");
  need(p_hard >= 0 && p_hard <= 1, "p_hard must lie in [0, 1]");
  need(modes >= 1, "modes must be >= 1");
  need(divergence_threshold > 0, "divergence_threshold must be > 0");
}

int TrainConfig::effective_batch(std::size_t rows) const {
  const auto cap = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(batch_size), rows));
  return std::max(pac, cap / pac * pac);
}

int TrainConfig::effective_steps(std::size_t rows) const {
  if (steps_per_epoch > 0) return steps_per_epoch;
  return std::max(1, static_cast<int>(rows / static_cast<std::size_t>(effective_batch(rows))));
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"critic_steps", c.critic_steps},
          {"steps_per_epoch", c.steps_per_epoch},
          {"lr_generator", c.lr_generator},
          {"lr_critic", c.lr_critic},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"gp_weight", c.gp_weight},
          {"cond_weight", c.cond_weight},
          {"pac", c.pac},
          {"noise_dim", c.noise_dim},
          {"generator_hidden", c.generator_hidden},
          {"critic_hidden", c.critic_hidden},
          {"critic_slope", c.critic_slope},
          {"p_hard", c.p_hard},
          {"multi_column_conditions", c.multi_column_conditions},
          {"modes", c.modes},
          {"divergence_threshold", c.divergence_threshold},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  const nlohmann::json defaults = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("train config: unknown field '" + key + "'");
  }
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.critic_steps = j.value("critic_steps", c.critic_steps);
    c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
    c.lr_generator = j.value("lr_generator", c.lr_generator);
    c.lr_critic = j.value("lr_critic", c.lr_critic);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.gp_weight = j.value("gp_weight", c.gp_weight);
    c.cond_weight = j.value("cond_weight", c.cond_weight);
    c.pac = j.value("pac", c.pac);
    c.noise_dim = j.value("noise_dim", c.noise_dim);
    c.generator_hidden = j.value("generator_hidden", c.generator_hidden);
    c.critic_hidden = j.value("critic_hidden", c.critic_hidden);
    c.critic_slope = j.value("critic_slope", c.critic_slope);
    c.p_hard = j.value("p_hard", c.p_hard);
    c.multi_column_conditions = j.value("multi_column_conditions", c.multi_column_conditions);
    c.modes = j.value("modes", c.modes);
    c.divergence_threshold = j.value("divergence_threshold", c.divergence_threshold);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace impugan::gan
