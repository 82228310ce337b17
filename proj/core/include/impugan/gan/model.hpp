#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "impugan/ad/params.hpp"
#include "impugan/cond/condition.hpp"
#include "impugan/data/table.hpp"
#include "impugan/data/transformer.hpp"
#include "impugan/gan/config.hpp"
#include "impugan/gan/networks.hpp"

namespace impugan::gan {

struct EpochLog {
  int epoch = 0;
  double loss_d = 0;
  double loss_g = 0;
  double loss_cond = 0;
  double wasserstein = 0;
  double grad_norm = 0;  // mean ||grad D|| on interpolates
  int skipped_updates = 0;
};

nlohmann::json to_json(const EpochLog& e);

using EpochCallback = std::function<void(const EpochLog&)>;

// Trained generator (and critic) together with the transformer that defines
// their encoding.
struct ImpuganModel {
  data::Transformer transformer;
  TrainConfig config;
  ad::ParamSet generator_params;
  ad::ParamSet critic_params;

  GeneratorNet generator() const { return attach_generator(transformer.layout(), config, generator_params); }
  CriticNet critic() const { return attach_critic(transformer.layout(), config, critic_params); }

  // Writes transformer.json, model.params and config.json into `dir`.
  void save(const std::filesystem::path& dir) const;
  static ImpuganModel load(const std::filesystem::path& dir);
};

// Algorithm loop over an already encoded table. `generator_params` and
// `critic_params` are updated in place.
std::vector<EpochLog> train(const ad::Matrix& encoded, const cond::TrainingSampler& sampler,
                            const data::EncodedLayout& layout, const TrainConfig& config,
                            ad::ParamSet& generator_params, ad::ParamSet& critic_params,
                            const EpochCallback& on_epoch = {});

struct FitResult {
  ImpuganModel model;
  std::vector<EpochLog> log;
  std::size_t training_rows = 0;
};

// Fits the transformer on the complete rows of `table`, encodes them, builds
// the sampler and trains.
FitResult fit(const data::Table& table, const TrainConfig& config, const EpochCallback& on_epoch = {});

// Activated generator output for noise rows `z` and condition rows, before
// any hard override.
ad::Matrix generate(const ImpuganModel& model, const ad::Matrix& z, const ad::Matrix& conditions);

// Condition rows for unconditional generation: one discrete column chosen
// uniformly, its category drawn with the training frequencies.
ad::Matrix unconditional_conditions(const ImpuganModel& model, std::size_t n, Rng& rng);

// n rows decoded to table space. With a non-empty condition every row is
// hard-applied; without one, conditions come from unconditional_conditions.
data::Table sample(const ImpuganModel& model, std::size_t n, const cond::ConditionVector* condition,
                   std::uint64_t seed);

}  // namespace impugan::gan
