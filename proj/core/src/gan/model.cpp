#include "impugan/gan/model.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "impugan/error.hpp"
#include "impugan/gan/losses.hpp"
#include "impugan/rng.hpp"

namespace impugan::gan {
namespace {

constexpr std::uint64_t kInitStream = 100;
constexpr std::uint64_t kTrainStream = 101;
constexpr std::uint64_t kTransformerStream = 102;
constexpr std::uint64_t kEncodeStream = 103;
constexpr Eigen::Index kSampleChunk = 1000;

ad::Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  ad::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

ad::Matrix gather_rows(const ad::Matrix& src, const std::vector<std::size_t>& rows) {
  ad::Matrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = src.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

struct DivergenceGuard {
  const TrainConfig& config;
  const std::vector<EpochLog>& history;

  void check(const char* what, double value, int epoch, int step) const {
    if (std::isfinite(value) && std::abs(value) <= config.divergence_threshold) return;
    nlohmann::json snap = {{"reason", std::string(what) + " diverged"},
                           {"value", std::isfinite(value) ? nlohmann::json(value) : nlohmann::json(std::to_string(value))},
                           {"epoch", epoch},
                           {"step", step},
                           {"config", to_json(config)},
                           {"history", nlohmann::json::array()}};
    const std::size_t from = history.size() > 5 ? history.size() - 5 : 0;
    for (std::size_t i = from; i < history.size(); ++i) snap["history"].push_back(to_json(history[i]));
    throw DivergenceError(std::string(what) + " diverged at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step) + " (value " + std::to_string(value) + ")",
                          snap.dump(2));
  }
};

}  // namespace

nlohmann::json to_json(const EpochLog& e) {
  return {{"epoch", e.epoch},
          {"loss_d", e.loss_d},
          {"loss_g", e.loss_g},
          {"loss_cond", e.loss_cond},
          {"wasserstein", e.wasserstein},
          {"grad_norm", e.grad_norm},
          {"skipped_updates", e.skipped_updates}};
}

std::vector<EpochLog> train(const ad::Matrix& encoded, const cond::TrainingSampler& sampler,
                            const data::EncodedLayout& layout, const TrainConfig& config,
                            ad::ParamSet& generator_params, ad::ParamSet& critic_params,
                            const EpochCallback& on_epoch) {
  config.validate();
  if (encoded.rows() == 0) throw DataError("train: encoded table is empty");
  if (encoded.cols() != layout.width) throw ShapeError("train: encoded width does not match the layout");
  const auto rows = static_cast<std::size_t>(encoded.rows());
  const int batch = config.effective_batch(rows);
  const int steps = config.effective_steps(rows);
  const GeneratorNet gnet = attach_generator(layout, config, generator_params);
  const CriticNet dnet = attach_critic(layout, config, critic_params);
  ad::Adam adam_g(generator_params, {config.lr_generator, config.beta1, config.beta2, 1e-8});
  ad::Adam adam_d(critic_params, {config.lr_critic, config.beta1, config.beta2, 1e-8});
  Rng rng(derive_seed(config.seed, kTrainStream));

  std::vector<EpochLog> history;
  const DivergenceGuard guard{config, history};

  auto draw_conditions = [&] {
    cond::ConditionBatch b = sampler.sample(static_cast<std::size_t>(batch), rng);
    if (config.multi_column_conditions) sampler.extend(b, rng);
    return b;
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch + 1;
    const auto skipped_before = adam_g.skipped() + adam_d.skipped();
    int critic_updates = 0;
    for (int step = 0; step < steps; ++step) {
      try {
        for (int k = 0; k < config.critic_steps; ++k) {
          const cond::ConditionBatch cb = draw_conditions();
          const ad::Matrix real = gather_rows(encoded, cb.rows);
          ad::Matrix fake;
          {
            ad::Graph g;
            const auto gb = generator_params.bind(g, false);
            const ad::Var z = g.constant(normal_matrix(batch, config.noise_dim, rng));
            const ad::Var act = gnet.activate(g, gnet.raw(g, gb, z, g.constant(cb.conditions)));
            fake = hard_override(g, act, layout, config.p_hard, rng).value();
          }
          ad::Graph g;
          const auto db = critic_params.bind(g, true);
          const CriticLoss loss = critic_loss(g, dnet, db, real, fake, cb.conditions, config.gp_weight, rng);
          guard.check("critic loss", loss.value.item(), epoch + 1, step);
          adam_d.update(critic_params, ad::gradient_values(g, loss.value, db));
          log.loss_d += loss.value.item();
          log.wasserstein += loss.wasserstein;
          log.grad_norm += loss.mean_grad_norm;
          ++critic_updates;
        }

        const cond::ConditionBatch cb = draw_conditions();
        ad::Graph g;
        const auto gb = generator_params.bind(g, true);
        const auto db = critic_params.bind(g, false);
        const ad::Var z = g.constant(normal_matrix(batch, config.noise_dim, rng));
        const ad::Var raw = gnet.raw(g, gb, z, g.constant(cb.conditions));
        const ad::Var fake = hard_override(g, gnet.activate(g, raw), layout, config.p_hard, rng);
        const GeneratorLoss loss = generator_loss(g, dnet, db, fake, raw, cb.conditions, layout, config.cond_weight);
        guard.check("generator loss", loss.value.item(), epoch + 1, step);
        adam_g.update(generator_params, ad::gradient_values(g, loss.value, gb));
        log.loss_g += loss.value.item();
        log.loss_cond += loss.conditional;
      } catch (const NumericError& e) {
        guard.check(e.what(), std::nan(""), epoch + 1, step);
      }
    }
    log.loss_d /= critic_updates;
    log.wasserstein /= critic_updates;
    log.grad_norm /= critic_updates;
    log.loss_g /= steps;
    log.loss_cond /= steps;
    log.skipped_updates = static_cast<int>(adam_g.skipped() + adam_d.skipped() - skipped_before);
    history.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return history;
}

FitResult fit(const data::Table& table, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  std::vector<std::size_t> complete;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    if (table.complete_row(r)) complete.push_back(r);
  }
  if (complete.empty()) throw DataError("no complete rows to train on");
  if (complete.size() < table.rows()) {
    spdlog::info("training on {} complete rows of {}", complete.size(), table.rows());
  }
  const data::Table train_table = table.select_rows(complete);

  FitResult out;
  out.training_rows = complete.size();
  ImpuganModel& model = out.model;
  model.config = config;
  model.transformer =
      data::Transformer::fit(train_table, {.modes = config.modes, .seed = derive_seed(config.seed, kTransformerStream)});
  Rng encode_rng(derive_seed(config.seed, kEncodeStream));
  const ad::Matrix encoded = model.transformer.transform(train_table, encode_rng);
  const cond::TrainingSampler sampler(train_table, model.transformer.layout());

  Rng init(derive_seed(config.seed, kInitStream));
  make_generator(model.transformer.layout(), config, model.generator_params, init);
  make_critic(model.transformer.layout(), config, model.critic_params, init);
  out.log = train(encoded, sampler, model.transformer.layout(), config, model.generator_params, model.critic_params,
                  on_epoch);
  return out;
}

ad::Matrix generate(const ImpuganModel& model, const ad::Matrix& z, const ad::Matrix& conditions) {
  const data::EncodedLayout& layout = model.transformer.layout();
  if (z.cols() != model.config.noise_dim || conditions.cols() != layout.condition_width || z.rows() != conditions.rows()) {
    throw ShapeError("generate: noise/condition shapes do not match the model");
  }
  const GeneratorNet gnet = model.generator();
  ad::Matrix out(z.rows(), layout.width);
  for (Eigen::Index start = 0; start < z.rows(); start += kSampleChunk) {
    const Eigen::Index len = std::min(kSampleChunk, z.rows() - start);
    ad::Graph g;
    const auto gb = model.generator_params.bind(g, false);
    const ad::Var act = gnet.activate(
        g, gnet.raw(g, gb, g.constant(z.middleRows(start, len)), g.constant(conditions.middleRows(start, len))));
    out.middleRows(start, len) = act.value();
  }
  return out;
}

ad::Matrix unconditional_conditions(const ImpuganModel& model, std::size_t n, Rng& rng) {
  const data::EncodedLayout& layout = model.transformer.layout();
  ad::Matrix out = ad::Matrix::Zero(static_cast<Eigen::Index>(n), layout.condition_width);
  const std::size_t kd = layout.discrete_columns.size();
  if (kd == 0) return out;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t col = layout.discrete_columns[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(kd)) % kd];
    const auto& freq = model.transformer.frequencies(col);
    std::size_t total = 0;
    for (auto f : freq) total += f;
    double u = uniform01(rng) * static_cast<double>(total);
    std::size_t q = 0;
    for (; q + 1 < freq.size(); ++q) {
      if (u < static_cast<double>(freq[q])) break;
      u -= static_cast<double>(freq[q]);
    }
    while (freq[q] == 0 && q > 0) --q;
    out(static_cast<Eigen::Index>(r), layout.columns[col].condition_offset + static_cast<int>(q)) = 1.0;
  }
  return out;
}

data::Table sample(const ImpuganModel& model, std::size_t n, const cond::ConditionVector* condition,
                   std::uint64_t seed) {
  const data::EncodedLayout& layout = model.transformer.layout();
  const auto rows = static_cast<Eigen::Index>(n);
  Rng rng(seed);
  const ad::Matrix z = normal_matrix(rows, model.config.noise_dim, rng);
  const bool conditioned = condition && !condition->empty();
  ad::Matrix conditions;
  if (conditioned) {
    if (static_cast<int>(condition->bits.size()) != layout.condition_width) {
      throw ShapeError("sample: condition width does not match the model");
    }
    conditions.resize(rows, layout.condition_width);
    for (Eigen::Index r = 0; r < rows; ++r) {
      conditions.row(r) = Eigen::Map<const Eigen::RowVectorXd>(condition->bits.data(), layout.condition_width);
    }
  } else {
    conditions = unconditional_conditions(model, n, rng);
  }
  ad::Matrix act = generate(model, z, conditions);
  if (conditioned) cond::hard_apply(act, conditions, layout);
  return model.transformer.inverse_transform(act);
}

void ImpuganModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  ad::ParamSet all;
  for (std::size_t i = 0; i < generator_params.size(); ++i) all.add(generator_params.name(i), generator_params.value(i));
  for (std::size_t i = 0; i < critic_params.size(); ++i) all.add(critic_params.name(i), critic_params.value(i));
  ad::save_params((dir / "model.params").string(), all);
  write_text(dir / "transformer.json", transformer.to_json().dump(2) + "\n");
  const nlohmann::json cfg = {{"format", "impugan-model"}, {"version", 1}, {"train", to_json(config)}};
  write_text(dir / "config.json", cfg.dump(2) + "\n");
}

ImpuganModel ImpuganModel::load(const std::filesystem::path& dir) {
  ImpuganModel m;
  const nlohmann::json cfg = read_json(dir / "config.json");
  if (cfg.value("format", std::string()) != "impugan-model") throw DataError("'" + (dir / "config.json").string() + "' is not a model config");
  m.config = train_config_from_json(cfg.at("train"));
  m.transformer = data::Transformer::from_json(read_json(dir / "transformer.json"));
  const std::filesystem::path params = dir / "model.params";
  if (!std::filesystem::exists(params)) throw DataError("missing '" + params.string() + "'");
  const ad::ParamSet all = ad::load_params(params.string());
  for (std::size_t i = 0; i < all.size(); ++i) {
    const std::string& name = all.name(i);
    if (name.starts_with("generator.")) {
      m.generator_params.add(name, all.value(i));
    } else if (name.starts_with("critic.")) {
      m.critic_params.add(name, all.value(i));
    } else {
      throw DataError("unexpected tensor '" + name + "' in model parameters");
    }
  }
  // Fails loudly if the shapes do not match the config and layout.
  (void)m.generator();
  (void)m.critic();
  return m;
}

}  // namespace impugan::gan
