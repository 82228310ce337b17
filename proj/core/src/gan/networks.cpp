#include "impugan/gan/networks.hpp"

#include "impugan/error.hpp"

namespace impugan::gan {

ad::Var GeneratorNet::raw(ad::Graph& g, const std::vector<ad::Var>& bound, ad::Var z, ad::Var c) const {
  const ad::Var input = condition_width > 0 ? g.concat_cols(z, c) : z;
  return mlp.forward(g, bound, input);
}

ad::Var CriticNet::score(ad::Graph& g, const std::vector<ad::Var>& bound, ad::Var x, ad::Var c) const {
  const Eigen::Index rows = x.rows();
  if (rows % pac != 0) {
    throw ShapeError("critic: batch of " + std::to_string(rows) + " rows is not a multiple of pac " + std::to_string(pac));
  }
  const ad::Var joined = condition_width > 0 ? g.concat_cols(x, c) : x;
  const ad::Var packed = g.reshape(joined, rows / pac, pac * (data_width + condition_width));
  return mlp.forward(g, bound, packed);
}

ad::MlpShape generator_shape(const data::EncodedLayout& layout, const TrainConfig& config) {
  return {config.noise_dim + layout.condition_width, config.generator_hidden, layout.width, 0.0};
}

ad::MlpShape critic_shape(const data::EncodedLayout& layout, const TrainConfig& config) {
  return {config.pac * (layout.width + layout.condition_width), config.critic_hidden, 1, config.critic_slope};
}

namespace {

GeneratorNet wrap_generator(ad::Mlp mlp, const data::EncodedLayout& layout, const TrainConfig& config) {
  return {std::move(mlp), config.noise_dim, layout.condition_width,
          std::make_shared<const ad::ActivationLayout>(layout.activation())};
}

CriticNet wrap_critic(ad::Mlp mlp, const data::EncodedLayout& layout, const TrainConfig& config) {
  return {std::move(mlp), config.pac, layout.width, layout.condition_width};
}

}  // namespace

GeneratorNet make_generator(const data::EncodedLayout& layout, const TrainConfig& config, ad::ParamSet& params,
                            Rng& rng) {
  return wrap_generator(ad::Mlp("generator", generator_shape(layout, config), params, rng), layout, config);
}

CriticNet make_critic(const data::EncodedLayout& layout, const TrainConfig& config, ad::ParamSet& params, Rng& rng) {
  return wrap_critic(ad::Mlp("critic", critic_shape(layout, config), params, rng), layout, config);
}

GeneratorNet attach_generator(const data::EncodedLayout& layout, const TrainConfig& config,
                              const ad::ParamSet& params) {
  return wrap_generator(ad::Mlp::attach("generator", generator_shape(layout, config), params), layout, config);
}

CriticNet attach_critic(const data::EncodedLayout& layout, const TrainConfig& config, const ad::ParamSet& params) {
  return wrap_critic(ad::Mlp::attach("critic", critic_shape(layout, config), params), layout, config);
}

}  // namespace impugan::gan
