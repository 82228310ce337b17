#pragma once

#include <memory>
#include <vector>

#include "impugan/ad/graph.hpp"
#include "impugan/ad/mlp.hpp"
#include "impugan/ad/params.hpp"
#include "impugan/data/transformer.hpp"
#include "impugan/gan/config.hpp"

namespace impugan::gan {

// Maps [z ; c] to raw logits of the encoded width.
struct GeneratorNet {
  ad::Mlp mlp;
  int noise_dim = 0;
  int condition_width = 0;
  std::shared_ptr<const ad::ActivationLayout> activation;

  ad::Var raw(ad::Graph& g, const std::vector<ad::Var>& bound, ad::Var z, ad::Var c) const;
  // tanh on alpha slots, softmax on spans.
  ad::Var activate(ad::Graph& g, ad::Var raw) const { return g.activate(raw, activation); }
};

// Scores groups of `pac` consecutive rows of [x ; c] jointly.
struct CriticNet {
  ad::Mlp mlp;
  int pac = 1;
  int data_width = 0;
  int condition_width = 0;

  // x: B x data_width, c: B x condition_width -> (B / pac) x 1.
  ad::Var score(ad::Graph& g, const std::vector<ad::Var>& bound, ad::Var x, ad::Var c) const;
};

ad::MlpShape generator_shape(const data::EncodedLayout& layout, const TrainConfig& config);
ad::MlpShape critic_shape(const data::EncodedLayout& layout, const TrainConfig& config);

GeneratorNet make_generator(const data::EncodedLayout& layout, const TrainConfig& config, ad::ParamSet& params,
                            Rng& rng);
CriticNet make_critic(const data::EncodedLayout& layout, const TrainConfig& config, ad::ParamSet& params, Rng& rng);
GeneratorNet attach_generator(const data::EncodedLayout& layout, const TrainConfig& config,
                              const ad::ParamSet& params);
CriticNet attach_critic(const data::EncodedLayout& layout, const TrainConfig& config, const ad::ParamSet& params);

}  // namespace impugan::gan
