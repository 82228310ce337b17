#pragma once

#include <memory>
#include <vector>

#include "impugan/ad/graph.hpp"
#include "impugan/data/transformer.hpp"
#include "impugan/gan/networks.hpp"
#include "impugan/rng.hpp"

namespace impugan::gan {

struct PenaltyTerm {
  ad::Var value;            // mean over groups of (||grad||_2 - 1)^2
  double mean_grad_norm = 0;
};

// Interpolates real and fake rows with one epsilon ~ U(0,1) per PAC group and
// penalizes the critic's gradient norm per group. Differentiable with respect
// to the critic's parameters.
PenaltyTerm gradient_penalty(ad::Graph& g, const CriticNet& critic, const std::vector<ad::Var>& bound,
                             const ad::Matrix& real, const ad::Matrix& fake, const ad::Matrix& conditions, Rng& rng);

struct CriticLoss {
  ad::Var value;
  double wasserstein = 0;  // -E[D(real)] + E[D(fake)]
  double penalty = 0;
  double mean_grad_norm = 0;
};

CriticLoss critic_loss(ad::Graph& g, const CriticNet& critic, const std::vector<ad::Var>& bound,
                       const ad::Matrix& real, const ad::Matrix& fake, const ad::Matrix& conditions,
                       double gp_weight, Rng& rng);

// Batch mean of the summed cross-entropies between each requested category
// and the generator's span for that column, from raw logits.
ad::Var conditional_loss(ad::Graph& g, ad::Var raw, const ad::Matrix& conditions, const data::EncodedLayout& layout);
// Same quantity from already activated rows.
double conditional_loss(const ad::Matrix& activated, const ad::Matrix& conditions, const data::EncodedLayout& layout);

struct GeneratorLoss {
  ad::Var value;
  double adversarial = 0;  // -E[D(fake)]
  double conditional = 0;
};

// `fake` is the activated generator output, `raw` its logits.
GeneratorLoss generator_loss(ad::Graph& g, const CriticNet& critic, const std::vector<ad::Var>& critic_bound,
                             ad::Var fake, ad::Var raw, const ad::Matrix& conditions,
                             const data::EncodedLayout& layout, double cond_weight);

// Straight-through hard override: for each span chosen with probability
// p_hard, the forward value becomes the one-hot argmax of that span while the
// gradient still flows through the softmax. One draw per span per batch.
ad::Var hard_override(ad::Graph& g, ad::Var activated, const data::EncodedLayout& layout, double p_hard, Rng& rng);

}  // namespace impugan::gan
