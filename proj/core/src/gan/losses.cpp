#include "impugan/gan/losses.hpp"

#include <cmath>

#include "impugan/error.hpp"

namespace impugan::gan {

PenaltyTerm gradient_penalty(ad::Graph& g, const CriticNet& critic, const std::vector<ad::Var>& bound,
                             const ad::Matrix& real, const ad::Matrix& fake, const ad::Matrix& conditions, Rng& rng) {
  if (real.rows() != fake.rows() || real.cols() != fake.cols() || conditions.rows() != real.rows()) {
    throw ShapeError("gradient_penalty: real, fake and condition batches do not align");
  }
  const Eigen::Index rows = real.rows();
  const Eigen::Index groups = rows / critic.pac;
  ad::Matrix mixed(rows, real.cols());
  for (Eigen::Index k = 0; k < groups; ++k) {
    const double eps = uniform01(rng);
    for (Eigen::Index i = k * critic.pac; i < (k + 1) * critic.pac; ++i) {
      mixed.row(i) = eps * real.row(i) + (1.0 - eps) * fake.row(i);
    }
  }
  const ad::Var x = g.variable(std::move(mixed), "interpolates");
  const ad::Var score = g.sum(critic.score(g, bound, x, g.constant(conditions)));
  const ad::Var dx = g.gradient(score, std::vector<ad::Var>{x}, true)[0];
  const ad::Var norms = g.row_norm(g.reshape(dx, groups, critic.pac * real.cols()));
  return {g.mean(g.square(g.add_scalar(norms, -1.0))), norms.value().mean()};
}

CriticLoss critic_loss(ad::Graph& g, const CriticNet& critic, const std::vector<ad::Var>& bound,
                       const ad::Matrix& real, const ad::Matrix& fake, const ad::Matrix& conditions,
                       double gp_weight, Rng& rng) {
  const ad::Var c = g.constant(conditions);
  const ad::Var real_score = g.mean(critic.score(g, bound, g.constant(real), c));
  const ad::Var fake_score = g.mean(critic.score(g, bound, g.constant(fake), c));
  const ad::Var w = g.sub(fake_score, real_score);
  CriticLoss out;
  out.wasserstein = w.item();
  if (gp_weight > 0) {
    const PenaltyTerm gp = gradient_penalty(g, critic, bound, real, fake, conditions, rng);
    out.value = g.add(w, g.scale(gp.value, gp_weight));
    out.penalty = gp.value.item();
    out.mean_grad_norm = gp.mean_grad_norm;
  } else {
    out.value = w;
  }
  return out;
}

ad::Var conditional_loss(ad::Graph& g, ad::Var raw, const ad::Matrix& conditions, const data::EncodedLayout& layout) {
  if (conditions.cols() != layout.condition_width || conditions.rows() != raw.rows()) {
    throw ShapeError("conditional_loss: condition matrix does not match the batch");
  }
  if (layout.condition_width == 0) return g.scalar(0.0);
  ad::ActivationLayout spans = layout.activation();
  spans.tanh_columns.clear();
  const auto activation = std::make_shared<const ad::ActivationLayout>(std::move(spans));
  const auto columns = std::make_shared<const std::vector<int>>(layout.condition_to_encoded());
  const ad::Var logp = g.select_cols(g.log_softmax_spans(raw, activation), columns);
  const ad::Var picked = g.sum(g.mul(logp, g.constant(conditions)));
  return g.scale(picked, -1.0 / static_cast<double>(raw.rows()));
}

double conditional_loss(const ad::Matrix& activated, const ad::Matrix& conditions, const data::EncodedLayout& layout) {
  if (conditions.cols() != layout.condition_width || conditions.rows() != activated.rows() ||
      activated.cols() != layout.width) {
    throw ShapeError("conditional_loss: condition matrix does not match the batch");
  }
  if (activated.rows() == 0) return 0.0;
  const std::vector<int> map = layout.condition_to_encoded();
  double total = 0;
  for (Eigen::Index r = 0; r < activated.rows(); ++r) {
    for (std::size_t k = 0; k < map.size(); ++k) {
      if (conditions(r, static_cast<Eigen::Index>(k)) > 0) total -= std::log(activated(r, map[k]));
    }
  }
  return total / static_cast<double>(activated.rows());
}

GeneratorLoss generator_loss(ad::Graph& g, const CriticNet& critic, const std::vector<ad::Var>& critic_bound,
                             ad::Var fake, ad::Var raw, const ad::Matrix& conditions,
                             const data::EncodedLayout& layout, double cond_weight) {
  const ad::Var adv = g.scale(g.mean(critic.score(g, critic_bound, fake, g.constant(conditions))), -1.0);
  GeneratorLoss out;
  out.adversarial = adv.item();
  if (cond_weight > 0 && layout.condition_width > 0) {
    const ad::Var lc = conditional_loss(g, raw, conditions, layout);
    out.conditional = lc.item();
    out.value = g.add(adv, g.scale(lc, cond_weight));
  } else {
    out.value = adv;
  }
  return out;
}

ad::Var hard_override(ad::Graph& g, ad::Var activated, const data::EncodedLayout& layout, double p_hard, Rng& rng) {
  if (p_hard <= 0) return activated;
  const ad::Matrix& v = activated.value();
  ad::Matrix delta = ad::Matrix::Zero(v.rows(), v.cols());
  bool any = false;
  for (std::size_t j : layout.discrete_columns) {
    if (uniform01(rng) >= p_hard) continue;
    any = true;
    const ad::Span s = layout.columns[j].span;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      Eigen::Index q = 0;
      v.row(r).segment(s.offset, s.width).maxCoeff(&q);
      delta.row(r).segment(s.offset, s.width) = -v.row(r).segment(s.offset, s.width);
      delta(r, s.offset + q) += 1.0;
    }
  }
  return any ? g.add(activated, g.constant(std::move(delta))) : activated;
}

}  // namespace impugan::gan
