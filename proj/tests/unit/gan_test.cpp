#include <cmath>
#include <cstring>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "../support/synthetic.hpp"
#include "impugan/error.hpp"
#include "impugan/gan/losses.hpp"
#include "impugan/gan/model.hpp"
#include "oracles.hpp"

namespace impugan::gan {
namespace {

using ad::Matrix;
using data::ColumnKind;

// One continuous column with a single mode (alpha slot 0, mode slot 1) and
// one discrete column of four categories (slots 2..5).
data::Transformer small_transformer() {
  nlohmann::json j = {
      {"format", "impugan-transformer"},
      {"version", 1},
      {"missing_tokens", {""}},
      {"columns",
       {{{"name", "v"}, {"kind", "continuous"}, {"gmm", {{"weights", {1.0}}, {"means", {0.0}}, {"stds", {1.0}}}}},
        {{"name", "c"}, {"kind", "discrete"}, {"categories", {"a", "b", "c", "d"}}, {"frequencies", {1, 1, 1, 1}}}}}};
  return data::Transformer::from_json(j);
}

// Linear critic with no hidden layer: D(x, c) = <w, x> + <u, c> + b.
struct LinearCritic {
  ad::ParamSet params;
  CriticNet net;
};

LinearCritic linear_critic(const data::EncodedLayout& layout, const Matrix& w, double bias, int pac = 1) {
  TrainConfig cfg;
  cfg.pac = pac;
  cfg.batch_size = pac;
  cfg.critic_hidden = {};
  LinearCritic out;
  Matrix weight = Matrix::Zero(pac * (layout.width + layout.condition_width), 1);
  for (int p = 0; p < pac; ++p) {
    weight.block(p * (layout.width + layout.condition_width), 0, layout.width, 1) = w.transpose();
  }
  out.params.add("critic.0.weight", weight);
  out.params.add("critic.0.bias", Matrix::Constant(1, 1, bias));
  out.net = attach_critic(layout, cfg, out.params);
  return out;
}

Matrix row_of(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

TEST(ActivateTest, ZerosGiveUniformSpans) {
  const auto t = small_transformer();
  ad::Graph g;
  const auto layout = std::make_shared<const ad::ActivationLayout>(t.layout().activation());
  const Matrix out = g.activate(g.constant(Matrix::Zero(1, 6)), layout).value();
  EXPECT_EQ(out(0, 0), 0.0);
  EXPECT_EQ(out(0, 1), 1.0);
  for (int i = 2; i < 6; ++i) EXPECT_DOUBLE_EQ(out(0, i), 0.25);
}

TEST(ActivateTest, SaturationLimits) {
  const auto t = small_transformer();
  ad::Graph g;
  const auto layout = std::make_shared<const ad::ActivationLayout>(t.layout().activation());
  const Matrix out = g.activate(g.constant(row_of({10.0, 0.0, 1e3, 0.0, 0.0, 0.0})), layout).value();
  EXPECT_NEAR(out(0, 0), 1.0, 1e-4);
  EXPECT_NEAR(out(0, 2), 1.0, 1e-9);
  EXPECT_NEAR(out(0, 3), 0.0, 1e-9);
}

TEST(CriticLossTest, ConstantCriticLeavesOnlyThePenalty) {
  const auto t = small_transformer();
  LinearCritic d = linear_critic(t.layout(), Matrix::Zero(1, 6), 2.5);
  Rng rng(1);
  const Matrix real = Matrix::Random(4, 6);
  const Matrix fake = Matrix::Random(4, 6);
  ad::Graph g;
  const auto bound = d.params.bind(g, true);
  const CriticLoss loss = critic_loss(g, d.net, bound, real, fake, Matrix::Zero(4, 4), 10.0, rng);
  EXPECT_EQ(loss.wasserstein, 0.0);
  // Zero gradient; the row norm carries a sqrt(1e-12) floor.
  const double expected = (1e-6 - 1.0) * (1e-6 - 1.0);
  EXPECT_NEAR(loss.penalty, expected, 1e-12);
  EXPECT_NEAR(loss.value.item(), 10.0 * expected, 1e-11);
}

TEST(CriticLossTest, IdenticalBatchesHaveZeroWassersteinTerm) {
  const auto t = small_transformer();
  LinearCritic d = linear_critic(t.layout(), row_of({0.3, -1, 2, 0.5, 0.1, 0.7}), 0.0);
  Rng rng(2);
  const Matrix x = Matrix::Random(6, 6);
  ad::Graph g;
  const auto bound = d.params.bind(g, true);
  EXPECT_EQ(critic_loss(g, d.net, bound, x, x, Matrix::Zero(6, 4), 10.0, rng).wasserstein, 0.0);
}

TEST(GradientPenaltyTest, LinearCriticHasAnalyticPenalty) {
  const auto t = small_transformer();
  Rng rng(3);
  const Matrix real = Matrix::Random(8, 6);
  const Matrix fake = Matrix::Random(8, 6);
  for (const auto& [w, expected] : std::vector<std::pair<Matrix, double>>{
           {row_of({1, 0, 0, 0, 0, 0}), 0.0}, {row_of({0, 0, 3, 0, 0, 0}), 4.0}, {row_of({1, 2, 2, 0, 0, 0}), 4.0}}) {
    LinearCritic d = linear_critic(t.layout(), w, 0.0);
    ad::Graph g;
    const auto bound = d.params.bind(g, true);
    const PenaltyTerm gp = gradient_penalty(g, d.net, bound, real, fake, Matrix::Zero(8, 4), rng);
    EXPECT_NEAR(gp.value.item(), expected, 1e-9);
  }
  // With pac = 2 each group's gradient stacks two copies of w.
  LinearCritic d = linear_critic(t.layout(), row_of({1, 0, 0, 0, 0, 0}), 0.0, 2);
  ad::Graph g;
  const auto bound = d.params.bind(g, true);
  const PenaltyTerm gp = gradient_penalty(g, d.net, bound, real, fake, Matrix::Zero(8, 4), rng);
  EXPECT_NEAR(gp.mean_grad_norm, std::sqrt(2.0), 1e-9);
}

TEST(GradientPenaltyTest, ParameterGradientMatchesFiniteDifferences) {
  const auto t = small_transformer();
  TrainConfig cfg;
  cfg.pac = 2;
  cfg.batch_size = 2;
  cfg.critic_hidden = {7, 5};
  ad::ParamSet params;
  Rng init(4);
  const CriticNet net = make_critic(t.layout(), cfg, params, init);
  const Matrix real = Matrix::Random(6, 6);
  const Matrix fake = Matrix::Random(6, 6);
  const Matrix cond = Matrix::Random(6, 4);

  auto penalty = [&](bool trainable, std::vector<Matrix>* grads) {
    ad::Graph g;
    const auto bound = params.bind(g, trainable);
    Rng rng(99);  // same epsilons every call
    const PenaltyTerm gp = gradient_penalty(g, net, bound, real, fake, cond, rng);
    if (grads) *grads = ad::gradient_values(g, gp.value, bound);
    return gp.value.item();
  };
  std::vector<Matrix> analytic;
  penalty(true, &analytic);
  double worst = 0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Matrix numeric = testing::central_difference([&] { return penalty(false, nullptr); }, params.value(p));
    worst = std::max(worst, testing::max_relative_error(analytic[p], numeric, 1e-6));
  }
  EXPECT_LE(worst, 1e-3);
}

TEST(ConditionalLossTest, OneHotAtRequestIsFree) {
  const auto t = small_transformer();
  const Matrix act = row_of({0.1, 1, 0, 0, 1, 0});
  const Matrix cond = row_of({0, 0, 1, 0});
  EXPECT_EQ(conditional_loss(act, cond, t.layout()), 0.0);
}

TEST(ConditionalLossTest, UniformSpanCostsLogOfWidth) {
  const auto t = small_transformer();
  const Matrix cond = (Matrix(2, 4) << 0, 1, 0, 0, 0, 0, 0, 1).finished();
  ad::Graph g;
  const ad::Var lc = conditional_loss(g, g.constant(Matrix::Zero(2, 6)), cond, t.layout());
  EXPECT_NEAR(lc.item(), std::log(4.0), 1e-12);
  const Matrix act = (Matrix(2, 6) << 0, 1, .25, .25, .25, .25, 0, 1, .25, .25, .25, .25).finished();
  EXPECT_NEAR(conditional_loss(act, cond, t.layout()), std::log(4.0), 1e-12);
}

TEST(ConditionalLossTest, EmptyConditionCostsNothing) {
  const auto t = small_transformer();
  ad::Graph g;
  EXPECT_EQ(conditional_loss(g, g.constant(Matrix::Random(3, 6)), Matrix::Zero(3, 4), t.layout()).item(), 0.0);
}

TEST(GeneratorLossTest, HandComputedValues) {
  const auto t = small_transformer();
  const Matrix fake = (Matrix(2, 6) << 0.5, 1, 0.25, 0.25, 0.25, 0.25, -0.5, 1, 0.25, 0.25, 0.25, 0.25).finished();
  const Matrix cond = (Matrix(2, 4) << 1, 0, 0, 0, 0, 0, 0, 0).finished();
  LinearCritic d = linear_critic(t.layout(), row_of({2, 1, 4, 0, 0, 0}), 0.5);
  // D(row0) = 1 + 1 + 1 + 0.5 = 3.5, D(row1) = -1 + 1 + 1 + 0.5 = 1.5; mean 2.5.
  for (double alpha : {0.0, 1.0, 3.0}) {
    ad::Graph g;
    const auto bound = d.params.bind(g, false);
    const ad::Var x = g.constant(fake);
    const ad::Var raw = g.constant(Matrix::Zero(2, 6));
    const GeneratorLoss loss = generator_loss(g, d.net, bound, x, raw, cond, t.layout(), alpha);
    // Condition on row 0 only: ln 4 / 2 per batch.
    EXPECT_NEAR(loss.value.item(), -2.5 + alpha * std::log(4.0) / 2.0, 1e-12) << alpha;
  }
  LinearCritic constant = linear_critic(t.layout(), Matrix::Zero(1, 6), 1.75);
  ad::Graph g;
  const auto bound = constant.params.bind(g, false);
  const GeneratorLoss loss =
      generator_loss(g, constant.net, bound, g.constant(fake), g.constant(Matrix::Zero(2, 6)), cond, t.layout(), 2.0);
  EXPECT_NEAR(loss.value.item(), -1.75 + 2.0 * std::log(4.0) / 2.0, 1e-12);
}

TEST(HardOverrideTest, ForwardIsOneHotGradientIsSoftmax) {
  const auto t = small_transformer();
  ad::Graph g;
  const auto layout = std::make_shared<const ad::ActivationLayout>(t.layout().activation());
  const ad::Var raw = g.variable(row_of({0.3, 0.0, 0.1, 0.9, 0.2, 0.4}));
  const ad::Var act = g.activate(raw, layout);
  Rng rng(1);
  const ad::Var hard = hard_override(g, act, t.layout(), 1.0, rng);
  EXPECT_EQ(hard.value()(0, 3), 1.0);
  EXPECT_EQ(hard.value()(0, 2), 0.0);
  EXPECT_EQ(hard.value()(0, 0), act.value()(0, 0));
  const Matrix weights = row_of({0, 0, 1, 2, 3, 4});
  const auto gh = g.gradient(g.sum(g.mul(hard, g.constant(weights))), std::vector<ad::Var>{raw})[0].value();
  const auto gs = g.gradient(g.sum(g.mul(act, g.constant(weights))), std::vector<ad::Var>{raw})[0].value();
  EXPECT_EQ(gh, gs);
}

TrainConfig quick_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.pac = 2;
  c.batch_size = 20;
  c.noise_dim = 8;
  c.generator_hidden = {16};
  c.critic_hidden = {16};
  c.modes = 3;
  c.seed = 5;
  return c;
}

TEST(TrainTest, TwoRowSmoke) {
  data::TableSchema s;
  s.columns = {{"v", ColumnKind::kContinuous, {}}, {"c", ColumnKind::kDiscrete, {"a", "b"}}};
  data::Table t(s, 2);
  t.set(0, 0, 1.0);
  t.set(1, 0, 2.0);
  t.set(0, 1, 0);
  t.set(1, 1, 1);
  TrainConfig c = quick_config(1);
  c.batch_size = 2;
  c.critic_steps = 1;
  const FitResult r = fit(t, c);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].epoch, 1);
}

TEST(TrainTest, SameSeedSameParameters) {
  const data::Table t = testing::mixed_table(120, 3);
  const FitResult a = fit(t, quick_config(3));
  const FitResult b = fit(t, quick_config(3));
  ASSERT_EQ(a.model.generator_params.size(), b.model.generator_params.size());
  for (std::size_t i = 0; i < a.model.generator_params.size(); ++i) {
    const Matrix& x = a.model.generator_params.value(i);
    const Matrix& y = b.model.generator_params.value(i);
    EXPECT_EQ(std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())), 0);
  }
  EXPECT_EQ(nlohmann::json(to_json(a.log.back())).dump(), nlohmann::json(to_json(b.log.back())).dump());
}

TEST(TrainTest, DivergenceGuardCarriesSnapshot) {
  TrainConfig c = quick_config(2);
  c.divergence_threshold = 1e-12;
  try {
    fit(testing::mixed_table(60, 1), c);
    FAIL();
  } catch (const DivergenceError& e) {
    const auto snap = nlohmann::json::parse(e.snapshot());
    EXPECT_EQ(snap.at("epoch"), 1);
    EXPECT_TRUE(snap.contains("config"));
  }
}

TEST(TrainTest, ConfigValidation) {
  TrainConfig c;
  c.batch_size = 55;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(train_config_from_json(nlohmann::json{{"epoch", 3}}), ConfigError);
  EXPECT_EQ(train_config_from_json(nlohmann::json{{"epochs", 3}}).epochs, 3);
  TrainConfig d;
  EXPECT_EQ(d.effective_batch(37), 30);
  EXPECT_EQ(d.effective_batch(4), 10);
  EXPECT_EQ(d.effective_batch(100000), 500);
}

TEST(CriticStepTest, SmallStepDecreasesCriticLoss) {
  const auto t = small_transformer();
  TrainConfig cfg = quick_config(1);
  ad::ParamSet params;
  Rng init(6);
  const CriticNet net = make_critic(t.layout(), cfg, params, init);
  const Matrix real = Matrix::Random(10, 6);
  const Matrix fake = Matrix::Random(10, 6);
  const Matrix cond = Matrix::Zero(10, 4);
  auto loss_at = [&](std::vector<Matrix>* grads) {
    ad::Graph g;
    const auto bound = params.bind(g, grads != nullptr);
    Rng rng(7);
    const CriticLoss l = critic_loss(g, net, bound, real, fake, cond, 10.0, rng);
    if (grads) *grads = ad::gradient_values(g, l.value, bound);
    return l.value.item();
  };
  std::vector<Matrix> grads;
  const double before = loss_at(&grads);
  for (std::size_t i = 0; i < params.size(); ++i) params.value(i) -= 1e-5 * grads[i];
  EXPECT_LT(loss_at(nullptr), before);
}

class SampleTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    model_ = new ImpuganModel(fit(testing::mixed_table(200, 2), quick_config(2)).model);
  }
  static void TearDownTestSuite() { delete model_; }
  static ImpuganModel* model_;
};
ImpuganModel* SampleTest::model_ = nullptr;

TEST_F(SampleTest, ZeroRowsGiveEmptyTable) {
  EXPECT_EQ(sample(*model_, 0, nullptr, 1).rows(), 0u);
}

TEST_F(SampleTest, HardConditionHoldsOnEveryRow) {
  const auto c = cond::build_condition({{"colour", "green"}, {"flag", "yes"}}, model_->transformer.schema(),
                                       model_->transformer.layout());
  const data::Table out = sample(*model_, 2000, &c, 3);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    ASSERT_EQ(out.category_name(r, 2), "green");
    ASSERT_EQ(out.category_name(r, 4), "yes");
  }
}

TEST_F(SampleTest, SeedsGiveDifferentContinuousValues) {
  const data::Table a = sample(*model_, 100, nullptr, 1);
  const data::Table b = sample(*model_, 100, nullptr, 2);
  int same = 0;
  for (std::size_t r = 0; r < 100; ++r) same += a.at(r, 0) == b.at(r, 0);
  EXPECT_EQ(same, 0);
  EXPECT_TRUE(sample(*model_, 100, nullptr, 1).identical(a));
}

TEST_F(SampleTest, SoftmaxSpansSumToOne) {
  Rng rng(4);
  Matrix z = Matrix::Random(50, model_->config.noise_dim);
  const Matrix act = generate(*model_, z, unconditional_conditions(*model_, 50, rng));
  for (const auto& e : model_->transformer.layout().columns) {
    for (Eigen::Index r = 0; r < act.rows(); ++r) {
      EXPECT_NEAR(act.row(r).segment(e.span.offset, e.span.width).sum(), 1.0, 1e-9);
    }
  }
}

TEST_F(SampleTest, DecodingIgnoresCriticScale) {
  ImpuganModel scaled = *model_;
  for (std::size_t i = 0; i < scaled.critic_params.size(); ++i) scaled.critic_params.value(i) *= 3.0;
  EXPECT_TRUE(sample(scaled, 64, nullptr, 9).identical(sample(*model_, 64, nullptr, 9)));
}

TEST_F(SampleTest, CheckpointRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "impugan_model_roundtrip";
  std::filesystem::remove_all(dir);
  model_->save(dir);
  const ImpuganModel back = ImpuganModel::load(dir);
  EXPECT_TRUE(sample(back, 64, nullptr, 9).identical(sample(*model_, 64, nullptr, 9)));
  std::filesystem::remove(dir / "model.params");
  EXPECT_THROW(ImpuganModel::load(dir), DataError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace impugan::gan
