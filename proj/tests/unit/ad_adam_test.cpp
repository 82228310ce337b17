#include <cmath>
#include <limits>
#include <cstring>
#include <sstream>

#include <gtest/gtest.h>

#include "impugan/ad/params.hpp"
#include "impugan/error.hpp"

namespace impugan::ad {
namespace {

ParamSet single(double v) {
  ParamSet p;
  p.add("theta", Matrix::Constant(1, 1, v));
  return p;
}

TEST(AdamTest, ZeroGradientLeavesParametersUnchanged) {
  ParamSet p = single(0.7);
  Adam adam(p, {.learning_rate = 0.01});
  std::vector<Matrix> g{Matrix::Zero(1, 1)};
  ASSERT_TRUE(adam.update(p, g));
  EXPECT_EQ(p.value(0)(0, 0), 0.7);
  EXPECT_EQ(adam.first_moment(0)(0, 0), 0.0);
  EXPECT_EQ(adam.step(), 1);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  // m = 0.1, v = 0.001; m_hat = 1, v_hat = 1 -> theta = -0.01 / (1 + 1e-8)
  ParamSet p = single(0.0);
  Adam adam(p, {.learning_rate = 0.01, .beta1 = 0.9, .beta2 = 0.999, .epsilon = 1e-8});
  std::vector<Matrix> g{Matrix::Ones(1, 1)};
  adam.update(p, g);
  EXPECT_NEAR(p.value(0)(0, 0), -0.01 / (1.0 + 1e-8), 1e-15);
}

TEST(AdamTest, RepeatedStepsMoveMonotonicallyAgainstGradientSign) {
  ParamSet p = single(0.0);
  Adam adam(p, {.learning_rate = 0.01});
  std::vector<Matrix> g{Matrix::Constant(1, 1, -3.0)};
  adam.update(p, g);
  const double after_one = p.value(0)(0, 0);
  adam.update(p, g);
  const double after_two = p.value(0)(0, 0);
  EXPECT_GT(after_one, 0.0);
  EXPECT_GT(after_two, after_one);
  EXPECT_EQ(adam.step(), 2);
}

TEST(AdamTest, NonFiniteGradientSkipsTheStep) {
  ParamSet p = single(1.0);
  Adam adam(p, {});
  std::vector<Matrix> g{Matrix::Constant(1, 1, std::numeric_limits<double>::quiet_NaN())};
  EXPECT_FALSE(adam.update(p, g));
  EXPECT_EQ(p.value(0)(0, 0), 1.0);
  EXPECT_EQ(adam.step(), 0);
  EXPECT_EQ(adam.skipped(), 1);
}

TEST(AdamTest, ShapeMismatchThrows) {
  ParamSet p = single(1.0);
  Adam adam(p, {});
  std::vector<Matrix> g{Matrix::Zero(2, 1)};
  EXPECT_THROW(adam.update(p, g), ShapeError);
}

TEST(ParamContainerTest, RoundTripIsBitExact) {
  ParamSet p;
  p.add("a", (Matrix(2, 3) << 1.0 / 3, -2.5e-300, 7, 0, 1e300, -0.0).finished());
  p.add("b", Matrix::Constant(1, 1, M_PI));
  std::stringstream buf;
  write_params(buf, p);
  ParamSet q = read_params(buf);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q.name(0), "a");
  EXPECT_EQ(q.name(1), "b");
  EXPECT_EQ(0, std::memcmp(p.value(0).data(), q.value(0).data(), 6 * sizeof(double)));
  EXPECT_EQ(q.value(1)(0, 0), M_PI);
}

TEST(ParamContainerTest, RejectsGarbage) {
  std::stringstream buf("not a checkpoint at all");
  EXPECT_THROW(read_params(buf), DataError);
}

}  // namespace
}  // namespace impugan::ad
