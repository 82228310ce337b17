#include <cmath>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "impugan/ad/graph.hpp"
#include "impugan/ad/mlp.hpp"
#include "impugan/ad/params.hpp"
#include "impugan/error.hpp"
#include "oracles.hpp"

namespace impugan::ad {
namespace {

using testing::central_difference;
using testing::max_relative_error;

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

TEST(GraphTest, IdentityGraphReturnsInput) {
  Graph g;
  Var x = g.constant(row({2, 3}));
  EXPECT_EQ(x.value(), row({2, 3}));
}

TEST(GraphTest, SoftmaxOverSymmetricSpanIsUniform) {
  Graph g;
  auto layout = std::make_shared<ActivationLayout>();
  layout->softmax_spans = {{0, 2}};
  layout->width = 2;
  Var y = g.activate(g.constant(row({0, 0})), layout);
  EXPECT_DOUBLE_EQ(y.value()(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(y.value()(0, 1), 0.5);
}

TEST(GraphTest, HandSetTwoLayerMlpMatchesHandArithmetic) {
  // x W1 = [1,-1] [[2,1],[-1,3]] = [3,-2]; + b1 = [3.5,-2.5]
  // ReLU -> [3.5, 0];      [3.5, 0] [[1],[2]] + 0.25 = 3.75
  // leaky(0.2) -> [3.5,-0.5]; 3.5 - 1.0 + 0.25 = 2.75
  for (const auto& [slope, expected] : {std::pair{0.0, 3.75}, std::pair{0.2, 2.75}}) {
    ParamSet params;
    params.add("net.0.weight", (Matrix(2, 2) << 2, 1, -1, 3).finished());
    params.add("net.0.bias", row({0.5, -0.5}));
    params.add("net.1.weight", (Matrix(2, 1) << 1, 2).finished());
    params.add("net.1.bias", row({0.25}));
    Mlp mlp = Mlp::attach("net", {.inputs = 2, .hidden = {2}, .outputs = 1, .negative_slope = slope},
                          params);
    Graph g;
    auto bound = params.bind(g, false);
    Var out = mlp.forward(g, bound, g.constant(row({1, -1})));
    EXPECT_DOUBLE_EQ(out.item(), expected) << "slope " << slope;
  }
}

TEST(GraphTest, PowerRuleGradient) {
  Graph g;
  Var x = g.variable(row({3}));
  Var y = g.square(x);
  auto grads = g.gradient(y, std::vector<Var>{x});
  EXPECT_DOUBLE_EQ(grads[0].item(), 6.0);
  EXPECT_FALSE(grads.detached[0]);
}

TEST(GraphTest, ConstantOutputHasZeroDetachedGradient) {
  Graph g;
  Var x = g.variable(row({3, 4}));
  Var c = g.sum(g.constant(row({1, 1})));
  auto grads = g.gradient(c, std::vector<Var>{x});
  EXPECT_TRUE(grads.detached[0]);
  EXPECT_EQ(grads[0].value(), Matrix::Zero(1, 2));
}

TEST(GraphTest, NonScalarOutputIsRejected) {
  Graph g;
  Var x = g.variable(row({1, 2}));
  EXPECT_THROW(g.gradient(g.square(x), std::vector<Var>{x}), ShapeError);
}

TEST(GraphTest, ShapeMismatchNamesTheNode) {
  Graph g;
  Var a = g.constant(Matrix::Ones(2, 3));
  Var b = g.constant(Matrix::Ones(2, 3));
  try {
    g.matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos) << e.what();
  }
}

TEST(GraphTest, NonFiniteIntermediateNamesTheNode) {
  Graph g;
  Var a = g.constant(row({-1.0}));
  try {
    g.log(a);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("log"), std::string::npos) << e.what();
  }
}

TEST(GraphTest, SecondOrderThroughSpanActivationIsRejected) {
  Graph g;
  auto layout = std::make_shared<ActivationLayout>();
  layout->softmax_spans = {{0, 3}};
  layout->width = 3;
  Var x = g.variable(row({0.1, 0.2, 0.3}));
  Var w = g.variable(row({1.0, 2.0, 3.0}));
  Var y = g.sum(g.mul(g.activate(x, layout), w));
  auto dx = g.gradient(y, std::vector<Var>{x}, /*create_graph=*/true);
  Var second = g.sum(g.square(dx[0]));
  EXPECT_THROW(g.gradient(second, std::vector<Var>{w}), Error);
}

TEST(GraphTest, EvaluationIsRepeatable) {
  Rng rng(7);
  ParamSet params;
  Mlp mlp("m", {.inputs = 5, .hidden = {8, 8}, .outputs = 3, .negative_slope = 0.2}, params, rng);
  Matrix x = Matrix::Random(4, 5);
  auto run = [&] {
    Graph g;
    auto bound = params.bind(g, true);
    Var loss = g.mean(g.square(mlp.forward(g, bound, g.constant(x))));
    return gradient_values(g, loss, bound);
  };
  const auto first = run();
  const auto second = run();
  ASSERT_EQ(first.size(), second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    EXPECT_EQ(0, std::memcmp(first[i].data(), second[i].data(), first[i].size() * sizeof(double)));
  }
}

// Every op's first derivative against central differences on a small
// composite expression.
TEST(GraphTest, ElementwiseOpsMatchFiniteDifferences) {
  Matrix x0 = (Matrix(2, 3) << 0.3, 1.2, 0.7, 0.9, 0.4, 1.6).finished();
  Matrix w0 = (Matrix(3, 2) << 0.5, -0.2, 0.1, 0.8, -0.6, 0.3).finished();
  auto layout = std::make_shared<ActivationLayout>();
  layout->tanh_columns = {0};
  layout->softmax_spans = {{1, 2}};
  layout->width = 3;
  auto cols = std::make_shared<std::vector<int>>(std::vector<int>{2, 0, 2});

  auto build = [&](Graph& g, Var x, Var w) {
    Var a = g.tanh(g.matmul(x, w));                          // 2x2
    Var b = g.div(g.exp(g.scale(a, 0.5)), g.add_scalar(g.square(a), 1.0));
    Var c = g.matmul(b, w, false, true);                     // 2x3
    Var d = g.activate(g.add(c, x), layout);
    Var e = g.log_softmax_spans(g.sub(x, c), layout);
    Var f = g.select_cols(g.mul(d, e), cols);
    Var h = g.concat_cols(g.row_norm(f), g.slice_cols(g.sqrt(x), 1, 2));
    Var k = g.reshape(g.transpose(h), 2, 3);
    return g.sum(g.add_row(k, g.col_sum(g.log(x))));
  };

  Graph g;
  Var x = g.variable(x0);
  Var w = g.variable(w0);
  auto grads = g.gradient(build(g, x, w), std::vector<Var>{x, w});

  Matrix xs = x0;
  Matrix ws = w0;
  auto f = [&] {
    Graph h;
    return build(h, h.constant(xs), h.constant(ws)).item();
  };
  EXPECT_LT(max_relative_error(grads[0].value(), central_difference(f, xs), 1e-6), 1e-6);
  EXPECT_LT(max_relative_error(grads[1].value(), central_difference(f, ws), 1e-6), 1e-6);
}

}  // namespace
}  // namespace impugan::ad
