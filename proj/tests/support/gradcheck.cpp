#include "gradcheck.hpp"

#include <algorithm>
#include <sstream>

#include "impugan/ad/graph.hpp"
#include "impugan/ad/mlp.hpp"
#include "impugan/ad/params.hpp"
#include "impugan/rng.hpp"
#include "../unit/oracles.hpp"

namespace impugan::testing {

namespace {

using ad::Graph;
using ad::Matrix;
using ad::Mlp;
using ad::MlpShape;
using ad::ParamSet;
using ad::Var;

constexpr double kStep = 1e-4;
// Finite differences are meaningless across a ReLU kink; inputs are redrawn
// until every pre-activation sits at least this far from zero.
constexpr double kKinkMargin = 1e-3;
constexpr double kRelativeFloor = 1e-6;

struct RandomNet {
  MlpShape shape;
  ParamSet params;
  Mlp mlp;
  Matrix x;
};

RandomNet random_net(std::uint64_t seed, bool scalar_output) {
  Rng rng(seed);
  std::uniform_int_distribution<int> layers(1, 3);
  std::uniform_int_distribution<int> units(1, 64);
  std::uniform_int_distribution<int> small(1, 8);
  RandomNet net;
  net.shape.inputs = small(rng) + 1;
  const int affine = layers(rng);
  for (int l = 0; l + 1 < affine; ++l) net.shape.hidden.push_back(units(rng));
  net.shape.outputs = scalar_output ? 1 : small(rng);
  net.shape.negative_slope = (rng() % 2 == 0) ? 0.0 : 0.2;
  net.mlp = Mlp("net", net.shape, net.params, rng);

  const int batch = small(rng);
  std::normal_distribution<double> normal;
  std::vector<Matrix> w;
  std::vector<Matrix> b;
  for (std::size_t i = 0; i < net.params.size(); i += 2) {
    w.push_back(net.params.value(i));
    b.push_back(net.params.value(i + 1));
  }
  for (int attempt = 0; attempt < 1000; ++attempt) {
    net.x = Matrix(batch, net.shape.inputs);
    for (Eigen::Index i = 0; i < net.x.size(); ++i) net.x.data()[i] = normal(rng);
    double closest = 0.0;
    reference_mlp(w, b, net.x, net.shape.negative_slope, &closest);
    if (closest > kKinkMargin) break;
  }
  return net;
}

std::string describe(const MlpShape& s, Eigen::Index batch) {
  std::ostringstream os;
  os << s.inputs;
  for (int h : s.hidden) os << "-" << h;
  os << "-" << s.outputs << " slope=" << s.negative_slope << " batch=" << batch;
  return os.str();
}

}  // namespace

GradCheck check_mlp_gradients(std::uint64_t seed) {
  RandomNet net = random_net(seed, false);
  auto loss = [&](Graph& g, const std::vector<Var>& bound) {
    return g.mean(g.square(net.mlp.forward(g, bound, g.constant(net.x))));
  };

  Graph g;
  auto bound = net.params.bind(g, true);
  const auto analytic = ad::gradient_values(g, loss(g, bound), bound);

  // The forward pass used for differencing is the plain-loop reference, not
  // the graph under test.
  GradCheck result{0.0, describe(net.shape, net.x.rows())};
  for (std::size_t p = 0; p < net.params.size(); ++p) {
    auto f = [&] {
      std::vector<Matrix> w;
      std::vector<Matrix> b;
      for (std::size_t i = 0; i < net.params.size(); i += 2) {
        w.push_back(net.params.value(i));
        b.push_back(net.params.value(i + 1));
      }
      const Matrix out = reference_mlp(w, b, net.x, net.shape.negative_slope);
      return out.squaredNorm() / static_cast<double>(out.size());
    };
    const Matrix numeric = central_difference(f, net.params.value(p), kStep);
    result.max_relative_error = std::max(
        result.max_relative_error, max_relative_error(analytic[p], numeric, kRelativeFloor));
  }
  return result;
}

GradCheck check_gradient_penalty(std::uint64_t seed) {
  RandomNet net = random_net(seed, true);
  // L(w) built either differentiably (create_graph) or as a plain number.
  auto penalty = [&](Graph& g, const std::vector<Var>& bound, bool create_graph) {
    Var x = g.variable(net.x);
    Var score = g.sum(net.mlp.forward(g, bound, x));
    Var dx = g.gradient(score, std::vector<Var>{x}, create_graph)[0];
    return g.mean(g.square(g.add_scalar(g.row_norm(dx), -1.0)));
  };

  Graph g;
  auto bound = net.params.bind(g, true);
  const auto analytic = ad::gradient_values(g, penalty(g, bound, true), bound);

  GradCheck result{0.0, describe(net.shape, net.x.rows())};
  for (std::size_t p = 0; p < net.params.size(); ++p) {
    auto f = [&] {
      Graph h;
      auto frozen = net.params.bind(h, false);
      return penalty(h, frozen, false).item();
    };
    const Matrix numeric = central_difference(f, net.params.value(p), kStep);
    result.max_relative_error = std::max(
        result.max_relative_error, max_relative_error(analytic[p], numeric, kRelativeFloor));
  }
  return result;
}

}  // namespace impugan::testing
