#pragma once

#include <string>
#include <vector>

#include "impugan/ad/graph.hpp"
#include "impugan/ad/params.hpp"
#include "impugan/rng.hpp"

namespace impugan::ad {

struct MlpShape {
  int inputs = 0;
  std::vector<int> hidden;
  int outputs = 0;
  // Slope of the hidden leaky-ReLU; 0 gives a plain ReLU.
  double negative_slope = 0.0;
};

// Fully connected network: affine -> leaky-ReLU for every hidden layer, then
// a final affine layer with no activation. Weights are stored `in x out` so a
// batch of rows maps as X * W + b.
class Mlp {
 public:
  Mlp() = default;
  // Registers `prefix.N.weight` / `prefix.N.bias` in `params`, initialised
  // uniformly in +-1/sqrt(fan_in).
  Mlp(const std::string& prefix, MlpShape shape, ParamSet& params, Rng& rng);
  // Re-attaches to parameters already present in `params` (e.g. loaded).
  static Mlp attach(const std::string& prefix, MlpShape shape, const ParamSet& params);

  // `bound` is the result of ParamSet::bind on the owning ParamSet.
  Var forward(Graph& graph, const std::vector<Var>& bound, Var x) const;

  const MlpShape& shape() const { return shape_; }
  const std::vector<std::size_t>& param_indices() const { return indices_; }

 private:
  MlpShape shape_;
  std::vector<std::size_t> indices_;  // weight, bias, weight, bias, ...
};

}  // namespace impugan::ad
