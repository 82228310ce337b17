#include "impugan/ad/mlp.hpp"

#include <cmath>

#include "impugan/error.hpp"

namespace impugan::ad {

namespace {

std::vector<int> layer_widths(const MlpShape& shape) {
  std::vector<int> widths{shape.inputs};
  widths.insert(widths.end(), shape.hidden.begin(), shape.hidden.end());
  widths.push_back(shape.outputs);
  return widths;
}

}  // namespace

Mlp::Mlp(const std::string& prefix, MlpShape shape, ParamSet& params, Rng& rng)
    : shape_(std::move(shape)) {
  const auto widths = layer_widths(shape_);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    if (fan_in <= 0 || fan_out <= 0) throw ConfigError("mlp '" + prefix + "': empty layer");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    Matrix b(1, fan_out);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = dist(rng);
    const std::string base = prefix + "." + std::to_string(l);
    indices_.push_back(params.add(base + ".weight", std::move(w)));
    indices_.push_back(params.add(base + ".bias", std::move(b)));
  }
}

Mlp Mlp::attach(const std::string& prefix, MlpShape shape, const ParamSet& params) {
  Mlp mlp;
  mlp.shape_ = std::move(shape);
  const auto widths = layer_widths(mlp.shape_);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    const std::size_t w = params.index(base + ".weight");
    const std::size_t b = params.index(base + ".bias");
    if (params.value(w).rows() != widths[l] || params.value(w).cols() != widths[l + 1] ||
        params.value(b).cols() != widths[l + 1]) {
      throw ShapeError("mlp '" + prefix + "': stored layer " + std::to_string(l) +
                       " does not match the declared shape");
    }
    mlp.indices_.push_back(w);
    mlp.indices_.push_back(b);
  }
  return mlp;
}

Var Mlp::forward(Graph& graph, const std::vector<Var>& bound, Var x) const {
  const std::size_t layers = indices_.size() / 2;
  Var h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    h = graph.add_row(graph.matmul(h, bound[indices_[2 * l]]), bound[indices_[2 * l + 1]]);
    if (l + 1 < layers) h = graph.leaky_relu(h, shape_.negative_slope);
  }
  return h;
}

}  // namespace impugan::ad
