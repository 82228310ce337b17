#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "impugan/ad/graph.hpp"

namespace impugan::ad {

// Ordered collection of named parameter tensors.
class ParamSet {
 public:
  // Returns the index of the new parameter. Names must be unique.
  std::size_t add(std::string name, Matrix value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Matrix& value(std::size_t i) { return values_[i]; }
  const Matrix& value(std::size_t i) const { return values_[i]; }
  // Throws if absent.
  std::size_t index(std::string_view name) const;
  std::size_t scalar_count() const;

  // Binds every parameter into `graph` as a leaf. Trainable leaves take part
  // in gradients; frozen ones are constants.
  std::vector<Var> bind(Graph& graph, bool trainable) const;


 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

// Binary parameter container.
//
//   bytes 0..7   magic "IMPGPAR1"
//   bytes 8..15  header length H, uint64 little-endian
//   next H bytes UTF-8 JSON: {"tensors":[{"name":..,"shape":[rows,cols]},..]}
//   remainder    float64 little-endian values, tensor after tensor, row-major
void write_params(std::ostream& out, const ParamSet& params);
ParamSet read_params(std::istream& in);
void save_params(const std::string& path, const ParamSet& params);
ParamSet load_params(const std::string& path);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Holds one pair of moment accumulators per
// parameter tensor of the ParamSet it was created for.
class Adam {
 public:
  Adam(const ParamSet& params, AdamOptions options);

  // Applies one update. Returns false (and leaves parameters and moments
  // untouched) if any gradient is non-finite.
  bool update(ParamSet& params, std::span<const Matrix> grads);

  std::int64_t step() const { return step_; }
  std::int64_t skipped() const { return skipped_; }
  const AdamOptions& options() const { return options_; }
  const Matrix& first_moment(std::size_t i) const { return m_[i]; }
  const Matrix& second_moment(std::size_t i) const { return v_[i]; }

 private:
  AdamOptions options_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t step_ = 0;
  std::int64_t skipped_ = 0;
};

// Convenience: collects gradient values for `params` bound as `vars`.
std::vector<Matrix> gradient_values(Graph& graph, Var loss, std::span<const Var> vars);

}  // namespace impugan::ad
