#pragma once

// Define-by-run reverse-mode automatic differentiation over dense row-major
// matrices.
//
// A Graph records every operation applied to its Vars. Backward rules are
// themselves written in terms of Graph operations, so a gradient computed
// with `create_graph = true` is an ordinary node that can be differentiated
// again (used by the WGAN gradient penalty). The span activations are the
// exception: their backward is a fused primitive that refuses a second
// differentiation.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace impugan::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Span {
  int offset = 0;
  int width = 0;
};

// Column layout consumed by Graph::activate / Graph::log_softmax_spans.
struct ActivationLayout {
  std::vector<int> tanh_columns;
  std::vector<Span> softmax_spans;
  int width = 0;
};

class Graph;

class Var {
 public:
  Var() = default;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // Value of a 1x1 node.
  double item() const;

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

enum class Op : std::uint8_t {
  kLeaf,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kAddScalar,
  kAddRow,
  kBroadcastRows,
  kBroadcastCols,
  kBroadcastScalar,
  kColSum,
  kRowSum,
  kSum,
  kTranspose,
  kReshape,
  kConcatCols,
  kSliceCols,
  kPadCols,
  kSelectCols,
  kScatterCols,
  kLeakyRelu,
  kTanh,
  kSquare,
  kSqrt,
  kLog,
  kExp,
  kRowNorm,
  kActivate,
  kActivateGrad,
  kLogSoftmax,
  kLogSoftmaxGrad,
};

const char* op_name(Op op);

struct Gradients {
  std::vector<Var> values;
  // True where the requested input has no path to the output; the matching
  // entry in `values` is then a zero constant of the input's shape.
  std::vector<bool> detached;

  const Var& operator[](std::size_t i) const { return values[i]; }
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves.
  Var constant(Matrix value, std::string name = {});
  Var variable(Matrix value, std::string name = {});
  Var scalar(double value);

  // Linear algebra. matmul computes op(a) * op(b) where op transposes when
  // the matching flag is set.
  Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var a, double factor);
  Var add_scalar(Var a, double offset);
  // x (n x c) + row (1 x c) broadcast over rows.
  Var add_row(Var x, Var row);
  Var broadcast_rows(Var row, Eigen::Index rows);
  Var broadcast_cols(Var col, Eigen::Index cols);
  Var broadcast_scalar(Var s, Eigen::Index rows, Eigen::Index cols);
  Var col_sum(Var x);
  Var row_sum(Var x);
  Var sum(Var x);
  Var mean(Var x);
  Var transpose(Var x);
  // Row-major reinterpretation; element count must match.
  Var reshape(Var x, Eigen::Index rows, Eigen::Index cols);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var x, int start, int width);
  Var pad_cols(Var x, int start, int total_width);
  Var select_cols(Var x, std::shared_ptr<const std::vector<int>> columns);
  Var scatter_cols(Var x, std::shared_ptr<const std::vector<int>> columns, int total_width);

  // Elementwise nonlinearities.
  Var leaky_relu(Var x, double slope);
  Var relu(Var x) { return leaky_relu(x, 0.0); }
  Var tanh(Var x);
  Var square(Var x);
  Var sqrt(Var x);
  Var log(Var x);
  Var exp(Var x);
  // Per-row Euclidean norm, n x m -> n x 1.
  Var row_norm(Var x);

  // tanh on `tanh_columns`, softmax inside each span, identity elsewhere.
  Var activate(Var x, std::shared_ptr<const ActivationLayout> layout);
  // log-softmax inside each span, identity elsewhere.
  Var log_softmax_spans(Var x, std::shared_ptr<const ActivationLayout> layout);

  // d output / d wrt. `output` must be 1x1. With create_graph the returned
  // gradients are differentiable nodes; otherwise they are constants.
  Gradients gradient(Var output, std::span<const Var> wrt, bool create_graph = false);

  const Matrix& value(Var v) const { return nodes_[check(v)].value; }
  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }
  const std::string& name(Var v) const { return nodes_[check(v)].name; }
  Op op(Var v) const { return nodes_[check(v)].op; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Op op = Op::kLeaf;
    int a = -1;
    int b = -1;
    double s = 0.0;
    Eigen::Index i0 = 0;
    Eigen::Index i1 = 0;
    std::shared_ptr<const ActivationLayout> layout;
    std::shared_ptr<const std::vector<int>> columns;
    std::string name;
    bool requires_grad = false;
  };

  int check(Var v) const;
  Var push(Node node);
  [[noreturn]] void shape_error(Op op, const std::string& detail) const;
  void backward_node(int id, Var g, std::vector<Var>& adjoints);
  void accumulate(std::vector<Var>& adjoints, int id, Var g);

  std::vector<Node> nodes_;
  bool recording_ = true;
  std::vector<char> needed_;
};

}  // namespace impugan::ad

namespace impugan::ad {

inline const Matrix& Var::value() const { return graph_->value(*this); }

inline double Var::item() const { return value()(0, 0); }

}  // namespace impugan::ad
