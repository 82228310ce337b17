#include "impugan/ad/graph.hpp"

#include <cmath>
#include <sstream>

#include "impugan/error.hpp"

namespace impugan::ad {

namespace {

constexpr double kNormEps = 1e-12;

void softmax_inplace(Eigen::Ref<Matrix> block) {
  for (Eigen::Index r = 0; r < block.rows(); ++r) {
    auto row = block.row(r);
    const double m = row.maxCoeff();
    row = (row.array() - m).exp().matrix();
    row /= row.sum();
  }
}

void log_softmax_inplace(Eigen::Ref<Matrix> block) {
  for (Eigen::Index r = 0; r < block.rows(); ++r) {
    auto row = block.row(r);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    row.array() -= lse;
  }
}

// Saves and restores the recording flag around a backward pass.
class RecordingGuard {
 public:
  RecordingGuard(bool& flag, bool value) : flag_(flag), saved_(flag) { flag_ = value; }
  ~RecordingGuard() { flag_ = saved_; }
  RecordingGuard(const RecordingGuard&) = delete;
  RecordingGuard& operator=(const RecordingGuard&) = delete;

 private:
  bool& flag_;
  bool saved_;
};

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kScale: return "scale";
    case Op::kAddScalar: return "add_scalar";
    case Op::kAddRow: return "add_row";
    case Op::kBroadcastRows: return "broadcast_rows";
    case Op::kBroadcastCols: return "broadcast_cols";
    case Op::kBroadcastScalar: return "broadcast_scalar";
    case Op::kColSum: return "col_sum";
    case Op::kRowSum: return "row_sum";
    case Op::kSum: return "sum";
    case Op::kTranspose: return "transpose";
    case Op::kReshape: return "reshape";
    case Op::kConcatCols: return "concat_cols";
    case Op::kSliceCols: return "slice_cols";
    case Op::kPadCols: return "pad_cols";
    case Op::kSelectCols: return "select_cols";
    case Op::kScatterCols: return "scatter_cols";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kTanh: return "tanh";
    case Op::kSquare: return "square";
    case Op::kSqrt: return "sqrt";
    case Op::kLog: return "log";
    case Op::kExp: return "exp";
    case Op::kRowNorm: return "row_norm";
    case Op::kActivate: return "activate";
    case Op::kActivateGrad: return "activate_grad";
    case Op::kLogSoftmax: return "log_softmax_spans";
    case Op::kLogSoftmaxGrad: return "log_softmax_spans_grad";
  }
  return "?";
}

int Graph::check(Var v) const {
  if (v.valid() && &v.graph() != this) {
    throw Error("ad: Var belongs to a different graph");
  }
  if (v.id() < 0 || static_cast<std::size_t>(v.id()) >= nodes_.size()) {
    throw Error("ad: invalid Var");
  }
  return v.id();
}

void Graph::shape_error(Op op, const std::string& detail) const {
  std::ostringstream os;
  os << "node #" << nodes_.size() << " (" << op_name(op) << "): " << detail;
  throw ShapeError(os.str());
}

Var Graph::push(Node node) {
  const int id = static_cast<int>(nodes_.size());
  if (!node.value.allFinite()) {
    std::ostringstream os;
    os << "node #" << id << " (" << op_name(node.op) << ")";
    if (!node.name.empty()) os << " '" << node.name << "'";
    os << ": non-finite value";
    throw NumericError(os.str());
  }
  if (node.op != Op::kLeaf) {
    const bool a_grad = node.a >= 0 && nodes_[node.a].requires_grad;
    const bool b_grad = node.b >= 0 && nodes_[node.b].requires_grad;
    node.requires_grad = recording_ && (a_grad || b_grad);
  }
  nodes_.push_back(std::move(node));
  return Var(this, id);
}

Var Graph::constant(Matrix value, std::string name) {
  Node n;
  n.value = std::move(value);
  n.name = std::move(name);
  return push(std::move(n));
}

Var Graph::variable(Matrix value, std::string name) {
  Node n;
  n.value = std::move(value);
  n.name = std::move(name);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Graph::matmul(Var a, Var b, bool transpose_a, bool transpose_b) {
  const Matrix& A = nodes_[check(a)].value;
  const Matrix& B = nodes_[check(b)].value;
  const auto inner_a = transpose_a ? A.rows() : A.cols();
  const auto inner_b = transpose_b ? B.cols() : B.rows();
  if (inner_a != inner_b) {
    shape_error(Op::kMatMul, dims(A) + (transpose_a ? "^T" : "") + " * " + dims(B) +
                                 (transpose_b ? "^T" : ""));
  }
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id();
  n.b = b.id();
  n.i0 = transpose_a;
  n.i1 = transpose_b;
  if (!transpose_a && !transpose_b) {
    n.value.noalias() = A * B;
  } else if (transpose_a && !transpose_b) {
    n.value.noalias() = A.transpose() * B;
  } else if (!transpose_a && transpose_b) {
    n.value.noalias() = A * B.transpose();
  } else {
    n.value.noalias() = A.transpose() * B.transpose();
  }
  return push(std::move(n));
}

#define IMPUGAN_SAME_SHAPE(OP, A, B)                                         \
  if ((A).rows() != (B).rows() || (A).cols() != (B).cols()) {               \
    shape_error(OP, dims(A) + " vs " + dims(B));                             \
  }

Var Graph::add(Var a, Var b) {
  const Matrix& A = nodes_[check(a)].value;
  const Matrix& B = nodes_[check(b)].value;
  IMPUGAN_SAME_SHAPE(Op::kAdd, A, B)
  Node n{.value = A + B, .op = Op::kAdd, .a = a.id(), .b = b.id()};
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  const Matrix& A = nodes_[check(a)].value;
  const Matrix& B = nodes_[check(b)].value;
  IMPUGAN_SAME_SHAPE(Op::kSub, A, B)
  Node n{.value = A - B, .op = Op::kSub, .a = a.id(), .b = b.id()};
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  const Matrix& A = nodes_[check(a)].value;
  const Matrix& B = nodes_[check(b)].value;
  IMPUGAN_SAME_SHAPE(Op::kMul, A, B)
  Node n{.value = A.cwiseProduct(B), .op = Op::kMul, .a = a.id(), .b = b.id()};
  return push(std::move(n));
}

Var Graph::div(Var a, Var b) {
  const Matrix& A = nodes_[check(a)].value;
  const Matrix& B = nodes_[check(b)].value;
  IMPUGAN_SAME_SHAPE(Op::kDiv, A, B)
  Node n{.value = A.cwiseQuotient(B), .op = Op::kDiv, .a = a.id(), .b = b.id()};
  return push(std::move(n));
}

#undef IMPUGAN_SAME_SHAPE

Var Graph::scale(Var a, double factor) {
  Node n{.value = nodes_[check(a)].value * factor, .op = Op::kScale, .a = a.id(), .s = factor};
  return push(std::move(n));
}

Var Graph::add_scalar(Var a, double offset) {
  Node n{.value = (nodes_[check(a)].value.array() + offset).matrix(), .op = Op::kAddScalar, .a = a.id(),
         .s = offset};
  return push(std::move(n));
}

Var Graph::add_row(Var x, Var row) {
  const Matrix& X = nodes_[check(x)].value;
  const Matrix& R = nodes_[check(row)].value;
  if (R.rows() != 1 || R.cols() != X.cols()) {
    shape_error(Op::kAddRow, dims(X) + " + row " + dims(R));
  }
  Node n{.value = X.rowwise() + R.row(0), .op = Op::kAddRow, .a = x.id(), .b = row.id()};
  return push(std::move(n));
}

Var Graph::broadcast_rows(Var row, Eigen::Index rows) {
  const Matrix& R = nodes_[check(row)].value;
  if (R.rows() != 1) shape_error(Op::kBroadcastRows, "expected a row, got " + dims(R));
  Node n{.value = R.replicate(rows, 1), .op = Op::kBroadcastRows, .a = row.id(), .i0 = rows};
  return push(std::move(n));
}

Var Graph::broadcast_cols(Var col, Eigen::Index cols) {
  const Matrix& C = nodes_[check(col)].value;
  if (C.cols() != 1) shape_error(Op::kBroadcastCols, "expected a column, got " + dims(C));
  Node n{.value = C.replicate(1, cols), .op = Op::kBroadcastCols, .a = col.id(), .i0 = cols};
  return push(std::move(n));
}

Var Graph::broadcast_scalar(Var s, Eigen::Index rows, Eigen::Index cols) {
  const Matrix& S = nodes_[check(s)].value;
  if (S.size() != 1) shape_error(Op::kBroadcastScalar, "expected 1x1, got " + dims(S));
  Node n{.value = Matrix::Constant(rows, cols, S(0, 0)),
         .op = Op::kBroadcastScalar,
         .a = s.id(),
         .i0 = rows,
         .i1 = cols};
  return push(std::move(n));
}

Var Graph::col_sum(Var x) {
  Node n{.value = nodes_[check(x)].value.colwise().sum(), .op = Op::kColSum, .a = x.id()};
  return push(std::move(n));
}

Var Graph::row_sum(Var x) {
  Node n{.value = nodes_[check(x)].value.rowwise().sum(), .op = Op::kRowSum, .a = x.id()};
  return push(std::move(n));
}

Var Graph::sum(Var x) {
  Node n{.value = Matrix::Constant(1, 1, nodes_[check(x)].value.sum()), .op = Op::kSum,
         .a = x.id()};
  return push(std::move(n));
}

Var Graph::mean(Var x) {
  const auto count = static_cast<double>(nodes_[check(x)].value.size());
  if (count == 0) shape_error(Op::kSum, "mean of an empty tensor");
  return scale(sum(x), 1.0 / count);
}

Var Graph::transpose(Var x) {
  Node n{.value = nodes_[check(x)].value.transpose(), .op = Op::kTranspose, .a = x.id()};
  return push(std::move(n));
}

Var Graph::reshape(Var x, Eigen::Index rows, Eigen::Index cols) {
  const Matrix& X = nodes_[check(x)].value;
  if (rows * cols != X.size()) {
    shape_error(Op::kReshape, dims(X) + " -> " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Node n{.value = Eigen::Map<const Matrix>(X.data(), rows, cols),
         .op = Op::kReshape,
         .a = x.id(),
         .i0 = rows,
         .i1 = cols};
  return push(std::move(n));
}

Var Graph::concat_cols(Var a, Var b) {
  const Matrix& A = nodes_[check(a)].value;
  const Matrix& B = nodes_[check(b)].value;
  if (A.rows() != B.rows()) shape_error(Op::kConcatCols, dims(A) + " | " + dims(B));
  Matrix v(A.rows(), A.cols() + B.cols());
  v.leftCols(A.cols()) = A;
  v.rightCols(B.cols()) = B;
  Node n{.value = std::move(v), .op = Op::kConcatCols, .a = a.id(), .b = b.id()};
  return push(std::move(n));
}

Var Graph::slice_cols(Var x, int start, int width) {
  const Matrix& X = nodes_[check(x)].value;
  if (start < 0 || width < 0 || start + width > X.cols()) {
    shape_error(Op::kSliceCols, dims(X) + " [" + std::to_string(start) + ", +" +
                                    std::to_string(width) + ")");
  }
  Node n{.value = X.middleCols(start, width), .op = Op::kSliceCols, .a = x.id(), .i0 = start,
         .i1 = width};
  return push(std::move(n));
}

Var Graph::pad_cols(Var x, int start, int total_width) {
  const Matrix& X = nodes_[check(x)].value;
  if (start < 0 || start + X.cols() > total_width) {
    shape_error(Op::kPadCols, dims(X) + " into width " + std::to_string(total_width));
  }
  Matrix v = Matrix::Zero(X.rows(), total_width);
  v.middleCols(start, X.cols()) = X;
  Node n{.value = std::move(v), .op = Op::kPadCols, .a = x.id(), .i0 = start, .i1 = total_width};
  return push(std::move(n));
}

Var Graph::select_cols(Var x, std::shared_ptr<const std::vector<int>> columns) {
  const Matrix& X = nodes_[check(x)].value;
  Matrix v(X.rows(), static_cast<Eigen::Index>(columns->size()));
  for (std::size_t k = 0; k < columns->size(); ++k) {
    const int c = (*columns)[k];
    if (c < 0 || c >= X.cols()) shape_error(Op::kSelectCols, "column " + std::to_string(c));
    v.col(static_cast<Eigen::Index>(k)) = X.col(c);
  }
  Node n{.value = std::move(v), .op = Op::kSelectCols, .a = x.id(), .i0 = X.cols()};
  n.columns = std::move(columns);
  return push(std::move(n));
}

Var Graph::scatter_cols(Var x, std::shared_ptr<const std::vector<int>> columns,
                        int total_width) {
  const Matrix& X = nodes_[check(x)].value;
  if (static_cast<std::size_t>(X.cols()) != columns->size()) {
    shape_error(Op::kScatterCols, dims(X) + " vs " + std::to_string(columns->size()) + " indices");
  }
  Matrix v = Matrix::Zero(X.rows(), total_width);
  for (std::size_t k = 0; k < columns->size(); ++k) {
    const int c = (*columns)[k];
    if (c < 0 || c >= total_width) shape_error(Op::kScatterCols, "column " + std::to_string(c));
    v.col(c) += X.col(static_cast<Eigen::Index>(k));
  }
  Node n{.value = std::move(v), .op = Op::kScatterCols, .a = x.id(), .i0 = total_width};
  n.columns = std::move(columns);
  return push(std::move(n));
}

Var Graph::leaky_relu(Var x, double slope) {
  const Matrix& X = nodes_[check(x)].value;
  Node n{.value = X.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; }),
         .op = Op::kLeakyRelu,
         .a = x.id(),
         .s = slope};
  return push(std::move(n));
}

Var Graph::tanh(Var x) {
  Node n{.value = nodes_[check(x)].value.array().tanh().matrix(), .op = Op::kTanh, .a = x.id()};
  return push(std::move(n));
}

Var Graph::square(Var x) {
  Node n{.value = nodes_[check(x)].value.array().square().matrix(), .op = Op::kSquare, .a = x.id()};
  return push(std::move(n));
}

Var Graph::sqrt(Var x) {
  Node n{.value = nodes_[check(x)].value.array().sqrt().matrix(), .op = Op::kSqrt, .a = x.id()};
  return push(std::move(n));
}

Var Graph::log(Var x) {
  Node n{.value = nodes_[check(x)].value.array().log().matrix(), .op = Op::kLog, .a = x.id()};
  return push(std::move(n));
}

Var Graph::exp(Var x) {
  Node n{.value = nodes_[check(x)].value.array().exp().matrix(), .op = Op::kExp, .a = x.id()};
  return push(std::move(n));
}

Var Graph::row_norm(Var x) {
  const Matrix& X = nodes_[check(x)].value;
  Node n{.value = (X.rowwise().squaredNorm().array() + kNormEps).sqrt().matrix(), .op = Op::kRowNorm,
         .a = x.id()};
  return push(std::move(n));
}

Var Graph::activate(Var x, std::shared_ptr<const ActivationLayout> layout) {
  const Matrix& X = nodes_[check(x)].value;
  if (X.cols() != layout->width) {
    shape_error(Op::kActivate, dims(X) + " vs layout width " + std::to_string(layout->width));
  }
  Matrix v = X;
  for (int c : layout->tanh_columns) v.col(c) = v.col(c).array().tanh();
  for (const Span& s : layout->softmax_spans) softmax_inplace(v.middleCols(s.offset, s.width));
  Node n{.value = std::move(v), .op = Op::kActivate, .a = x.id()};
  n.layout = std::move(layout);
  return push(std::move(n));
}

Var Graph::log_softmax_spans(Var x, std::shared_ptr<const ActivationLayout> layout) {
  const Matrix& X = nodes_[check(x)].value;
  if (X.cols() != layout->width) {
    shape_error(Op::kLogSoftmax, dims(X) + " vs layout width " + std::to_string(layout->width));
  }
  Matrix v = X;
  for (const Span& s : layout->softmax_spans) log_softmax_inplace(v.middleCols(s.offset, s.width));
  Node n{.value = std::move(v), .op = Op::kLogSoftmax, .a = x.id()};
  n.layout = std::move(layout);
  return push(std::move(n));
}

void Graph::accumulate(std::vector<Var>& adjoints, int id, Var g) {
  if (!nodes_[id].requires_grad) return;
  Var& slot = adjoints[static_cast<std::size_t>(id)];
  slot = slot.valid() ? add(slot, g) : g;
}

void Graph::backward_node(int id, Var g, std::vector<Var>& adjoints) {
  // Copy what we need: pushing new nodes may reallocate `nodes_`.
  const Op op = nodes_[id].op;
  const int ia = nodes_[id].a;
  const int ib = nodes_[id].b;
  const double s = nodes_[id].s;
  const Eigen::Index i0 = nodes_[id].i0;
  const auto layout = nodes_[id].layout;
  const auto columns = nodes_[id].columns;
  const Var out(this, id);
  const Var A(this, ia);
  const Var B(this, ib);
  const bool need_a = ia >= 0 && nodes_[ia].requires_grad && needed_[static_cast<std::size_t>(ia)];
  const bool need_b = ib >= 0 && nodes_[ib].requires_grad && needed_[static_cast<std::size_t>(ib)];
  const auto a_rows = need_a ? nodes_[ia].value.rows() : 0;
  const auto a_cols = need_a ? nodes_[ia].value.cols() : 0;

  switch (op) {
    case Op::kLeaf:
      return;
    case Op::kMatMul: {
      const bool ta = i0 != 0;
      const bool tb = nodes_[id].i1 != 0;
      if (need_a) {
        accumulate(adjoints, ia, ta ? matmul(B, g, tb, true) : matmul(g, B, false, !tb));
      }
      if (need_b) {
        accumulate(adjoints, ib, tb ? matmul(g, A, true, ta) : matmul(A, g, !ta, false));
      }
      return;
    }
    case Op::kAdd:
      if (need_a) accumulate(adjoints, ia, g);
      if (need_b) accumulate(adjoints, ib, g);
      return;
    case Op::kSub:
      if (need_a) accumulate(adjoints, ia, g);
      if (need_b) accumulate(adjoints, ib, scale(g, -1.0));
      return;
    case Op::kMul:
      if (need_a) accumulate(adjoints, ia, mul(g, B));
      if (need_b) accumulate(adjoints, ib, mul(g, A));
      return;
    case Op::kDiv:
      if (need_a) accumulate(adjoints, ia, div(g, B));
      if (need_b) accumulate(adjoints, ib, scale(div(mul(g, out), B), -1.0));
      return;
    case Op::kScale:
      if (need_a) accumulate(adjoints, ia, scale(g, s));
      return;
    case Op::kAddScalar:
      if (need_a) accumulate(adjoints, ia, g);
      return;
    case Op::kAddRow:
      if (need_a) accumulate(adjoints, ia, g);
      if (need_b) accumulate(adjoints, ib, col_sum(g));
      return;
    case Op::kBroadcastRows:
      if (need_a) accumulate(adjoints, ia, col_sum(g));
      return;
    case Op::kBroadcastCols:
      if (need_a) accumulate(adjoints, ia, row_sum(g));
      return;
    case Op::kBroadcastScalar:
      if (need_a) accumulate(adjoints, ia, sum(g));
      return;
    case Op::kColSum:
      if (need_a) accumulate(adjoints, ia, broadcast_rows(g, a_rows));
      return;
    case Op::kRowSum:
      if (need_a) accumulate(adjoints, ia, broadcast_cols(g, a_cols));
      return;
    case Op::kSum:
      if (need_a) accumulate(adjoints, ia, broadcast_scalar(g, a_rows, a_cols));
      return;
    case Op::kTranspose:
      if (need_a) accumulate(adjoints, ia, transpose(g));
      return;
    case Op::kReshape:
      if (need_a) accumulate(adjoints, ia, reshape(g, a_rows, a_cols));
      return;
    case Op::kConcatCols: {
      const int ca = static_cast<int>(nodes_[ia].value.cols());
      const int cb = static_cast<int>(nodes_[ib].value.cols());
      if (need_a) accumulate(adjoints, ia, slice_cols(g, 0, ca));
      if (need_b) accumulate(adjoints, ib, slice_cols(g, ca, cb));
      return;
    }
    case Op::kSliceCols:
      if (need_a) accumulate(adjoints, ia, pad_cols(g, static_cast<int>(i0), static_cast<int>(a_cols)));
      return;
    case Op::kPadCols:
      if (need_a) accumulate(adjoints, ia, slice_cols(g, static_cast<int>(i0), static_cast<int>(a_cols)));
      return;
    case Op::kSelectCols:
      if (need_a) accumulate(adjoints, ia, scatter_cols(g, columns, static_cast<int>(a_cols)));
      return;
    case Op::kScatterCols:
      if (need_a) accumulate(adjoints, ia, select_cols(g, columns));
      return;
    case Op::kLeakyRelu: {
      if (!need_a) return;
      // The local slope is piecewise constant, so it enters as a constant and
      // second derivatives through it are (correctly) zero almost everywhere.
      Matrix mask = nodes_[ia].value.unaryExpr([s](double v) { return v > 0.0 ? 1.0 : s; });
      accumulate(adjoints, ia, mul(g, constant(std::move(mask))));
      return;
    }
    case Op::kTanh:
      if (need_a) accumulate(adjoints, ia, mul(g, add_scalar(scale(square(out), -1.0), 1.0)));
      return;
    case Op::kSquare:
      if (need_a) accumulate(adjoints, ia, mul(g, scale(A, 2.0)));
      return;
    case Op::kSqrt:
      if (need_a) accumulate(adjoints, ia, div(g, scale(out, 2.0)));
      return;
    case Op::kLog:
      if (need_a) accumulate(adjoints, ia, div(g, A));
      return;
    case Op::kExp:
      if (need_a) accumulate(adjoints, ia, mul(g, out));
      return;
    case Op::kRowNorm:
      if (need_a) accumulate(adjoints, ia, mul(broadcast_cols(div(g, out), a_cols), A));
      return;
    case Op::kActivate: {
      if (!need_a) return;
      const Matrix& y = nodes_[id].value;
      Matrix dx = nodes_[g.id()].value;
      for (int c : layout->tanh_columns) {
        dx.col(c) = dx.col(c).cwiseProduct((1.0 - y.col(c).array().square()).matrix());
      }
      for (const Span& sp : layout->softmax_spans) {
        auto ys = y.middleCols(sp.offset, sp.width);
        auto gs = dx.middleCols(sp.offset, sp.width);
        const Eigen::VectorXd dot = gs.cwiseProduct(ys).rowwise().sum();
        gs = ys.cwiseProduct(gs - dot.replicate(1, sp.width));
      }
      Node n{.value = std::move(dx), .op = Op::kActivateGrad, .a = g.id(), .b = id};
      n.layout = layout;
      accumulate(adjoints, ia, push(std::move(n)));
      return;
    }
    case Op::kLogSoftmax: {
      if (!need_a) return;
      const Matrix& y = nodes_[id].value;
      Matrix dx = nodes_[g.id()].value;
      for (const Span& sp : layout->softmax_spans) {
        auto gs = dx.middleCols(sp.offset, sp.width);
        const Eigen::VectorXd total = gs.rowwise().sum();
        const Matrix p = y.middleCols(sp.offset, sp.width).array().exp().matrix();
        gs -= p.cwiseProduct(total.replicate(1, sp.width));
      }
      Node n{.value = std::move(dx), .op = Op::kLogSoftmaxGrad, .a = g.id(), .b = id};
      n.layout = layout;
      accumulate(adjoints, ia, push(std::move(n)));
      return;
    }
    case Op::kActivateGrad:
    case Op::kLogSoftmaxGrad: {
      std::ostringstream os;
      os << "node #" << id << " (" << op_name(op)
         << "): second-order differentiation through span activations is not supported";
      throw Error(os.str());
    }
  }
}

Gradients Graph::gradient(Var output, std::span<const Var> wrt, bool create_graph) {
  const int out = check(output);
  if (nodes_[out].value.size() != 1) {
    std::ostringstream os;
    os << "gradient: output node #" << out << " (" << op_name(nodes_[out].op)
       << ") is " << dims(nodes_[out].value) << ", expected a scalar";
    throw ShapeError(os.str());
  }
  for (const Var& w : wrt) check(w);

  // Only nodes lying on a path from some `wrt` to the output get adjoints.
  needed_.assign(static_cast<std::size_t>(out) + 1, 0);
  for (const Var& w : wrt) {
    if (w.id() <= out) needed_[static_cast<std::size_t>(w.id())] = 1;
  }
  for (int i = 0; i <= out; ++i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if ((n.a >= 0 && needed_[static_cast<std::size_t>(n.a)]) || (n.b >= 0 && needed_[static_cast<std::size_t>(n.b)])) {
      needed_[static_cast<std::size_t>(i)] = 1;
    }
  }

  RecordingGuard guard(recording_, create_graph);
  std::vector<Var> adjoints(static_cast<std::size_t>(out) + 1);
  if (nodes_[out].requires_grad) adjoints[out] = scalar(1.0);
  for (int i = out; i >= 0; --i) {
    const Var g = adjoints[static_cast<std::size_t>(i)];
    if (!g.valid() || !nodes_[i].requires_grad || !needed_[static_cast<std::size_t>(i)] ||
        nodes_[i].op == Op::kLeaf) {
      continue;
    }
    backward_node(i, g, adjoints);
  }

  Gradients result;
  result.values.reserve(wrt.size());
  result.detached.reserve(wrt.size());
  for (const Var& w : wrt) {
    const auto id = static_cast<std::size_t>(w.id());
    if (id < adjoints.size() && adjoints[id].valid()) {
      result.values.push_back(adjoints[id]);
      result.detached.push_back(false);
    } else {
      const Matrix& v = nodes_[id].value;
      result.values.push_back(constant(Matrix::Zero(v.rows(), v.cols())));
      result.detached.push_back(true);
    }
  }
  return result;
}

}  // namespace impugan::ad
