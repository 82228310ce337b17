#include "impugan/eval/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "impugan/error.hpp"
#include "impugan/rng.hpp"

namespace impugan::eval {
namespace {

using Vector = Eigen::VectorXd;

struct Adam {
  explicit Adam(double lr) : lr(lr) {}
  template <typename M>
  void step(M& param, const M& grad, M& m, M& v) {
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(b1, t);
    const double c2 = 1 - std::pow(b2, t);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + 1e-8);
  }
  double lr;
  double b1 = 0.9;
  double b2 = 0.999;
  int t = 0;
};

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(idx[i - 1], idx[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
  }
  return idx;
}

FeatureMatrix gather(const FeatureMatrix& x, const std::vector<std::size_t>& idx, std::size_t from, std::size_t to) {
  FeatureMatrix out(static_cast<Eigen::Index>(to - from), x.cols());
  for (std::size_t i = from; i < to; ++i) out.row(static_cast<Eigen::Index>(i - from)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

// Returns a score matrix (rows x classes) predictor.
struct Linear {
  FeatureMatrix w;  // features x classes
  Eigen::RowVectorXd b;
  FeatureMatrix scores(const FeatureMatrix& x) const { return (x * w).rowwise() + b; }
};

Linear train_linear(const FeatureMatrix& x, const std::vector<int>& y, int classes, Rng& rng,
                    const ClassifierOptions& o) {
  const int heads = classes == 2 ? 1 : classes;
  Linear model{FeatureMatrix::Zero(x.cols(), heads), Eigen::RowVectorXd::Zero(heads)};
  FeatureMatrix mw = FeatureMatrix::Zero(x.cols(), heads);
  FeatureMatrix vw = mw;
  Eigen::RowVectorXd mb = Eigen::RowVectorXd::Zero(heads);
  Eigen::RowVectorXd vb = mb;
  Adam adam(o.svm_lr);
  const auto n = static_cast<std::size_t>(x.rows());
  const auto bs = static_cast<std::size_t>(std::max(1, o.batch_size));
  for (int epoch = 0; epoch < o.svm_epochs; ++epoch) {
    const auto idx = shuffled(n, rng);
    for (std::size_t from = 0; from < n; from += bs) {
      const std::size_t to = std::min(n, from + bs);
      const FeatureMatrix xb = gather(x, idx, from, to);
      const FeatureMatrix s = model.scores(xb);
      FeatureMatrix g = FeatureMatrix::Zero(s.rows(), heads);
      for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const int yi = y[idx[from + static_cast<std::size_t>(i)]];
        for (int h = 0; h < heads; ++h) {
          const double t = heads == 1 ? (yi == 1 ? 1.0 : -1.0) : (yi == h ? 1.0 : -1.0);
          if (t * s(i, h) < 1.0) g(i, h) = -t;
        }
      }
      g /= static_cast<double>(s.rows());
      FeatureMatrix gw = xb.transpose() * g + o.svm_l2 * model.w;
      Eigen::RowVectorXd gb = g.colwise().sum();
      ++adam.t;
      adam.step(model.w, gw, mw, vw);
      adam.step(model.b, gb, mb, vb);
    }
  }
  return model;
}

std::vector<int> predict_linear(const Linear& m, const FeatureMatrix& x) {
  const FeatureMatrix s = m.scores(x);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    if (s.cols() == 1) {
      out[static_cast<std::size_t>(i)] = s(i, 0) >= 0.0 ? 1 : 0;
    } else {
      Eigen::Index k;
      s.row(i).maxCoeff(&k);
      out[static_cast<std::size_t>(i)] = static_cast<int>(k);
    }
  }
  return out;
}

struct Mlp {
  FeatureMatrix w1, w2;
  Eigen::RowVectorXd b1, b2;
  FeatureMatrix hidden(const FeatureMatrix& x) const { return ((x * w1).rowwise() + b1).cwiseMax(0.0); }
  FeatureMatrix logits(const FeatureMatrix& x) const { return (hidden(x) * w2).rowwise() + b2; }
};

FeatureMatrix glorot(Eigen::Index in, Eigen::Index out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-bound, bound);
  FeatureMatrix w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  return w;
}

Mlp train_mlp(const FeatureMatrix& x, const std::vector<int>& y, int classes, Rng& rng, const ClassifierOptions& o) {
  const Eigen::Index h = o.mlp_hidden;
  Mlp m{glorot(x.cols(), h, rng), glorot(h, classes, rng), Eigen::RowVectorXd::Zero(h), Eigen::RowVectorXd::Zero(classes)};
  FeatureMatrix mw1 = FeatureMatrix::Zero(x.cols(), h), vw1 = mw1;
  FeatureMatrix mw2 = FeatureMatrix::Zero(h, classes), vw2 = mw2;
  Eigen::RowVectorXd mb1 = Eigen::RowVectorXd::Zero(h), vb1 = mb1;
  Eigen::RowVectorXd mb2 = Eigen::RowVectorXd::Zero(classes), vb2 = mb2;
  Adam adam(o.mlp_lr);
  const auto n = static_cast<std::size_t>(x.rows());
  const auto bs = static_cast<std::size_t>(std::max(1, o.batch_size));
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 0; epoch < o.mlp_max_epochs; ++epoch) {
    const auto idx = shuffled(n, rng);
    double epoch_loss = 0.0;
    for (std::size_t from = 0; from < n; from += bs) {
      const std::size_t to = std::min(n, from + bs);
      const FeatureMatrix xb = gather(x, idx, from, to);
      const auto nb = static_cast<double>(xb.rows());
      const FeatureMatrix hid = m.hidden(xb);
      FeatureMatrix p = (hid * m.w2).rowwise() + m.b2;
      double loss = 0.0;
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double mx = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - mx).exp();
        const double z = p.row(i).sum();
        p.row(i) /= z;
        const int yi = y[idx[from + static_cast<std::size_t>(i)]];
        loss -= std::log(std::max(p(i, yi), 1e-300));
        p(i, yi) -= 1.0;
      }
      loss = loss / nb + 0.5 * o.mlp_l2 * (m.w1.squaredNorm() + m.w2.squaredNorm()) / nb;
      epoch_loss += loss * nb;
      p /= nb;
      FeatureMatrix gw2 = hid.transpose() * p + o.mlp_l2 / nb * m.w2;
      Eigen::RowVectorXd gb2 = p.colwise().sum();
      FeatureMatrix dh = (p * m.w2.transpose()).cwiseProduct((hid.array() > 0.0).cast<double>().matrix());
      FeatureMatrix gw1 = xb.transpose() * dh + o.mlp_l2 / nb * m.w1;
      Eigen::RowVectorXd gb1 = dh.colwise().sum();
      ++adam.t;
      adam.step(m.w1, gw1, mw1, vw1);
      adam.step(m.b1, gb1, mb1, vb1);
      adam.step(m.w2, gw2, mw2, vw2);
      adam.step(m.b2, gb2, mb2, vb2);
    }
    epoch_loss /= static_cast<double>(n);
    if (epoch_loss > best - o.mlp_tol) {
      if (++stale >= o.mlp_patience) break;
    } else {
      stale = 0;
    }
    best = std::min(best, epoch_loss);
  }
  return m;
}

std::vector<int> argmax_rows(const FeatureMatrix& s) {
  std::vector<int> out(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index k;
    s.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return out;
}

}  // namespace

std::string to_string(ClassifierKind kind) { return kind == ClassifierKind::kMlp ? "mlp" : "linear-svm"; }

ClassifierKind parse_classifier(const std::string& text) {
  if (text == "mlp") return ClassifierKind::kMlp;
  if (text == "linear-svm") return ClassifierKind::kLinearSvm;
  throw ConfigError("unknown classifier '" + text + "' (expected linear-svm or mlp)");
}

FeatureEncoder::FeatureEncoder(const data::Table& train, std::size_t label) : label_(label) {
  const auto& s = train.schema();
  if (label >= s.size() || !s.columns[label].discrete()) throw DataError("downstream: label column must be categorical");
  const std::size_t d = s.size();
  fill_.assign(d, 0.0);
  mean_.assign(d, 0.0);
  scale_.assign(d, 1.0);
  offset_.assign(d, -1);
  cats_.assign(d, 0);
  for (std::size_t c = 0; c < d; ++c) {
    if (c == label) continue;
    std::vector<double> v = train.observed_values(c);
    offset_[c] = width_;
    if (s.columns[c].discrete()) {
      cats_[c] = static_cast<int>(s.columns[c].categories.size());
      std::vector<std::size_t> counts(static_cast<std::size_t>(cats_[c]), 0);
      for (double x : v) ++counts[static_cast<std::size_t>(x)];
      fill_[c] = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      width_ += cats_[c];
      continue;
    }
    width_ += 1;
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    fill_[c] = v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
    // Statistics after filling, so missing cells count at the median.
    const std::size_t missing = train.rows() - v.size();
    double sum = std::accumulate(v.begin(), v.end(), 0.0) + fill_[c] * static_cast<double>(missing);
    const auto n = static_cast<double>(train.rows());
    mean_[c] = sum / n;
    double ss = static_cast<double>(missing) * (fill_[c] - mean_[c]) * (fill_[c] - mean_[c]);
    for (double x : v) ss += (x - mean_[c]) * (x - mean_[c]);
    const double sd = std::sqrt(ss / n);
    scale_[c] = sd > 0.0 ? sd : 1.0;
  }
}

FeatureMatrix FeatureEncoder::transform(const data::Table& table) const {
  if (table.cols() != fill_.size()) throw DataError("downstream: feature table has a different column count");
  FeatureMatrix x = FeatureMatrix::Zero(static_cast<Eigen::Index>(table.rows()), width_);
  for (std::size_t c = 0; c < fill_.size(); ++c) {
    if (c == label_) continue;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      const double v = table.missing(r, c) ? fill_[c] : table.at(r, c);
      const auto row = static_cast<Eigen::Index>(r);
      if (cats_[c] > 0) {
        x(row, offset_[c] + static_cast<int>(v)) = 1.0;
      } else {
        x(row, offset_[c]) = (v - mean_[c]) / scale_[c];
      }
    }
  }
  return x;
}

double downstream_accuracy(const data::Table& train, const data::Table& test, std::size_t label, ClassifierKind kind,
                           std::uint64_t seed, const ClassifierOptions& options) {
  if (label >= train.cols() || test.cols() != train.cols()) throw DataError("downstream: label column not present in both tables");
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < train.rows(); ++r) {
    if (!train.missing(r, label)) keep.push_back(r);
  }
  const data::Table tr = train.select_rows(keep);
  std::vector<int> y(tr.rows());
  for (std::size_t r = 0; r < tr.rows(); ++r) y[r] = tr.category(r, label);
  if (y.empty() || std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end()) {
    throw DataError("downstream: training data has a single class");
  }
  std::vector<int> yt(test.rows());
  for (std::size_t r = 0; r < test.rows(); ++r) {
    if (test.missing(r, label)) throw DataError("downstream: test label missing on row " + std::to_string(r + 1));
    yt[r] = test.category(r, label);
  }
  if (yt.empty()) throw DataError("downstream: empty test table");

  const int classes = static_cast<int>(train.schema().columns[label].categories.size());
  const FeatureEncoder enc(tr, label);
  const FeatureMatrix x = enc.transform(tr);
  const FeatureMatrix xt = enc.transform(test);
  Rng rng(seed);
  std::vector<int> pred;
  if (kind == ClassifierKind::kLinearSvm) {
    pred = predict_linear(train_linear(x, y, classes, rng, options), xt);
  } else {
    pred = argmax_rows(train_mlp(x, y, classes, rng, options).logits(xt));
  }
  std::size_t hit = 0;
  for (std::size_t i = 0; i < yt.size(); ++i) hit += pred[i] == yt[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(yt.size());
}

}  // namespace impugan::eval
