#include "impugan/ad/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "impugan/error.hpp"

namespace impugan::ad {

namespace {

constexpr char kMagic[8] = {'I', 'M', 'P', 'G', 'P', 'A', 'R', '1'};

static_assert(std::endian::native == std::endian::little,
              "parameter container I/O assumes a little-endian host");

}  // namespace

std::size_t ParamSet::add(std::string name, Matrix value) {
  for (const auto& n : names_) {
    if (n == name) throw Error("duplicate parameter name '" + name + "'");
  }
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::size_t ParamSet::index(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw Error("unknown parameter '" + std::string(name) + "'");
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

std::vector<Var> ParamSet::bind(Graph& graph, bool trainable) const {
  std::vector<Var> vars;
  vars.reserve(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    vars.push_back(trainable ? graph.variable(values_[i], names_[i])
                             : graph.constant(values_[i], names_[i]));
  }
  return vars;
}

void write_params(std::ostream& out, const ParamSet& params) {
  nlohmann::json header;
  header["tensors"] = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& v = params.value(i);
    header["tensors"].push_back({{"name", params.name(i)}, {"shape", {v.rows(), v.cols()}}});
  }
  const std::string text = header.dump();
  const std::uint64_t length = text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&length), sizeof(length));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& v = params.value(i);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw Error("failed writing parameter container");
}

ParamSet read_params(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a parameter container (bad magic)");
  }
  std::uint64_t length = 0;
  in.read(reinterpret_cast<char*>(&length), sizeof(length));
  if (!in || length > (1u << 30)) throw DataError("corrupt parameter container header");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw DataError("truncated parameter container header");

  ParamSet params;
  const auto header = nlohmann::json::parse(text);
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("shape").at(0).get<Eigen::Index>();
    const auto cols = t.at("shape").at(1).get<Eigen::Index>();
    Matrix v(rows, cols);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw DataError("truncated parameter container payload");
    params.add(t.at("name").get<std::string>(), std::move(v));
  }
  return params;
}

void save_params(const std::string& path, const ParamSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_params(out, params);
}

ParamSet load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_params(in);
}

Adam::Adam(const ParamSet& params, AdamOptions options) : options_(options) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& p = params.value(i);
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

bool Adam::update(ParamSet& params, std::span<const Matrix> grads) {
  if (grads.size() != params.size() || params.size() != m_.size()) {
    throw ShapeError("adam: gradient count does not match parameter count");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].rows() != m_[i].rows() || grads[i].cols() != m_[i].cols()) {
      throw ShapeError("adam: gradient shape mismatch for '" + params.name(i) + "'");
    }
    if (!grads[i].allFinite()) {
      ++skipped_;
      spdlog::warn("adam: non-finite gradient for '{}', skipping step {}", params.name(i),
                   step_ + 1);
      return false;
    }
  }
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = options_.learning_rate;
  const double eps = options_.epsilon;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i].cwiseProduct(grads[i]);
    params.value(i).array() -=
        lr * (m_[i].array() / correction1) / ((v_[i].array() / correction2).sqrt() + eps);
  }
  return true;
}

std::vector<Matrix> gradient_values(Graph& graph, Var loss, std::span<const Var> vars) {
  const Gradients grads = graph.gradient(loss, vars);
  std::vector<Matrix> out;
  out.reserve(vars.size());
  for (const Var& g : grads.values) out.push_back(g.value());
  return out;
}

}  // namespace impugan::ad
