#include "impugan/data/transformer.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "impugan/error.hpp"

namespace impugan::data {

ad::ActivationLayout EncodedLayout::activation() const {
  ad::ActivationLayout a;
  a.width = width;
  for (const auto& c : columns) {
    if (c.alpha >= 0) a.tanh_columns.push_back(c.alpha);
    a.softmax_spans.push_back(c.span);
  }
  return a;
}

std::vector<int> EncodedLayout::condition_to_encoded() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(condition_width));
  for (std::size_t j : discrete_columns) {
    const auto& c = columns[j];
    for (int q = 0; q < c.span.width; ++q) out.push_back(c.span.offset + q);
  }
  return out;
}

void EncodedLayout::validate() const {
  std::vector<int> hits(static_cast<std::size_t>(width), 0);
  auto mark = [&](int i) {
    if (i < 0 || i >= width) throw Error("layout slot " + std::to_string(i) + " outside width");
    ++hits[static_cast<std::size_t>(i)];
  };
  for (const auto& c : columns) {
    if (c.alpha >= 0) mark(c.alpha);
    if (c.span.width <= 0) throw Error("layout span of column " + std::to_string(c.column) + " is empty");
    for (int q = 0; q < c.span.width; ++q) mark(c.span.offset + q);
  }
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i] != 1) throw Error("layout slot " + std::to_string(i) + " covered " + std::to_string(hits[i]) + " times");
  }
}

void Transformer::build_layout() {
  layout_ = {};
  int offset = 0;
  int cond = 0;
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    ColumnEncoding e;
    e.column = j;
    e.kind = schema_.columns[j].kind;
    if (e.kind == ColumnKind::kContinuous) {
      e.alpha = offset++;
      e.span = {offset, gmms_[j].components()};
    } else {
      e.span = {offset, static_cast<int>(schema_.columns[j].categories.size())};
      e.condition_offset = cond;
      cond += e.span.width;
      layout_.discrete_columns.push_back(j);
    }
    offset += e.span.width;
    layout_.columns.push_back(e);
  }
  layout_.width = offset;
  layout_.condition_width = cond;
  layout_.validate();
}

Transformer Transformer::fit(const Table& table, const TransformerOptions& options) {
  if (table.rows() == 0) throw DataError("cannot fit a transformer on an empty table");
  table.schema().validate();
  Transformer t;
  t.schema_ = table.schema();
  t.gmms_.resize(table.cols());
  t.frequencies_.resize(table.cols());
  for (std::size_t j = 0; j < table.cols(); ++j) {
    const auto& spec = t.schema_.columns[j];
    const std::vector<double> values = table.observed_values(j);
    if (values.empty()) throw DataError("column '" + spec.name + "' is entirely missing");
    if (spec.discrete()) {
      auto& f = t.frequencies_[j];
      f.assign(spec.categories.size(), 0);
      for (double v : values) ++f[static_cast<std::size_t>(v)];
    } else {
      t.gmms_[j] = fit_gmm(values, options.modes, derive_seed(options.seed, j), options.gmm).model;
    }
  }
  t.build_layout();
  return t;
}

void Transformer::check_compatible(const TableSchema& other) const {
  if (other.size() != schema_.size()) {
    throw DataError("schema mismatch: " + std::to_string(other.size()) + " columns, model expects " +
                    std::to_string(schema_.size()));
  }
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    const auto& a = schema_.columns[j];
    const auto& b = other.columns[j];
    if (a.name != b.name) throw DataError("schema mismatch at column " + std::to_string(j) + ": '" + b.name + "' vs '" + a.name + "'");
    if (a.kind != b.kind) throw DataError("schema mismatch: column '" + a.name + "' kind differs");
    if (a.categories != b.categories) throw DataError("schema mismatch: column '" + a.name + "' vocabulary differs");
  }
}

void Transformer::transform_row(const Table& table, std::size_t row, Rng& rng, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(layout_.width)) throw ShapeError("transform_row: output width mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> lj;
  for (const auto& e : layout_.columns) {
    const auto& spec = schema_.columns[e.column];
    if (table.missing(row, e.column)) {
      throw DataError("transform: row " + std::to_string(row) + ", column '" + spec.name + "' is missing");
    }
    const double v = table.at(row, e.column);
    if (e.kind == ColumnKind::kDiscrete) {
      const auto q = static_cast<int>(v);
      if (q < 0 || q >= e.span.width) {
        throw DataError("transform: column '" + spec.name + "' category index " + std::to_string(q) + " is not in the vocabulary");
      }
      out[static_cast<std::size_t>(e.span.offset + q)] = 1.0;
      continue;
    }
    const GmmModel& g = gmms_[e.column];
    lj.resize(static_cast<std::size_t>(g.components()));
    g.log_joint(v, lj);
    const double top = *std::max_element(lj.begin(), lj.end());
    double total = 0;
    for (double& x : lj) {
      x = std::exp(x - top);
      total += x;
    }
    double u = uniform01(rng) * total;
    std::size_t m = 0;
    for (; m + 1 < lj.size(); ++m) {
      if (u < lj[m]) break;
      u -= lj[m];
    }
    while (lj[m] <= 0 && m > 0) --m;
    const double alpha = std::clamp((v - g.means[m]) / (4.0 * g.stds[m]), -1.0, 1.0);
    out[static_cast<std::size_t>(e.alpha)] = alpha;
    out[static_cast<std::size_t>(e.span.offset) + m] = 1.0;
  }
}

ad::Matrix Transformer::transform(const Table& table, Rng& rng) const {
  check_compatible(table.schema());
  ad::Matrix out(static_cast<Eigen::Index>(table.rows()), layout_.width);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    transform_row(table, r, rng, std::span<double>(out.row(static_cast<Eigen::Index>(r)).data(), static_cast<std::size_t>(layout_.width)));
  }
  return out;
}

void Transformer::inverse_row(std::span<const double> encoded, Table& out, std::size_t row) const {
  if (encoded.size() != static_cast<std::size_t>(layout_.width)) {
    throw ShapeError("inverse_transform: encoded width " + std::to_string(encoded.size()) + ", layout width " +
                     std::to_string(layout_.width));
  }
  for (const auto& e : layout_.columns) {
    const auto first = encoded.begin() + e.span.offset;
    const auto q = static_cast<std::size_t>(std::max_element(first, first + e.span.width) - first);
    if (e.kind == ColumnKind::kDiscrete) {
      out.set(row, e.column, static_cast<double>(q));
    } else {
      const GmmModel& g = gmms_[e.column];
      const double alpha = std::clamp(encoded[static_cast<std::size_t>(e.alpha)], -1.0, 1.0);
      out.set(row, e.column, alpha * 4.0 * g.stds[q] + g.means[q]);
    }
  }
}

Table Transformer::inverse_transform(const ad::Matrix& encoded) const {
  if (encoded.cols() != layout_.width) {
    throw ShapeError("inverse_transform: encoded width " + std::to_string(encoded.cols()) + ", layout width " +
                     std::to_string(layout_.width));
  }
  Table out(schema_, static_cast<std::size_t>(encoded.rows()));
  for (Eigen::Index r = 0; r < encoded.rows(); ++r) {
    inverse_row(std::span<const double>(encoded.row(r).data(), static_cast<std::size_t>(encoded.cols())), out,
                static_cast<std::size_t>(r));
  }
  return out;
}

nlohmann::json Transformer::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    const auto& spec = schema_.columns[j];
    nlohmann::json c{{"name", spec.name}, {"kind", std::string(to_string(spec.kind))}};
    if (spec.discrete()) {
      c["categories"] = spec.categories;
      c["frequencies"] = frequencies_[j];
    } else {
      c["gmm"] = {{"weights", gmms_[j].weights}, {"means", gmms_[j].means}, {"stds", gmms_[j].stds}};
    }
    cols.push_back(std::move(c));
  }
  return {{"format", "impugan-transformer"},
          {"version", 1},
          {"missing_tokens", schema_.missing_tokens},
          {"width", layout_.width},
          {"condition_width", layout_.condition_width},
          {"columns", std::move(cols)}};
}

Transformer Transformer::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "impugan-transformer" || j.at("version").get<int>() != 1) {
      throw DataError("unsupported transformer format");
    }
    Transformer t;
    t.schema_.missing_tokens = j.at("missing_tokens").get<std::vector<std::string>>();
    for (const auto& c : j.at("columns")) {
      ColumnSpec spec;
      spec.name = c.at("name").get<std::string>();
      spec.kind = parse_column_kind(c.at("kind").get<std::string>());
      GmmModel g;
      std::vector<std::size_t> f;
      if (spec.discrete()) {
        spec.categories = c.at("categories").get<std::vector<std::string>>();
        f = c.at("frequencies").get<std::vector<std::size_t>>();
        if (f.size() != spec.categories.size()) throw DataError("frequency count mismatch for '" + spec.name + "'");
      } else {
        const auto& m = c.at("gmm");
        g.weights = m.at("weights").get<std::vector<double>>();
        g.means = m.at("means").get<std::vector<double>>();
        g.stds = m.at("stds").get<std::vector<double>>();
        if (g.weights.empty() || g.means.size() != g.weights.size() || g.stds.size() != g.weights.size()) {
          throw DataError("malformed mixture for '" + spec.name + "'");
        }
        for (double s : g.stds) {
          if (!(s > 0)) throw DataError("non-positive mixture scale for '" + spec.name + "'");
        }
      }
      t.schema_.columns.push_back(std::move(spec));
      t.gmms_.push_back(std::move(g));
      t.frequencies_.push_back(std::move(f));
    }
    t.schema_.validate();
    t.build_layout();
    if (j.contains("width") && j.at("width").get<int>() != t.layout_.width) {
      throw DataError("transformer width does not match its columns");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed transformer JSON: ") + e.what());
  }
}

}  // namespace impugan::data
