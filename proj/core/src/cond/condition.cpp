#include "impugan/cond/condition.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "impugan/error.hpp"

namespace impugan::cond {

ConditionVector build_condition(const std::map<std::size_t, int>& selections, const TableSchema& schema,
                                const EncodedLayout& layout) {
  ConditionVector c;
  c.bits.assign(static_cast<std::size_t>(layout.condition_width), 0.0);
  for (const auto& [col, q] : selections) {
    if (col >= layout.columns.size()) throw DataError("condition column index " + std::to_string(col) + " out of range");
    const auto& e = layout.columns[col];
    if (e.kind != data::ColumnKind::kDiscrete) {
      throw DataError("condition on continuous column '" + schema.columns[col].name + "'");
    }
    if (q < 0 || q >= e.span.width) {
      throw DataError("condition category " + std::to_string(q) + " out of range for '" + schema.columns[col].name + "'");
    }
    c.bits[static_cast<std::size_t>(e.condition_offset + q)] = 1.0;
    c.selections[col] = q;
  }
  return c;
}

ConditionVector build_condition(const std::map<std::string, std::string>& selections, const TableSchema& schema,
                                const EncodedLayout& layout) {
  std::map<std::size_t, int> idx;
  for (const auto& [name, category] : selections) {
    const int col = schema.find(name);
    if (col < 0) throw DataError("condition on unknown column '" + name + "'");
    const auto& spec = schema.columns[static_cast<std::size_t>(col)];
    if (!spec.discrete()) throw DataError("condition on continuous column '" + name + "'");
    const int q = spec.category_index(category);
    if (q < 0) throw DataError("condition category '" + category + "' is not in the vocabulary of '" + name + "'");
    idx[static_cast<std::size_t>(col)] = q;
  }
  return build_condition(idx, schema, layout);
}

std::map<std::string, std::string> parse_condition_flags(const std::vector<std::string>& flags) {
  std::map<std::string, std::string> out;
  for (const auto& f : flags) {
    const auto eq = f.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("condition '" + f + "' is not column=category");
    const std::string col = f.substr(0, eq);
    if (out.contains(col)) throw ConfigError("column '" + col + "' conditioned twice");
    out[col] = f.substr(eq + 1);
  }
  return out;
}

std::map<std::size_t, int> selections_of(std::span<const double> bits, const EncodedLayout& layout) {
  std::map<std::size_t, int> out;
  for (std::size_t j : layout.discrete_columns) {
    const auto& e = layout.columns[j];
    for (int q = 0; q < e.span.width; ++q) {
      if (bits[static_cast<std::size_t>(e.condition_offset + q)] > 0.5) {
        out[j] = q;
        break;
      }
    }
  }
  return out;
}

TrainingSampler::TrainingSampler(const data::Table& table, const EncodedLayout& layout)
    : layout_(layout), rows_(table.rows()) {
  if (rows_ == 0) throw DataError("training sampler needs at least one row");
  const std::size_t kd = layout_.discrete_columns.size();
  if (kd == 0) spdlog::info("no discrete columns: conditioning disabled, training unconditionally");
  codes_.resize(rows_ * kd);
  index_.resize(kd);
  cumulative_.resize(kd);
  for (std::size_t k = 0; k < kd; ++k) {
    const std::size_t col = layout_.discrete_columns[k];
    const auto width = static_cast<std::size_t>(layout_.columns[col].span.width);
    index_[k].resize(width);
    for (std::size_t r = 0; r < rows_; ++r) {
      if (table.missing(r, col)) throw DataError("training sampler needs complete rows");
      const int q = table.category(r, col);
      codes_[r * kd + k] = q;
      index_[k][static_cast<std::size_t>(q)].push_back(r);
    }
    double acc = 0;
    for (std::size_t q = 0; q < width; ++q) {
      acc += std::log1p(static_cast<double>(index_[k][q].size()));
      cumulative_[k].push_back(acc);
    }
  }
}

std::vector<double> TrainingSampler::category_probabilities(std::size_t k) const {
  const auto& cum = cumulative_[k];
  std::vector<double> p(cum.size());
  for (std::size_t q = 0; q < cum.size(); ++q) p[q] = (cum[q] - (q ? cum[q - 1] : 0.0)) / cum.back();
  return p;
}

ConditionBatch TrainingSampler::sample(std::size_t batch, Rng& rng) const {
  ConditionBatch out;
  out.conditions = ad::Matrix::Zero(static_cast<Eigen::Index>(batch), layout_.condition_width);
  out.rows.resize(batch);
  const std::size_t kd = layout_.discrete_columns.size();
  if (kd == 0) {
    for (std::size_t b = 0; b < batch; ++b) out.rows[b] = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(rows_)) % rows_;
    return out;
  }
  out.column.resize(batch);
  out.category.resize(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(kd)) % kd;
    const auto& cum = cumulative_[k];
    const double u = uniform01(rng) * cum.back();
    auto q = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    q = std::min(q, cum.size() - 1);
    // Guard against landing on an empty category through rounding.
    while (index_[k][q].empty()) q = q == 0 ? cum.size() - 1 : q - 1;
    const auto& pool = index_[k][q];
    const std::size_t row = pool[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(pool.size())) % pool.size()];
    const std::size_t col = layout_.discrete_columns[k];
    out.rows[b] = row;
    out.column[b] = col;
    out.category[b] = static_cast<int>(q);
    out.conditions(static_cast<Eigen::Index>(b), layout_.columns[col].condition_offset + static_cast<int>(q)) = 1.0;
  }
  return out;
}

void TrainingSampler::extend(ConditionBatch& batch, Rng& rng) const {
  const std::size_t kd = layout_.discrete_columns.size();
  if (kd < 2) return;
  for (std::size_t b = 0; b < batch.rows.size(); ++b) {
    const double u = uniform01(rng);
    for (std::size_t k = 0; k < kd; ++k) {
      const std::size_t col = layout_.discrete_columns[k];
      const bool draw = uniform01(rng) < u;
      if (col == batch.column[b] || !draw) continue;
      const int q = category(batch.rows[b], k);
      batch.conditions(static_cast<Eigen::Index>(b), layout_.columns[col].condition_offset + q) = 1.0;
    }
  }
}

void hard_apply(std::span<double> activated, const ConditionVector& condition, const EncodedLayout& layout) {
  if (activated.size() != static_cast<std::size_t>(layout.width)) throw ShapeError("hard_apply: row width mismatch");
  for (const auto& [col, q] : condition.selections) {
    if (col >= layout.columns.size() || layout.columns[col].kind != data::ColumnKind::kDiscrete) {
      throw DataError("hard_apply: condition references non-discrete column " + std::to_string(col));
    }
    const auto& span = layout.columns[col].span;
    if (q < 0 || q >= span.width) throw DataError("hard_apply: category out of range");
    for (int i = 0; i < span.width; ++i) activated[static_cast<std::size_t>(span.offset + i)] = i == q ? 1.0 : 0.0;
  }
}

void hard_apply(ad::Matrix& activated, const ad::Matrix& conditions, const EncodedLayout& layout) {
  if (activated.cols() != layout.width || conditions.cols() != layout.condition_width ||
      conditions.rows() != activated.rows()) {
    throw ShapeError("hard_apply: matrix shapes do not match the layout");
  }
  for (std::size_t j : layout.discrete_columns) {
    const auto& e = layout.columns[j];
    for (Eigen::Index r = 0; r < activated.rows(); ++r) {
      for (int q = 0; q < e.span.width; ++q) {
        if (conditions(r, e.condition_offset + q) > 0.5) {
          for (int i = 0; i < e.span.width; ++i) activated(r, e.span.offset + i) = i == q ? 1.0 : 0.0;
          break;
        }
      }
    }
  }
}

}  // namespace impugan::cond
