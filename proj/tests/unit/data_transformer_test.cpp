#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "../support/synthetic.hpp"
#include "impugan/data/transformer.hpp"
#include "impugan/error.hpp"

namespace impugan::data {
namespace {

Table two_column_table() {
  TableSchema s;
  s.columns = {{"v", ColumnKind::kContinuous, {}}, {"c", ColumnKind::kDiscrete, {"a", "b", "c"}}};
  Table t(s, 40);
  for (std::size_t r = 0; r < 40; ++r) {
    t.set(r, 0, (r % 2 ? 100.0 : 0.0) + 0.01 * static_cast<double>(r));
    t.set(r, 1, static_cast<double>(r % 3));
  }
  return t;
}

// One continuous column with a single N(5, 2^2) mode, one discrete {a,b,c}.
Transformer fixed_transformer() {
  nlohmann::json j = {
      {"format", "impugan-transformer"},
      {"version", 1},
      {"missing_tokens", {"", "?"}},
      {"columns",
       {{{"name", "v"}, {"kind", "continuous"}, {"gmm", {{"weights", {1.0}}, {"means", {5.0}}, {"stds", {2.0}}}}},
        {{"name", "c"}, {"kind", "discrete"}, {"categories", {"a", "b", "c"}}, {"frequencies", {1, 1, 1}}}}}};
  return Transformer::from_json(j);
}

std::vector<double> encode(const Transformer& t, double v, int c) {
  Table row(t.schema(), 1);
  row.set(0, 0, v);
  row.set(0, 1, c);
  Rng rng(0);
  std::vector<double> out(static_cast<std::size_t>(t.width()));
  t.transform_row(row, 0, rng, out);
  return out;
}

TEST(TransformerTest, WidthIsSumOfSpans) {
  const Transformer t = Transformer::fit(two_column_table(), {.modes = 2});
  EXPECT_EQ(t.gmm(0).components(), 2);
  EXPECT_EQ(t.width(), 6);
  EXPECT_EQ(t.layout().condition_width, 3);
  EXPECT_EQ(t.layout().columns[1].span.width, 3);
}

TEST(TransformerTest, BinaryVocabularyHasSpanTwo) {
  TableSchema s;
  s.columns = {{"c", ColumnKind::kDiscrete, {"a", "b"}}};
  Table tab(s, 3);
  for (std::size_t r = 0; r < 3; ++r) tab.set(r, 0, static_cast<double>(r % 2));
  EXPECT_EQ(Transformer::fit(tab).layout().columns[0].span.width, 2);
}

TEST(TransformerTest, ScarceValuesShrinkTheModeSpan) {
  TableSchema s;
  s.columns = {{"v", ColumnKind::kContinuous, {}}};
  Table tab(s, 30);
  for (std::size_t r = 0; r < 30; ++r) tab.set(r, 0, static_cast<double>(r % 3));
  const Transformer t = Transformer::fit(tab, {.modes = 10});
  EXPECT_EQ(t.layout().columns[0].span.width, 3);
  EXPECT_EQ(t.width(), 4);
}

TEST(TransformerTest, DiscreteValueIsOneHot) {
  const auto e = encode(fixed_transformer(), 5.0, 1);
  EXPECT_EQ(std::vector<double>(e.begin() + 2, e.end()), (std::vector<double>{0, 1, 0}));
}

TEST(TransformerTest, AlphaIsOffsetInFourSigmaUnits) {
  const Transformer t = fixed_transformer();
  EXPECT_EQ(encode(t, 5.0, 0)[0], 0.0);
  EXPECT_DOUBLE_EQ(encode(t, 9.0, 0)[0], 0.5);
  EXPECT_EQ(encode(t, 9.0, 0)[1], 1.0);
}

TEST(TransformerTest, ClippedAlphaDecodesToFourSigma) {
  const Transformer t = fixed_transformer();
  const auto e = encode(t, 100.0, 2);
  EXPECT_EQ(e[0], 1.0);
  const Table back = t.inverse_transform(Eigen::Map<const ad::Matrix>(e.data(), 1, t.width()));
  EXPECT_EQ(back.at(0, 0), 13.0);
  EXPECT_EQ(back.category(0, 1), 2);
}

TEST(TransformerTest, RoundTripOnMixedRows) {
  const Table tab = testing::mixed_table(1000, 42);
  const Transformer t = Transformer::fit(tab, {.modes = 10, .seed = 5});
  Rng rng(17);
  const ad::Matrix enc = t.transform(tab, rng);
  const Table back = t.inverse_transform(enc);
  int checked = 0;
  for (std::size_t r = 0; r < tab.rows(); ++r) {
    for (const auto& e : t.layout().columns) {
      if (e.kind == ColumnKind::kDiscrete) {
        EXPECT_EQ(back.at(r, e.column), tab.at(r, e.column));
      } else if (std::abs(enc(static_cast<Eigen::Index>(r), e.alpha)) < 1.0) {
        EXPECT_NEAR(back.at(r, e.column), tab.at(r, e.column), 1e-6);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 1900);
}

TEST(TransformerTest, EncodedRowsHaveOneHotSpansAndBoundedAlpha) {
  const Table tab = testing::mixed_table(300, 3);
  const Transformer t = Transformer::fit(tab, {.seed = 1});
  Rng rng(2);
  const ad::Matrix enc = t.transform(tab, rng);
  for (Eigen::Index r = 0; r < enc.rows(); ++r) {
    for (const auto& e : t.layout().columns) {
      int ones = 0;
      for (int q = 0; q < e.span.width; ++q) {
        const double x = enc(r, e.span.offset + q);
        EXPECT_TRUE(x == 0.0 || x == 1.0);
        ones += x == 1.0;
      }
      EXPECT_EQ(ones, 1);
      if (e.alpha >= 0) {
        EXPECT_LE(std::abs(enc(r, e.alpha)), 1.0);
      }
    }
  }
}

TEST(TransformerTest, SpansTileTheEncodedWidth) {
  const Transformer t = Transformer::fit(testing::mixed_table(200, 9));
  std::vector<int> hits(static_cast<std::size_t>(t.width()), 0);
  int total = 0;
  for (const auto& e : t.layout().columns) {
    if (e.alpha >= 0) {
      ++hits[static_cast<std::size_t>(e.alpha)];
      ++total;
    }
    for (int q = 0; q < e.span.width; ++q) ++hits[static_cast<std::size_t>(e.span.offset + q)];
    total += e.span.width;
  }
  EXPECT_EQ(total, t.width());
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(TransformerTest, EntirelyMissingColumnIsNamed) {
  Table tab = two_column_table();
  for (std::size_t r = 0; r < tab.rows(); ++r) tab.set_missing(r, 1);
  try {
    Transformer::fit(tab);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'c'"), std::string::npos);
  }
}

TEST(TransformerTest, FitUsesOnlyObservedCells) {
  Table tab = two_column_table();
  tab.set_missing(0, 0);
  tab.set_missing(1, 1);
  const Transformer t = Transformer::fit(tab);
  std::size_t total = 0;
  for (auto f : t.frequencies(1)) total += f;
  EXPECT_EQ(total, 39u);
  Rng rng(0);
  EXPECT_THROW(t.transform(tab, rng), DataError);
}

TEST(TransformerTest, JsonRoundTripPreservesEncoding) {
  const Table tab = testing::mixed_table(200, 4);
  const Transformer a = Transformer::fit(tab, {.seed = 8});
  const Transformer b = Transformer::from_json(nlohmann::json::parse(a.to_json().dump()));
  Rng ra(3);
  Rng rb(3);
  EXPECT_EQ(a.transform(tab, ra), b.transform(tab, rb));
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(TransformerTest, MismatchesAreRejected) {
  const Transformer t = fixed_transformer();
  EXPECT_THROW(t.inverse_transform(ad::Matrix::Zero(1, 3)), ShapeError);
  TableSchema other = t.schema();
  other.columns[1].categories = {"a", "b", "z"};
  EXPECT_THROW(t.check_compatible(other), DataError);
  EXPECT_THROW(Transformer::from_json(nlohmann::json{{"format", "x"}}), DataError);
}

}  // namespace
}  // namespace impugan::data
