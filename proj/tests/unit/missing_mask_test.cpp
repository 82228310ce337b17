#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "impugan/error.hpp"
#include "impugan/missing/mask.hpp"
#include "impugan/rng.hpp"

namespace impugan::missing {
namespace {

using data::ColumnKind;

// `cols` continuous columns c0..c{cols-1} plus an optional binary "z_driver".
Table gaussian_table(std::size_t rows, std::size_t cols, bool with_driver, std::uint64_t seed) {
  data::TableSchema s;
  for (std::size_t c = 0; c < cols; ++c) s.columns.push_back({"c" + std::to_string(c), ColumnKind::kContinuous, {}});
  if (with_driver) s.columns.push_back({"z_driver", ColumnKind::kDiscrete, {"no", "yes"}});
  Table t(s, rows);
  Rng rng(seed);
  std::normal_distribution<double> normal;
  for (std::size_t r = 0; r < rows; ++r) {
    const int z = uniform01(rng) < 0.5 ? 1 : 0;
    for (std::size_t c = 0; c < cols; ++c) t.set(r, c, 2.0 * z + normal(rng));
    if (with_driver) t.set(r, cols, z);
  }
  return t;
}

double missing_fraction(const MaskMatrix& m, const std::vector<std::size_t>& cols) {
  std::size_t miss = 0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c : cols) miss += m.observed(r, c) ? 0 : 1;
  }
  return static_cast<double>(miss) / static_cast<double>(m.rows() * cols.size());
}

std::vector<std::size_t> first(std::size_t k) {
  std::vector<std::size_t> v(k);
  for (std::size_t i = 0; i < k; ++i) v[i] = i;
  return v;
}

TEST(MaskTest, VanishingRateKeepsEverything) {
  const Table t = gaussian_table(100, 5, false, 1);
  const MaskMatrix m = generate_mask(t, {.mechanism = Mechanism::kMcar, .rate = 1e-12, .seed = 3});
  EXPECT_EQ(m.missing_count(), 0u);
}

TEST(MaskTest, McarFractionWithinBinomialBand) {
  const Table t = gaussian_table(1000, 10, false, 2);
  const MaskMatrix m = generate_mask(t, {.mechanism = Mechanism::kMcar, .rate = 0.3, .seed = 4});
  EXPECT_NEAR(missing_fraction(m, first(10)), 0.3, 0.015);
}

struct RateCase {
  Mechanism mechanism;
  double rate;
  double tolerance;
};

class MarginalRateTest : public ::testing::TestWithParam<RateCase> {};

TEST_P(MarginalRateTest, EmpiricalFractionMatchesRequestedRate) {
  const RateCase rc = GetParam();
  const Table t = gaussian_table(1000, 10, true, 5);
  MissingnessSpec spec{.mechanism = rc.mechanism, .rate = rc.rate, .seed = 6};
  spec.exempt = {"z_driver"};
  const MaskMatrix m = generate_mask(t, spec);
  EXPECT_NEAR(missing_fraction(m, first(10)), rc.rate, rc.tolerance);
  for (std::size_t r = 0; r < m.rows(); ++r) EXPECT_TRUE(m.observed(r, 10));
}

INSTANTIATE_TEST_SUITE_P(
    Mechanisms, MarginalRateTest,
    ::testing::Values(RateCase{Mechanism::kMcar, 0.1, 0.02}, RateCase{Mechanism::kMcar, 0.5, 0.02},
                      RateCase{Mechanism::kMar, 0.1, 0.02}, RateCase{Mechanism::kMar, 0.3, 0.02},
                      RateCase{Mechanism::kMar, 0.5, 0.02}, RateCase{Mechanism::kMnar, 0.1, 0.05},
                      RateCase{Mechanism::kMnar, 0.3, 0.05}, RateCase{Mechanism::kMnar, 0.5, 0.05}));

TEST(MaskTest, MnarCensorsAboveTheMedian) {
  data::TableSchema s;
  s.columns = {{"v", ColumnKind::kContinuous, {}}, {"id", ColumnKind::kContinuous, {}}};
  Table t(s, 100);
  for (std::size_t r = 0; r < 100; ++r) {
    t.set(r, 0, static_cast<double>(r + 1));
    t.set(r, 1, 0.0);
  }
  MissingnessSpec spec{.mechanism = Mechanism::kMnar, .rate = 0.5, .seed = 1};
  spec.exempt = {"id"};
  const MaskMatrix m = generate_mask(t, spec);
  EXPECT_GT(m.missing_count(), 0u);
  for (std::size_t r = 0; r < 100; ++r) {
    if (!m.observed(r, 0)) EXPECT_GT(t.at(r, 0), 50.0);
  }
}

TEST(MaskTest, SameSpecSameMask) {
  const Table t = gaussian_table(200, 4, true, 9);
  for (Mechanism mech : {Mechanism::kMcar, Mechanism::kMar, Mechanism::kMnar}) {
    MissingnessSpec spec{.mechanism = mech, .rate = 0.3, .seed = 77};
    EXPECT_EQ(generate_mask(t, spec), generate_mask(t, spec));
    MissingnessSpec other = spec;
    other.seed = 78;
    EXPECT_FALSE(generate_mask(t, spec) == generate_mask(t, other));
  }
}

TEST(MaskTest, InvalidSpecsAreRejected) {
  const Table t = gaussian_table(10, 2, false, 1);
  EXPECT_THROW(generate_mask(t, {.rate = 0.0}), ConfigError);
  EXPECT_THROW(generate_mask(t, {.rate = 1.0}), ConfigError);
  MissingnessSpec bad{.mechanism = Mechanism::kMar, .rate = 0.2};
  bad.drivers = {{"c0", "nope"}};
  EXPECT_THROW(generate_mask(t, bad), ConfigError);
  EXPECT_THROW(parse_mechanism("MCARX"), ConfigError);
}

TEST(MaskTest, MarDriversFollowNamesCyclically) {
  data::TableSchema s;
  for (const char* name : {"b", "d", "a", "c", "e"}) s.columns.push_back({name, ColumnKind::kContinuous, {}});
  MissingnessSpec spec{.mechanism = Mechanism::kMar};
  spec.exempt = {"b", "d"};
  const auto drivers = mar_drivers(s, spec);
  EXPECT_EQ(drivers.at(2), 0u);  // a -> b
  EXPECT_EQ(drivers.at(3), 1u);  // c -> d
  EXPECT_EQ(drivers.at(4), 0u);  // e -> b (wraps)
  EXPECT_FALSE(drivers.contains(0));

  MissingnessSpec none{.mechanism = Mechanism::kMar};
  const auto fallback = mar_drivers(s, none);
  EXPECT_FALSE(fallback.contains(2));  // "a" becomes the driver
  EXPECT_EQ(fallback.at(0), 2u);
}

// Within each driver stratum the mask must not depend on the masked value.
double stratified_gap(const Table& t, const MaskMatrix& m, std::size_t col, std::size_t driver) {
  double gap = 0;
  for (int z = 0; z < 2; ++z) {
    double sm = 0, so = 0;
    int nm = 0, no = 0;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      if (t.at(r, driver) != z) continue;
      if (m.observed(r, col)) {
        so += t.at(r, col);
        ++no;
      } else {
        sm += t.at(r, col);
        ++nm;
      }
    }
    if (nm && no) gap += std::abs(sm / nm - so / no);
  }
  return gap;
}

double permutation_p_value(const Table& t, const MaskMatrix& m, std::size_t col, std::size_t driver) {
  const double observed = stratified_gap(t, m, col, driver);
  Rng rng(123);
  int extreme = 0;
  const int rounds = 300;
  for (int k = 0; k < rounds; ++k) {
    MaskMatrix shuffled = m;
    for (int z = 0; z < 2; ++z) {
      std::vector<std::size_t> rows;
      for (std::size_t r = 0; r < t.rows(); ++r) {
        if (t.at(r, driver) == z) rows.push_back(r);
      }
      std::vector<bool> bits;
      for (std::size_t r : rows) bits.push_back(m.observed(r, col));
      std::shuffle(bits.begin(), bits.end(), rng);
      for (std::size_t i = 0; i < rows.size(); ++i) shuffled.set(rows[i], col, bits[i]);
    }
    if (stratified_gap(t, shuffled, col, driver) >= observed) ++extreme;
  }
  return (extreme + 1.0) / (rounds + 1.0);
}

TEST(MaskTest, MarIsIndependentOfMaskedValuesGivenDriver) {
  const Table t = gaussian_table(2000, 1, true, 31);
  MissingnessSpec spec{.mechanism = Mechanism::kMar, .rate = 0.3, .seed = 8};
  spec.exempt = {"z_driver"};
  const MaskMatrix mar = generate_mask(t, spec);
  EXPECT_GT(permutation_p_value(t, mar, 0, 1), 0.01);

  // The same test detects self-censoring.
  spec.mechanism = Mechanism::kMnar;
  EXPECT_LT(permutation_p_value(t, generate_mask(t, spec), 0, 1), 0.01);
}

TEST(MaskTest, EveryRowKeepsAnObservedCell) {
  const Table t = gaussian_table(500, 2, false, 3);
  const MaskMatrix m = generate_mask(t, {.mechanism = Mechanism::kMcar, .rate = 0.95, .seed = 2});
  for (std::size_t r = 0; r < m.rows(); ++r) EXPECT_TRUE(m.observed(r, 0) || m.observed(r, 1)) << r;
}

TEST(ApplyMaskTest, AllOnesLeavesTableUnchanged) {
  const Table t = gaussian_table(20, 3, true, 4);
  const IncompleteTable inc = apply_mask(t, MaskMatrix(20, 4));
  EXPECT_TRUE(inc.incomplete.identical(t));
}

TEST(ApplyMaskTest, SingleZeroMasksExactlyThatCell) {
  const Table t = gaussian_table(20, 3, true, 4);
  MaskMatrix m(20, 4);
  m.set(7, 2, false);
  const IncompleteTable inc = apply_mask(t, m);
  EXPECT_EQ(inc.incomplete.mask().missing_count(), 1u);
  EXPECT_TRUE(inc.incomplete.missing(7, 2));
  EXPECT_TRUE(inc.evaluated(7, 2));
  EXPECT_EQ(inc.ground_truth(7, 2), t.at(7, 2));
}

TEST(ApplyMaskTest, GroundTruthHoldsEveryMaskedValue) {
  const Table t = gaussian_table(300, 5, false, 6);
  const MaskMatrix m = generate_mask(t, {.rate = 0.4, .seed = 1});
  const IncompleteTable inc = apply_mask(t, m);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      if (!m.observed(r, c)) {
        ASSERT_TRUE(inc.incomplete.missing(r, c));
        EXPECT_EQ(inc.ground_truth(r, c), t.at(r, c));
      } else {
        EXPECT_EQ(inc.incomplete.at(r, c), t.at(r, c));
      }
    }
  }
  EXPECT_THROW(apply_mask(t, MaskMatrix(3, 5)), ShapeError);
}

TEST(MaskCsvTest, RoundTripReproducesTheMaskedTable) {
  const Table t = gaussian_table(50, 3, true, 2);
  const MaskMatrix m = generate_mask(t, {.rate = 0.3, .seed = 5});
  const auto path = std::filesystem::temp_directory_path() / "impugan_mask_roundtrip.csv";
  write_mask_csv(path, m, t.schema());
  const MaskMatrix back = read_mask_csv(path, t.schema());
  std::filesystem::remove(path);
  EXPECT_EQ(back, m);
  EXPECT_TRUE(apply_mask(t, back).incomplete.identical(apply_mask(t, m).incomplete));
}

}  // namespace
}  // namespace impugan::missing
