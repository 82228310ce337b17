#include <random>

#include <benchmark/benchmark.h>

#include "impugan/data/gmm.hpp"
#include "impugan/data/transformer.hpp"
#include "impugan/eval/downstream.hpp"
#include "impugan/eval/metrics.hpp"
#include "impugan/gan/model.hpp"
#include "impugan/impute/imputer.hpp"
#include "impugan/missing/mask.hpp"
#include "impugan/platform.hpp"

namespace {

using namespace impugan;

// Two continuous and two discrete columns; the label depends on both.
data::Table make_table(std::size_t rows, std::uint64_t seed) {
  data::TableSchema s;
  s.columns = {{"a", data::ColumnKind::kContinuous, {}},
               {"b", data::ColumnKind::kContinuous, {}},
               {"c", data::ColumnKind::kDiscrete, {"p", "q", "r", "s"}},
               {"label", data::ColumnKind::kDiscrete, {"no", "yes"}}};
  data::Table t(s, rows);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  for (std::size_t r = 0; r < rows; ++r) {
    const int c = static_cast<int>(rng() % 4);
    const double a = (rng() % 2 ? 3.0 : -3.0) + n(rng);
    t.set(r, 0, a);
    t.set(r, 1, std::exp(0.5 * n(rng)) + c);
    t.set(r, 2, c);
    t.set(r, 3, a + c + n(rng) > 1.5 ? 1 : 0);
  }
  return t;
}

gan::TrainConfig small_config() {
  gan::TrainConfig c;
  c.epochs = 1;
  c.batch_size = 100;
  c.generator_hidden = {64, 64};
  c.critic_hidden = {64, 64};
  c.noise_dim = 32;
  c.modes = 5;
  c.seed = 1;
  return c;
}

std::vector<double> normals(std::size_t n, std::uint64_t seed, double shift) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(shift, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

void BM_GmmFit(benchmark::State& state) {
  const auto v = normals(static_cast<std::size_t>(state.range(0)), 1, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(data::fit_gmm(v, 10, 3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GmmFit)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_TransformerEncode(benchmark::State& state) {
  const auto t = make_table(static_cast<std::size_t>(state.range(0)), 2);
  const auto tr = data::Transformer::fit(t, {});
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(tr.transform(t, rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TransformerEncode)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_TrainOneEpoch(benchmark::State& state) {
  const auto t = make_table(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(gan::fit(t, small_config()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainOneEpoch)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_ImputeImpugan(benchmark::State& state) {
  const auto t = make_table(static_cast<std::size_t>(state.range(0)), 5);
  const auto model = gan::fit(t, small_config()).model;
  missing::MissingnessSpec spec;
  spec.rate = 0.3;
  spec.exempt = {"label"};
  const auto inc = missing::apply_mask(t, missing::generate_mask(t, spec)).incomplete;
  for (auto _ : state) benchmark::DoNotOptimize(impute::impute_impugan(model, inc, 9));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ImputeImpugan)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_GenerateMask(benchmark::State& state) {
  const auto t = make_table(static_cast<std::size_t>(state.range(0)), 6);
  missing::MissingnessSpec spec;
  spec.mechanism = static_cast<missing::Mechanism>(state.range(1));
  spec.rate = 0.3;
  spec.exempt = {"label"};
  for (auto _ : state) benchmark::DoNotOptimize(missing::generate_mask(t, spec));
}
BENCHMARK(BM_GenerateMask)->Args({10000, 0})->Args({10000, 1})->Args({10000, 2})->Unit(benchmark::kMicrosecond);

void BM_Ks(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = normals(n, 1, 0.0), q = normals(n, 2, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(eval::ks_statistic(p, q));
}
BENCHMARK(BM_Ks)->Arg(1000)->Arg(100000);

void BM_Emd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = normals(n, 1, 0.0), q = normals(n + 7, 2, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(eval::emd_1d(p, q));
}
BENCHMARK(BM_Emd)->Arg(1000)->Arg(100000);

void BM_Jsd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = normals(n, 1, 0.0), q = normals(n, 2, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(eval::jsd_continuous(p, q));
}
BENCHMARK(BM_Jsd)->Arg(1000)->Arg(100000);

void BM_MiDeviation(benchmark::State& state) {
  const auto real = make_table(static_cast<std::size_t>(state.range(0)), 7);
  const auto other = make_table(static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) benchmark::DoNotOptimize(eval::mi_deviation(real, other));
}
BENCHMARK(BM_MiDeviation)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_DownstreamMlp(benchmark::State& state) {
  const auto train = make_table(static_cast<std::size_t>(state.range(0)), 9);
  const auto test = make_table(1000, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval::downstream_accuracy(train, test, 3, eval::ClassifierKind::kMlp, 1));
  }
}
BENCHMARK(BM_DownstreamMlp)->Arg(3750)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  impugan::tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
