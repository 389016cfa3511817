// Microbenchmarks for the per-sample and per-cycle hot paths.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "edgesync/bho.hpp"
#include "edgesync/filter.hpp"
#include "edgesync/modelkit.hpp"
#include "edgesync/proto.hpp"
#include "edgesync/urgency.hpp"

namespace {

using namespace edgesync;

std::vector<CacheEntry> make_cache(std::size_t n, std::size_t classes) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CacheEntry> cache;
  cache.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> p(classes);
    for (auto& x : p) x = u(rng) + 1e-9;
    cache.push_back({Sample{"e", i, 25.0 * u(rng), {0.0}, 0}, validate_probs(p)});
  }
  return cache;
}

void BM_SelectTop(benchmark::State& state) {
  const auto cache = make_cache(static_cast<std::size_t>(state.range(0)), 6);
  const FilterConfig cfg(1.0, 1.0, 0.7, 25.0);
  for (auto _ : state) benchmark::DoNotOptimize(select_top(cache, cfg, 25.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SelectTop)->Arg(50)->Arg(500)->Arg(5000);

void BM_BankUrgency(benchmark::State& state) {
  const UrgencyConfig cfg;
  EdgeBank bank("e", cfg.capacity());
  for (std::size_t i = 0; i < cfg.capacity(); ++i) bank.record(i % 3 != 0, i);
  for (auto _ : state) benchmark::DoNotOptimize(bank_urgency(bank, cfg));
}
BENCHMARK(BM_BankUrgency);

void BM_GpPredict(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<bho::Observation> obs;
  for (int i = 0; i < state.range(0); ++i) obs.push_back({{u(rng), u(rng), u(rng)}, u(rng)});
  const bho::GaussianProcess gp(obs, bho::GaussianProcess::Kernel{}, 0.0);
  const std::vector<double> q{0.4, 0.5, 0.6};
  for (auto _ : state) benchmark::DoNotOptimize(gp.predict(q));
}
BENCHMARK(BM_GpPredict)->Arg(5)->Arg(25);

proto::Message make_update(std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 0.001 * static_cast<double>(i);
  return proto::ModelUpdate{"edge-0", 3, std::move(v)};
}

void BM_EncodeUpdate(benchmark::State& state) {
  const auto msg = make_update(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(proto::encode(msg));
  state.SetBytesProcessed(state.iterations() * state.range(0) * 8);
}
BENCHMARK(BM_EncodeUpdate)->Arg(198)->Arg(100000);

void BM_DecodeUpdate(benchmark::State& state) {
  const auto bytes = proto::encode(make_update(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(proto::decode(bytes));
  state.SetBytesProcessed(state.iterations() * state.range(0) * 8);
}
BENCHMARK(BM_DecodeUpdate)->Arg(198)->Arg(100000);

void BM_StudentEpoch(benchmark::State& state) {
  const ModelDims dims{16, 32, 6};
  StudentModel model(make_initial_params(dims, 1), 1);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<LabeledSample> data(static_cast<std::size_t>(state.range(0)));
  for (auto& s : data) {
    s.features.resize(dims.feature_dim);
    for (auto& x : s.features) x = g(rng);
    s.label = static_cast<std::uint32_t>(rng() % dims.class_count);
  }
  const HyperParams h{0.05, 0.9, 1e-4};
  model.begin_session();
  for (auto _ : state) benchmark::DoNotOptimize(model.train_epoch(data, h));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_StudentEpoch)->Arg(80)->Arg(1600);

void BM_Infer(benchmark::State& state) {
  const ModelDims dims{16, 32, 6};
  const StudentModel model(make_initial_params(dims, 1), 1);
  const std::vector<double> x(dims.feature_dim, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(x));
}
BENCHMARK(BM_Infer);

}  // namespace

BENCHMARK_MAIN();
