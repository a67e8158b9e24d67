#include <benchmark/benchmark.h>

#include "groundlab/agreement.hpp"
#include "groundlab/neural/crf.hpp"
#include "groundlab/neural/layers.hpp"
#include "groundlab/random.hpp"
#include "groundlab/scenario.hpp"

using namespace groundlab;

namespace {

nn::Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  nn::Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_CrfLogPartition(benchmark::State& state) {
  Rng rng(1);
  const auto em = random_matrix(static_cast<std::size_t>(state.range(0)), 3, rng);
  const auto tr = random_matrix(3, 3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::crf_log_partition(em, tr));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CrfLogPartition)->Arg(10)->Arg(30)->Arg(100);

void BM_CrfViterbi(benchmark::State& state) {
  Rng rng(2);
  const auto em = random_matrix(static_cast<std::size_t>(state.range(0)), 3, rng);
  const auto tr = random_matrix(3, 3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::crf_viterbi(em, tr));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CrfViterbi)->Arg(10)->Arg(30)->Arg(100);

void BM_GruStep(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  nn::ParamStore store(3);
  const auto gru = nn::GruParams::create(store, "gru", hidden, hidden);
  Rng rng(4);
  std::vector<double> x(hidden), h(hidden);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  for (auto& v : h) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    nn::Tape tape;
    auto out = nn::gru_cell(tape, gru, tape.constant(x), tape.constant(h));
    benchmark::DoNotOptimize(tape.value(out).data());
  }
}
BENCHMARK(BM_GruStep)->Arg(64)->Arg(256);

void BM_GruStepBackward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  nn::ParamStore store(3);
  const auto gru = nn::GruParams::create(store, "gru", hidden, hidden);
  std::vector<double> x(hidden, 0.1), h(hidden, -0.2);
  for (auto _ : state) {
    nn::Tape tape;
    auto out = nn::gru_cell(tape, gru, tape.constant(x), tape.constant(h));
    tape.backward(tape.sum(out));
  }
}
BENCHMARK(BM_GruStepBackward)->Arg(64)->Arg(256);

void BM_GenerateScenario(benchmark::State& state) {
  const ScenarioConfig config;
  Rng rng(5);
  const int k = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(generate_scenario(config, k, rng));
}
BENCHMARK(BM_GenerateScenario)->Arg(4)->Arg(5)->Arg(6);

void BM_FleissMultiPi(benchmark::State& state) {
  Rng rng(6);
  const auto items = static_cast<std::size_t>(state.range(0));
  std::vector<std::vector<int>> table(items, std::vector<int>(2));
  for (auto& row : table) {
    row[0] = static_cast<int>(rng.below(4));
    row[1] = 3 - row[0];
  }
  for (auto _ : state) benchmark::DoNotOptimize(fleiss_multi_pi(table));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FleissMultiPi)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
