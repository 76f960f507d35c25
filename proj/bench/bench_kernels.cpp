// Serial reference vs OpenMP for each data-parallel kernel.

#include <benchmark/benchmark.h>

#include "tasign/protocol.hpp"
#include "tasign/train.hpp"

namespace {

using namespace tasign;

struct Fixture {
  std::vector<ManifestEntry> entries;
  TrainingCorpus corpus;
  std::vector<net::TrainingPair> pairs;
  net::ModelParams params = net::init_params(3);
  net::TrainConfig config;

  Fixture() {
    SynthConfig sc;
    sc.n_users = 6;
    sc.seed = 11;
    const auto sigs = synth_signatures(sc, &entries);
    corpus = TrainingCorpus::from_signatures(entries, sigs);
    config.max_len = 256;
    pairs = net::build_training_pairs(corpus, config).train;
    pairs.resize(16);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Exec::Serial : Exec::Parallel;
}

void BM_LocalCostMatrix(benchmark::State& state) {
  const auto& f = fixture();
  const auto& a = f.corpus.time_functions[0].channels;
  const auto& b = f.corpus.time_functions[1].channels;
  const auto channels = parse_channel_list("all");
  for (auto _ : state) {
    benchmark::DoNotOptimize(local_cost_matrix(a, b, channels, exec_of(state)));
  }
}
BENCHMARK(BM_LocalCostMatrix)->Arg(0)->Arg(1)->ArgName("parallel");

void BM_BatchGradient(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(net::batch_gradient(f.params, f.corpus, f.pairs, f.config, exec_of(state)));
  }
}
BENCHMARK(BM_BatchGradient)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_PairsLoss(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(net::pairs_loss(f.params, f.corpus, f.pairs, f.config, exec_of(state)));
  }
}
BENCHMARK(BM_PairsLoss)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_CorpusPreparation(benchmark::State& state) {
  SynthConfig sc;
  sc.n_users = 4;
  std::vector<ManifestEntry> entries;
  const auto sigs = synth_signatures(sc, &entries);
  for (auto _ : state) {
    std::vector<TimeFunctionSet> tfs(sigs.size());
    for_each_index(sigs.size(), exec_of(state),
                   [&](std::size_t i) { tfs[i] = prepare_time_functions(sigs[i]); });
    benchmark::DoNotOptimize(tfs);
  }
}
BENCHMARK(BM_CorpusPreparation)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
