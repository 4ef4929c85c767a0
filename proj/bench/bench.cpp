// Serial reference path (threads = 1) against the OpenMP path for the
// parallel kernels. Arg = thread count.

#include <benchmark/benchmark.h>

#include <array>
#include <omp.h>

#include "mfcal/data.hpp"
#include "mfcal/netcore.hpp"
#include "mfcal/optimize.hpp"
#include "mfcal/presets.hpp"
#include "mfcal/problems.hpp"
#include "mfcal/transfer.hpp"

using namespace mfcal;

namespace {

void thread_args(benchmark::internal::Benchmark* b) {
  for (int t : {1, 2, 4}) b->Arg(t);
  if (const int n = omp_get_max_threads(); n > 4) b->Arg(n);
  b->UseRealTime();
  b->Unit(benchmark::kMillisecond);
}

void BM_predict_rows(benchmark::State& state) {
  const auto net = net::init_network(presets::campaign_architecture(), 3);
  const net::Matrix x = data::latin_hypercube(20000, 9, 4);
  for (auto _ : state) benchmark::DoNotOptimize(net::predict_rows(net, x, static_cast<int>(state.range(0))));
  state.SetItemsProcessed(state.iterations() * x.rows());
}
BENCHMARK(BM_predict_rows)->Apply(thread_args);

void BM_run_cascade(benchmark::State& state) {
  const auto l = problems::generate_taylor_datasets(100, 50, 25, 1);
  auto plan = presets::taylor_plan(l.low, {l.high, l.experiment});
  plan.base_stage.config.epochs = 60;
  for (auto& s : plan.calibration_stages) s.config.epochs = 30;
  for (auto _ : state)
    benchmark::DoNotOptimize(transfer::run_cascade(plan, 8, {1, static_cast<int>(state.range(0))}).ensemble.size());
}
BENCHMARK(BM_run_cascade)->Apply(thread_args);

void BM_member_predictions(benchmark::State& state) {
  problems::SyntheticCampaignSpec spec;
  spec.seed = 1;
  const auto l = problems::generate_campaign(spec, 400, 10, 5);
  auto plan = presets::campaign_plan(l.low, {});
  plan.base_stage.config.epochs = 2;
  plan.base_stage.config.batch_size = 64;
  const auto ens = transfer::run_cascade(plan, 8, {1, 1}).ensemble;
  for (auto _ : state)
    benchmark::DoNotOptimize(transfer::member_predictions(ens, l.low.inputs, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_member_predictions)->Apply(thread_args);

}  // namespace

BENCHMARK_MAIN();
