// Copyright 2026 The qtraj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <benchmark/benchmark.h>
#include <omp.h>

#include "qtraj/bayesian.h"
#include "qtraj/sde.h"

namespace {

using namespace qtraj;

ModelParams bench_model() {
  ModelParams p;
  p.g = 0.009547;
  p.dt = 0.5;
  p.T1 = 45.0;
  p.x0 = 0.305;
  p.n_steps = 80;
  return p;
}

// Arg: OpenMP thread count (0 selects the serial reference). Wall time is
// reported because CPU time only counts the calling thread.
void BM_Simulate(benchmark::State& state) {
  const auto threads = static_cast<int>(state.range(0));
  const std::uint64_t n = 20000;
  if (threads > 0) omp_set_num_threads(threads);
  for (auto _ : state) {
    auto e = threads == 0 ? simulate_ensemble_serial(bench_model(), n, SeedSpec{1})
                          : simulate_ensemble(bench_model(), n, SeedSpec{1});
    benchmark::DoNotOptimize(e.values.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * bench_model().n_steps));
}
BENCHMARK(BM_Simulate)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  const auto threads = static_cast<int>(state.range(0));
  CalibrationParams cal;
  cal.I0 = 128.443;
  cal.I1 = 127.856;
  cal.sigma = 5.56;
  cal.dt = 0.5;
  cal.T1 = 45.0;
  auto p = bench_model();
  p.g = cal.kappa() / cal.dt;
  const auto records = generate_records(p, cal, 20000, SeedSpec{2}).records;
  if (threads > 0) omp_set_num_threads(threads);
  for (auto _ : state) {
    auto e = threads == 0 ? reconstruct_ensemble_serial(records, cal, p.x0) : reconstruct_ensemble(records);
    benchmark::DoNotOptimize(e.values.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(records.currents.size()));
}
BENCHMARK(BM_Reconstruct)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_Histogram(benchmark::State& state) {
  const auto threads = static_cast<int>(state.range(0));
  auto p = bench_model();
  p.n_steps = 1;
  const auto e = simulate_ensemble(p, 1000000, SeedSpec{3});
  if (threads > 0) omp_set_num_threads(threads);
  for (auto _ : state) {
    auto h = threads == 0 ? build_histogram_serial(e, 1) : build_histogram(e, 1);
    benchmark::DoNotOptimize(h.density.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(e.n_traj));
}
BENCHMARK(BM_Histogram)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
