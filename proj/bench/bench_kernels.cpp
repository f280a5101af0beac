#include <benchmark/benchmark.h>

#include "wqed/fdtd.hpp"

using namespace wqed;

namespace {

SystemSpec pair_system() {
  return make_feedback_system({{2 * kPi, 1.0, 0.5}, {2 * kPi, 1.0, 1.0}});
}

void BM_OverlapsSerial(benchmark::State& st) {
  auto sys = pair_system();
  auto bs = find_bound_states(sys).states;
  for (auto _ : st) benchmark::DoNotOptimize(overlaps_serial(sys, bs, static_cast<int>(st.range(0))));
}
BENCHMARK(BM_OverlapsSerial)->Arg(4001)->Unit(benchmark::kMillisecond);

void BM_OverlapsParallel(benchmark::State& st) {
  auto sys = pair_system();
  auto bs = find_bound_states(sys).states;
  for (auto _ : st) benchmark::DoNotOptimize(overlaps(sys, bs, static_cast<int>(st.range(0))));
}
BENCHMARK(BM_OverlapsParallel)->Arg(4001)->Unit(benchmark::kMillisecond);

void BM_TMatrix(benchmark::State& st) {
  auto sys = pair_system();
  Scatterer sc(overlaps(sys, find_bound_states(sys).states));
  double Om = 4 * kPi + 0.5;
  for (auto _ : st) {
    benchmark::DoNotOptimize(sc.t_matrix(Om));
    Om += 1e-3;
  }
}
BENCHMARK(BM_TMatrix)->Unit(benchmark::kMicrosecond);

void BM_FdtdStep(benchmark::State& st) {
  auto sys = pair_system();
  Lattice lat;
  lat.h = 0.01;
  lat.x_min = -static_cast<double>(st.range(0)) * lat.h;
  lat.x_max = 2.0;
  auto s = zero_state(sys, lat);
  s.psi1[0][lat.index(-2.0)] = 1.0;
  for (auto _ : st) {
    if (s.step > 300) {
      st.PauseTiming();
      s = zero_state(sys, lat);
      s.psi1[0][lat.index(-2.0)] = 1.0;
      st.ResumeTiming();
    }
    benchmark::DoNotOptimize(step(s, sys));
  }
  st.SetItemsProcessed(st.iterations() * lat.size());
}
BENCHMARK(BM_FdtdStep)->Arg(2000)->Arg(8000)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
