#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "nlftlink/fft.hpp"
#include "nlftlink/fiber_link.hpp"
#include "nlftlink/nlft_rx.hpp"
#include "nlftlink/signal_core.hpp"

using namespace nlftlink;

namespace {

ComplexEnvelope sech_block(std::size_t n, double fs, double p0, double t0) {
  const auto g = make_grid(n, fs);
  std::vector<cplx> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = std::sqrt(p0) / std::cosh((g.time(i) - 0.5 * g.duration()) / t0);
  return ComplexEnvelope(g, std::move(s));
}

void BM_Fft(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  std::vector<cplx> x(n, cplx(1.0, 0.5));
  for (auto _ : st) {
    fft_inplace(x);
    benchmark::DoNotOptimize(x.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_Fft)->RangeMultiplier(4)->Range(1 << 10, 1 << 18);

void BM_SsfmSpan(benchmark::State& st) {
  FiberParams fp;
  const auto e = sech_block(static_cast<std::size_t>(st.range(0)), 256e9, soliton_power(fp, 38e-12), 38e-12);
  for (auto _ : st) benchmark::DoNotOptimize(ssfm_span(e, fp, StepControl::adaptive(1e-3)));
}
BENCHMARK(BM_SsfmSpan)->Arg(1 << 12)->Arg(1 << 15)->Unit(benchmark::kMillisecond);

void BM_ZsScatter(benchmark::State& st) {
  NormalizedField f;
  f.q.resize(static_cast<std::size_t>(st.range(0)));
  f.dtau = 40.0 / static_cast<double>(f.q.size() - 1);
  f.tau_start = -20.0;
  for (std::size_t j = 0; j < f.q.size(); ++j) f.q[j] = 1.0 / std::cosh(f.tau(j));
  for (auto _ : st) benchmark::DoNotOptimize(zs_scatter(f, cplx(0.1, 0.5)));
}
BENCHMARK(BM_ZsScatter)->Arg(256)->Arg(2001);

void BM_FindEigenvalue(benchmark::State& st) {
  NormalizedField f;
  f.dtau = 0.02;
  f.tau_start = -20.0;
  f.q.resize(2001);
  for (std::size_t j = 0; j < f.q.size(); ++j) f.q[j] = 1.05 / std::cosh(f.tau(j));
  for (auto _ : st) benchmark::DoNotOptimize(find_eigenvalue(f));
}
BENCHMARK(BM_FindEigenvalue);

void BM_BlindPhaseSearch(benchmark::State& st) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> q(0, 3);
  std::normal_distribution<double> nz(0.0, 0.1);
  std::vector<cplx> s(static_cast<std::size_t>(st.range(0)));
  for (auto& v : s) v = std::polar(1.0, M_PI / 4 + q(rng) * M_PI / 2 + 0.2) + cplx(nz(rng), nz(rng));
  for (auto _ : st) benchmark::DoNotOptimize(blind_phase_search(s, 32, 65));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_BlindPhaseSearch)->Arg(1 << 12)->Arg(1 << 15);

}  // namespace
BENCHMARK_MAIN();
