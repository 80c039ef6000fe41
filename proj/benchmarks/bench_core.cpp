#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "wqed/dynamics.hpp"
#include "wqed/scattering.hpp"
#include "wqed/schmidt.hpp"
#include "wqed/timetag.hpp"

namespace {

using namespace wqed;

void BM_Propagate(benchmark::State& state) {
  const EmitterParams p;
  const auto pulse = PulseSpec::gaussian(0.34, 0.0, 1.0);
  const TimeGrid grid(-2.0, 3.0, static_cast<double>(state.range(0)) * 1e-4);
  const DriveField drive = build_drive(pulse, grid, p.gamma_total);
  for (auto _ : state) benchmark::DoNotOptimize(propagate(p, drive, SystemState::ground()));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(grid.steps()));
}
BENCHMARK(BM_Propagate)->Arg(10)->Arg(50);

void BM_G2Map(benchmark::State& state) {
  const EmitterParams p;
  const auto pulse = PulseSpec::gaussian(0.34, 0.0, 0.05);
  const auto window = default_window(p, pulse);
  const double d_t = window.length() / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(g2_map(p, pulse, ChannelPair::parse("tt"), window, d_t));
}
BENCHMARK(BM_G2Map)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Schmidt(benchmark::State& state) {
  CorrelationMap m;
  m.d_t = 0.02;
  m.values = Eigen::MatrixXd::Random(state.range(0), state.range(0)).cwiseAbs();
  for (auto _ : state) benchmark::DoNotOptimize(schmidt_decompose(m));
}
BENCHMARK(BM_Schmidt)->Arg(100)->Arg(250)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_MonteCarlo(benchmark::State& state) {
  CorrelationMap m;
  m.d_t = 0.02;
  m.kind = MapKind::counts;
  m.values = (50.0 * Eigen::MatrixXd::Random(250, 250).cwiseAbs()).array().round().matrix();
  MonteCarloOptions o;
  o.rebin_factor = 25;
  o.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(monte_carlo_tc(m, o));
}
BENCHMARK(BM_MonteCarlo)->Unit(benchmark::kMillisecond);

void BM_Ingest(benchmark::State& state) {
  AcquisitionConfig acq;
  acq.gate_width = 15.0;
  std::vector<TimeTagRecord> recs;
  const std::uint64_t rep = 30303;
  for (std::uint64_t k = 0; k < 100000; ++k) {
    recs.push_back({0, k * rep});
    if (k % 10 == 0) recs.push_back({1, k * rep + 1000 + k % 4000});
  }
  for (auto _ : state) {
    CoincidenceBuilder b(acq, {{ChannelPair::parse("tt"), PairSelection::subsequent_pulse}}, 0.02);
    Ingestor ing(acq, [&](const ClockedEvent& e) { b.add(e); });
    ing.feed(recs);
    ing.finish();
    benchmark::DoNotOptimize(b.finish(&ing.stats()));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(recs.size()));
}
BENCHMARK(BM_Ingest)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
