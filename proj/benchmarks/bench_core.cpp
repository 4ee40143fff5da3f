#include <random>

#include <benchmark/benchmark.h>

#include "ulfemi/acquisition.hpp"
#include "ulfemi/anc_post.hpp"
#include "ulfemi/cavity.hpp"
#include "ulfemi/coilgeom.hpp"
#include "ulfemi/fusion.hpp"
#include "ulfemi/pipeline.hpp"
#include "ulfemi/scenario.hpp"

using namespace ulfemi;

namespace {

CMatrix white(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = cx(g(rng), g(rng));
  return m;
}

void BM_BiotSavartPoint(benchmark::State &state) {
  ScenarioConfig const cfg = default_scenario(1);
  WindingPath const path = realize_coil(cfg.saddle, static_cast<int>(state.range(0)));
  Vec3 const p(0.02, 0.01, -0.03);
  for (auto _ : state) benchmark::DoNotOptimize(field_at(path, p));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(path.segments.size()));
}
BENCHMARK(BM_BiotSavartPoint)->Arg(64)->Arg(256);

void BM_FluxThroughSaddle(benchmark::State &state) {
  ScenarioConfig const cfg = default_scenario(1);
  auto const field = cavity_field_function(cfg.cavity, cfg.incidence);
  for (auto _ : state) benchmark::DoNotOptimize(flux_through(field, cfg.saddle, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_FluxThroughSaddle)->Arg(8)->Arg(24);

void BM_InjectEmi(benchmark::State &state) {
  ScenarioConfig const cfg = default_scenario(1);
  ChannelSet const ch = build_channels(cfg);
  EMITimeline const tl(cfg.interferers, cfg.sequence.duration(), 3);
  std::vector<KSpaceMatrix> clean;
  for (Channel const &c : ch.receive) {
    clean.push_back({CMatrix::Zero(cfg.sequence.n_phase, cfg.sequence.n_read), cfg.sequence.dwell, c.name});
  }
  for (auto _ : state) benchmark::DoNotOptimize(inject_emi(clean, tl, ch, cfg.sequence, 0));
}
BENCHMARK(BM_InjectEmi)->Unit(benchmark::kMillisecond);

void BM_PostProcess(benchmark::State &state) {
  KSpaceMatrix const rf{white(128, 128, 1), 40e-6, "rf"};
  std::vector<KSpaceMatrix> const refs{{white(128, 128, 2), 40e-6, "a"}, {white(128, 128, 3), 40e-6, "b"}};
  PostConfig cfg;
  cfg.bands = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(post_process(rf, refs, cfg));
}
BENCHMARK(BM_PostProcess)->Arg(1)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Fuse(benchmark::State &state) {
  std::vector<ReconImage> const imgs{{white(128, 128, 4), "a", {}}, {white(128, 128, 5), "b", {}}};
  for (auto _ : state) benchmark::DoNotOptimize(fuse(imgs, {1.0, 2.0}));
}
BENCHMARK(BM_Fuse);

} // namespace

BENCHMARK_MAIN();
