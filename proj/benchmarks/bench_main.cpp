#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "softorgan/dynamics.hpp"
#include "softorgan/synth.hpp"
#include "softorgan/training.hpp"
#include "softorgan/tuner.hpp"

namespace softorgan {
namespace {

Lattice driven_organ(int resolution) {
  const auto mesh = synth::organ();
  const auto grid = voxelize(mesh, resolution);
  auto lat = build_lattice(grid, assign_regions(grid, RegionSpec{}).regions, Material{});
  lat.regions[0].actuation.harmonics = {{0.1, 1.0, 0.0}};
  return lat;
}

void BM_Step(benchmark::State& st) {
  SimState s;
  s.lattice = driven_organ(static_cast<int>(st.range(0)));
  const SimConfig cfg;
  const auto rest = region_actuation(cfg.rest_clamp_epsilon);
  for (auto _ : st) step(s, cfg, rest);
  st.counters["particles"] = static_cast<double>(s.lattice.particles.size());
  st.counters["constraints"] = static_cast<double>(s.lattice.constraints.size());
  st.counters["steps_per_sec"] = benchmark::Counter(static_cast<double>(st.iterations()),
                                                    benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Step)->Arg(4)->Arg(8)->Arg(16)->Arg(32);

void BM_Voxelize(benchmark::State& st) {
  const auto mesh = synth::organ();
  const int res = static_cast<int>(st.range(0));
  for (auto _ : st) {
    const auto grid = voxelize(mesh, res);
    benchmark::DoNotOptimize(
        build_lattice(grid, assign_regions(grid, RegionSpec{}).regions, Material{}));
  }
}
BENCHMARK(BM_Voxelize)->Arg(8)->Arg(16)->Arg(32);

void BM_BindSkin(benchmark::State& st) {
  const auto mesh = synth::organ();
  const auto lat = driven_organ(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(bind_skin(mesh, lat));
}
BENCHMARK(BM_BindSkin)->Arg(8)->Arg(16);

void BM_FitSignal(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / 240.0;
    x[i] = 0.1 * std::sin(2.0 * std::numbers::pi * t) + 0.02 * std::sin(6.0 * std::numbers::pi * t);
  }
  for (auto _ : st) benchmark::DoNotOptimize(fit_signal(x, 240.0, 2));
}
BENCHMARK(BM_FitSignal)->Arg(240)->Arg(480)->Arg(960);

void BM_Objective(benchmark::State& st) {
  const auto mesh = synth::subdivided_box(Vec3::Zero(), Vec3::Ones(), 4);
  const auto grid = voxelize(mesh, 4);
  const auto lat = build_lattice(grid, assign_regions(grid, RegionSpec{}).regions, Material{});
  auto truth = lat;
  truth.regions[0].actuation.harmonics = {{0.1, 1.0, 0.3}};
  SimConfig cfg;
  cfg.substeps = 4;
  const auto track = synth::simulated_track(mesh, truth, cfg, 30.0, 3.0, 30);
  const auto scene = make_training_scene(mesh, lat, track);
  const RegionParams p{ActuationSignal{{{0.08, 1.0, 0.0}}}};
  for (auto _ : st) benchmark::DoNotOptimize(objective(p, scene, cfg, 2.0));
}
BENCHMARK(BM_Objective)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace softorgan

BENCHMARK_MAIN();
