// OpenMP kernels against their single-threaded references.
// Thread count follows OMP_NUM_THREADS.

#include "drg/cloud.hpp"
#include "drg/distance_matrix.hpp"
#include "drg/losses.hpp"
#include "drg/mesh.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

namespace {

drg::Points random_points(Eigen::Index n, std::uint64_t seed, double half = 0.1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half, half);
  drg::Points p(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) p.row(i) = Eigen::RowVector3d(u(rng), u(rng), u(rng));
  return p;
}

void threads_counter(benchmark::State& state) {
  state.counters["threads"] = static_cast<double>(omp_get_max_threads());
}

void BM_compute_dro(benchmark::State& state) {
  const auto n = state.range(0);
  const auto r = random_points(n, 1), o = random_points(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(drg::compute_dro(r, o));
  threads_counter(state);
}

void BM_compute_dro_reference(benchmark::State& state) {
  const auto n = state.range(0);
  const auto r = random_points(n, 1), o = random_points(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(drg::reference::compute_dro(r, o));
}

void BM_recover_cloud(benchmark::State& state) {
  const auto n = state.range(0);
  const auto r = random_points(n, 3), o = random_points(n, 4, 0.05);
  const auto d = drg::compute_dro(r, o);
  for (auto _ : state) benchmark::DoNotOptimize(drg::recover_cloud(d, o));
  threads_counter(state);
}

void BM_recover_cloud_reference(benchmark::State& state) {
  const auto n = state.range(0);
  const auto r = random_points(n, 3), o = random_points(n, 4, 0.05);
  const auto d = drg::compute_dro(r, o);
  for (auto _ : state) benchmark::DoNotOptimize(drg::reference::recover_cloud(d, o));
}

void BM_fps(benchmark::State& state) {
  const auto p = random_points(state.range(0), 5);
  for (auto _ : state) benchmark::DoNotOptimize(drg::farthest_point_sampling(p, 512, {0}));
  threads_counter(state);
}

void BM_fps_reference(benchmark::State& state) {
  const auto p = random_points(state.range(0), 5);
  for (auto _ : state) benchmark::DoNotOptimize(drg::reference::farthest_point_sampling(p, 512, {0}));
}

void BM_penetration(benchmark::State& state) {
  const auto mesh = drg::make_icosphere(0.08, 3);
  const auto p = random_points(state.range(0), 6);
  for (auto _ : state) benchmark::DoNotOptimize(drg::penetration_loss(p, mesh));
  threads_counter(state);
}

void BM_penetration_reference(benchmark::State& state) {
  const auto mesh = drg::make_icosphere(0.08, 3);
  const auto p = random_points(state.range(0), 6);
  for (auto _ : state) benchmark::DoNotOptimize(drg::reference::penetration_loss(p, mesh));
}

}  // namespace

BENCHMARK(BM_compute_dro)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_compute_dro_reference)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_recover_cloud)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_recover_cloud_reference)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fps)->Arg(4096)->Arg(16384)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fps_reference)->Arg(4096)->Arg(16384)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_penetration)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_penetration_reference)->Arg(512)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
