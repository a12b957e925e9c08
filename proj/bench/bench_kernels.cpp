// Chunked kernels (serial and OpenMP) against the explicit reference code.
#include "simplicits/reference.hpp"
#include "simplicits/scene.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace simplicits;

namespace {

SkinningField bench_net(int n) { return SkinningField::init(n, 9, 64, 7, Vec3(0.5, 0.1, 0.1), 0.6); }

OccupancyField bench_field() {
  GeometrySpec g;
  g.kind = GeometrySpec::Kind::beam;
  g.size = Vec3(1.0, 0.2, 0.2);
  return OccupancyField::build(g);
}

std::vector<Vec3> bench_points(std::size_t count) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> X;
  for (std::size_t i = 0; i < count; ++i) X.emplace_back(u(rng), 0.2 * u(rng), 0.2 * u(rng));
  return X;
}

struct SimFixture {
  ReducedSim sim;
  VectorX z;
  StepContext ctx;

  static SimFixture make(Exec exec) {
    const auto field = bench_field();
    const auto net = bench_net(8);
    SimConfig cfg;
    PinGroup pin;
    pin.lo = Vec3(-0.1, -0.1, -0.1);
    pin.hi = Vec3(0.05, 0.3, 0.3);
    cfg.pins = {pin};
    auto cub = build_cubature(field, net, 2000, 1, 20000, exec);
    ReducedSim sim(std::move(cub), cfg, field.bbox(), exec);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> d(0.0, 1e-3);
    VectorX z(sim.cubature().dofs());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = d(rng);
    StepContext ctx{VectorX::Zero(z.size()), 0.01, sim.config().kappa0};
    return {std::move(sim), z, ctx};
  }
};

void BM_forward_reference(benchmark::State& state) {
  const auto net = bench_net(10);
  const auto X = bench_points(std::size_t(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::forward(net, X));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <Exec E>
void BM_forward_batch(benchmark::State& state) {
  const auto net = bench_net(10);
  const auto X = bench_points(std::size_t(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(net.forward_batch(X, E));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_mass_reference(benchmark::State& state) {
  const auto f = SimFixture::make(Exec::parallel);
  for (auto _ : state) benchmark::DoNotOptimize(reference::mass_matrix(f.sim.cubature()));
}

template <Exec E>
void BM_mass(benchmark::State& state) {
  const auto f = SimFixture::make(Exec::parallel);
  for (auto _ : state) benchmark::DoNotOptimize(build_mass_matrix(f.sim.cubature(), E));
}

void BM_assemble_reference(benchmark::State& state) {
  const auto f = SimFixture::make(Exec::serial);
  for (auto _ : state) benchmark::DoNotOptimize(reference::assemble(f.sim, f.z, f.ctx));
}

template <Exec E>
void BM_assemble(benchmark::State& state) {
  const auto f = SimFixture::make(E);
  for (auto _ : state) benchmark::DoNotOptimize(f.sim.assemble(f.z, f.ctx, true, true));
}

} // namespace

BENCHMARK(BM_forward_reference)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_forward_batch<Exec::serial>)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_forward_batch<Exec::parallel>)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mass_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mass<Exec::serial>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mass<Exec::parallel>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assemble_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assemble<Exec::serial>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assemble<Exec::parallel>)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
