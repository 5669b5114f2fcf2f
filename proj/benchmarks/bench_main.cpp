#include <benchmark/benchmark.h>

#include <random>

#include "tdae/effective.hpp"
#include "tdae/elimination.hpp"
#include "tdae/models.hpp"
#include "tdae/propagator.hpp"

using namespace tdae;

namespace {

AtomConstants toy_atom() {
  return parse_atom_preset(R"({"label": "toy", "mass_kg": 5.272859085e-35,
                               "levels": {"g": 0.0, "e": 50.0, "a": 1000.0}})");
}

SystemSpec toy_raman(double a0) {
  ComOptions c;
  c.k_ref = 1.0;
  c.window_kicks = 4;
  LaserSpec l1, l2;
  l1.lower = "e";
  l2.lower = "g";
  l1.upper = l2.upper = "a";
  l1.omega = 550.0;
  l2.omega = 604.0;
  l1.k = 1.0;
  l2.k = -1.0;
  l1.envelope = l2.envelope = PulseShape::sine_squared(a0, 0.0, 10.0);
  return raman_system(toy_atom(), l1, l2, c);
}

StateVector ground_families(const SystemSpec& s, const std::shared_ptr<const LadderBasis>& B, std::size_t n) {
  std::vector<double> p;
  for (std::size_t i = 0; i < n; ++i) p.push_back(-0.5 + static_cast<double>(i) / static_cast<double>(n));
  StateVector psi(B, p);
  for (std::size_t f = 0; f < n; ++f) psi.set(f, {s.space.index("g"), 0}, 1.0 / std::sqrt(static_cast<double>(n)));
  return psi;
}

}  // namespace

static void BM_ApplyFullHamiltonian(benchmark::State& state) {
  const SystemSpec s = toy_raman(20.0);
  const BlockOperator H = full_hamiltonian(s);
  auto B = full_basis(s, s.seeds("g"));
  const StateVector psi = ground_families(s, B, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(apply(H, 3.7, psi, s.ladder, 0.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ApplyFullHamiltonian)->Arg(1)->Arg(64)->Arg(512);

static void BM_SClosed(benchmark::State& state) {
  const auto p = PulseShape::blackman(2.0, 1.0, 0.16, 0.0, 5.0);
  double t = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(s_closed(p, p, 250.0, 0.0, t));
    t = t < 4.9 ? t + 0.01 : 0.1;
  }
}
BENCHMARK(BM_SClosed);

static void BM_SQuadrature(benchmark::State& state) {
  const auto p = PulseShape::blackman(2.0, 1.0, 0.16, 0.0, 5.0);
  double t = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(s_quadrature(p, p, 250.0, 0.0, t, 1e-12));
    t = t < 4.9 ? t + 0.01 : 0.1;
  }
}
BENCHMARK(BM_SQuadrature);

static void BM_EffectiveFamilies(benchmark::State& state) {
  const SystemSpec s = toy_raman(20.0);
  const EffectiveHamiltonian eff = effective_hamiltonian(s);
  auto B = std::make_shared<const LadderBasis>(reachable_basis(eff.block, s.seeds("g"), s.ladder.n_min, s.ladder.n_max));
  const StateVector psi = ground_families(s, B, static_cast<std::size_t>(state.range(0)));
  std::vector<double> times{10.0};
  IntegratorConfig cfg;
  cfg.threads = static_cast<unsigned>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(evolve(eff.block, psi, s.ladder, 0.0, times, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EffectiveFamilies)->Args({64, 1})->Args({64, 4})->UseRealTime()->Unit(benchmark::kMillisecond);

static void BM_FullFamilyEvolve(benchmark::State& state) {
  const SystemSpec s = toy_raman(20.0);
  const BlockOperator H = full_hamiltonian(s);
  auto B = full_basis(s, s.seeds("g"));
  const StateVector psi = ground_families(s, B, 1);
  std::vector<double> times{10.0};
  IntegratorConfig cfg;
  cfg.max_step = 0.002;
  for (auto _ : state) benchmark::DoNotOptimize(evolve(H, psi, s.ladder, 0.0, times, cfg));
}
BENCHMARK(BM_FullFamilyEvolve)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
