#include <benchmark/benchmark.h>

#include <random>

#include "windstr/cosim.hpp"
#include "windstr/fdne.hpp"
#include "windstr/network.hpp"
#include "windstr/rls.hpp"

using namespace windstr;

namespace {

// Small synthetic ladder network: machine at one end, loads along the chain.
NetworkModel ladder_net(int n_bus) {
  NetworkModel m;
  m.name = "bench";
  for (int i = 1; i <= n_bus; ++i) m.buses.push_back({i, "b" + std::to_string(i), "study"});
  for (int i = 1; i < n_bus; ++i) m.branches.push_back({i, i + 1, 0.002, 0.02, 0.01});
  for (int i = 2; i <= n_bus; ++i) m.shunts.push_back({i, 0.3, 0.05});
  Machine g;
  g.name = "g1";
  g.bus = 1;
  g.h = 50.0;
  g.d = 1.0;
  g.xdp = 0.0333;
  g.rating_mva = 900.0;
  g.e_mag = 1.05;
  g.pm = 2.0;
  m.machines.push_back(g);
  return m;
}

Scenario bench_scenario() {
  Scenario sc;
  sc.name = "bench";
  sc.network = ladder_net(6);
  TurbineSpec t;
  t.name = "wtg";
  t.bus = 6;
  t.meas_bus = 5;
  t.x_line = 0.02;
  t.count = 20;
  t.wind.base = {{0.0, 11.0}};
  sc.turbines.push_back(t);
  sc.t_end = 1.0;
  return sc;
}

void BM_RlsUpdate(benchmark::State& state) {
  RlsIdentifier<double>::Config cfg;
  RlsIdentifier<double> rls(cfg);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double y = 0.0;
  for (auto _ : state) {
    const double x = u(rng);
    y = 0.6 * y + 0.3 * x;
    benchmark::DoNotOptimize(rls.update(x, y));
  }
}
BENCHMARK(BM_RlsUpdate);

void BM_NetworkSolve(benchmark::State& state) {
  const NetworkModel m = ladder_net(static_cast<int>(state.range(0)));
  const Eigen::MatrixXcd y = assemble_admittance(m, 1.0, true);
  const Eigen::FullPivLU<Eigen::MatrixXcd> lu(y);
  Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(y.rows());
  inj(0) = Complex(1.05, 0.0) / Complex(0.0, 0.0333);
  const std::vector<int> cp_bus{static_cast<int>(y.rows()) - 1};
  const std::vector<double> cp_power{0.4};
  const std::vector<double> cp_imax{0.6};
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(y.rows());
  for (auto _ : state)
    benchmark::DoNotOptimize(
        v = network_solve(lu, inj, cp_bus, cp_power, cp_imax, v));
}
BENCHMARK(BM_NetworkSolve)->Arg(6)->Arg(12);

void BM_KronReduce(benchmark::State& state) {
  const NetworkModel m = ladder_net(12);
  const Eigen::MatrixXcd y = assemble_admittance(m, 1.0, true);
  const std::vector<int> keep{0, 5, 11};
  for (auto _ : state) benchmark::DoNotOptimize(kron_reduce(y, keep));
}
BENCHMARK(BM_KronReduce);

void BM_FdneAdvance(benchmark::State& state) {
  // Order-8 two-port set with a stable synthetic denominator.
  FdneSet set;
  set.ports = 2;
  set.dt = 1e-3;
  for (int c = 0; c < 4; ++c) {
    FdneTf tf;
    tf.a.assign(8, Complex(0.0, 0.0));
    tf.b.assign(9, Complex(0.0, 0.0));
    tf.a[0] = Complex(-0.5, 0.1);
    tf.b[0] = Complex(2.0, -10.0);
    tf.b[1] = Complex(0.2, 0.1 * c);
    set.tf.push_back(tf);
    set.fit_error.push_back(0.0);
  }
  FdneRuntime rt(set);
  rt.init_steady(Eigen::VectorXcd::Ones(2));
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rt.history_current());
    benchmark::DoNotOptimize(rt.advance(v));
  }
}
BENCHMARK(BM_FdneAdvance);

void BM_CosimStep(benchmark::State& state) {
  CosimEngine eng(bench_scenario());
  for (auto _ : state) {
    benchmark::DoNotOptimize(eng.step());
    state.PauseTiming();
    if (eng.time() >= 0.9) eng = CosimEngine(bench_scenario());
    state.ResumeTiming();
  }
}
BENCHMARK(BM_CosimStep);

}  // namespace

BENCHMARK_MAIN();
