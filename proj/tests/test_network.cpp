#include <doctest.h>

#include <algorithm>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "windstr/network.hpp"

using namespace windstr;

namespace {

NetworkModel chain3() {
  // 1 -- 2 -- 3 with unit series conductances.
  NetworkModel m;
  m.name = "chain3";
  m.buses = {{1, "a", "study"}, {2, "b", "study"}, {3, "c", "study"}};
  m.branches = {{1, 2, 1.0, 0.0, 0.0}, {2, 3, 1.0, 0.0, 0.0}};
  return m;
}

// A random connected network: spanning tree plus a few extra branches,
// small resistive shunts everywhere so every sub-block stays invertible.
NetworkModel random_net(std::mt19937& rng, int n_buses) {
  std::uniform_real_distribution<double> rd(0.01, 0.2), xd(0.05, 0.6),
      bd(0.0, 0.1), gd(0.001, 0.05);
  NetworkModel m;
  m.name = "random";
  for (int i = 1; i <= n_buses; ++i) m.buses.push_back({i, "", "study"});
  for (int i = 2; i <= n_buses; ++i) {
    std::uniform_int_distribution<int> pick(1, i - 1);
    m.branches.push_back({pick(rng), i, rd(rng), xd(rng), bd(rng)});
  }
  std::uniform_int_distribution<int> pick(1, n_buses);
  for (int e = 0; e < n_buses / 2; ++e) {
    const int a = pick(rng), b = pick(rng);
    if (a != b) m.branches.push_back({a, b, rd(rng), xd(rng), bd(rng)});
  }
  for (int i = 1; i <= n_buses; ++i)
    m.shunts.push_back({i, gd(rng), bd(rng)});
  return m;
}

}  // namespace

TEST_CASE("assemble_admittance: single branch and shunt placement") {
  NetworkModel m;
  m.buses = {{1, "", "study"}, {2, "", "study"}};
  m.branches = {{1, 2, 0.1, 0.2, 0.0}};
  const Complex y = 1.0 / Complex(0.1, 0.2);

  Eigen::MatrixXcd a = assemble_admittance(m);
  CHECK(std::abs(a(0, 0) - y) < 1e-15);
  CHECK(std::abs(a(1, 1) - y) < 1e-15);
  CHECK(std::abs(a(0, 1) + y) < 1e-15);
  CHECK(std::abs(a(1, 0) + y) < 1e-15);

  // A shunt at bus 1 touches only that diagonal.
  m.shunts = {{1, 0.5, 0.25}};
  Eigen::MatrixXcd s = assemble_admittance(m);
  CHECK(std::abs(s(0, 0) - (y + Complex(0.5, 0.25))) < 1e-15);
  CHECK(std::abs(s(1, 1) - y) < 1e-15);
  CHECK(std::abs(s(0, 1) + y) < 1e-15);

  // Duplicate branches accumulate in parallel.
  m.shunts.clear();
  m.branches.push_back({1, 2, 0.1, 0.2, 0.0});
  Eigen::MatrixXcd d = assemble_admittance(m);
  CHECK(std::abs(d(0, 1) + 2.0 * y) < 1e-14);

  m.branches.push_back({1, 2, 0.0, 0.0, 0.0});
  CHECK_THROWS_AS(assemble_admittance(m), ConfigError);
}

TEST_CASE("assemble_admittance: independent hand assembly of a 6-bus net") {
  std::mt19937 rng(31);
  const NetworkModel m = random_net(rng, 6);
  m.index_of(6);  // sanity: ids are 1..6
  CHECK_THROWS_AS(m.index_of(99), ConfigError);

  for (double w : {1.0, 0.3, 2.5}) {
    // Assemble by direct accumulation, written apart from the library code.
    Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(6, 6);
    for (const auto& br : m.branches) {
      const Complex ys = 1.0 / Complex(br.r, br.x * w);
      const int i = br.from - 1, j = br.to - 1;
      ref(i, i) += ys + Complex(0.0, 0.5 * br.b * w);
      ref(j, j) += ys + Complex(0.0, 0.5 * br.b * w);
      ref(i, j) -= ys;
      ref(j, i) -= ys;
    }
    for (const auto& sh : m.shunts)
      ref(sh.bus - 1, sh.bus - 1) += Complex(sh.g, sh.b * w);

    const Eigen::MatrixXcd got = assemble_admittance(m, w);
    CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((got - got.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("assemble_admittance: row sums equal the shunt at each bus") {
  std::mt19937 rng(32);
  NetworkModel m = random_net(rng, 8);
  // Strip charging so the expected row sum is exactly the bus shunt.
  for (auto& br : m.branches) br.b = 0.0;
  const Eigen::MatrixXcd y = assemble_admittance(m);
  for (int i = 0; i < 8; ++i) {
    const Complex row = y.row(i).sum();
    const Complex want(m.shunts[i].g, m.shunts[i].b);
    CHECK(std::abs(row - want) < 1e-12);
  }
}

TEST_CASE("assemble_admittance: machine folding and frequency scaling") {
  NetworkModel m;
  m.buses = {{1, "", "study"}, {2, "", "study"}};
  m.branches = {{1, 2, 0.0, 0.5, 0.0}};
  m.machines.push_back({"g", 2, 10.0, 0.0, 0.25, 100.0, 1.0, 0.0, 0.0, 0.0});

  const Eigen::MatrixXcd base = assemble_admittance(m, 1.0, false);
  const Eigen::MatrixXcd with = assemble_admittance(m, 1.0, true);
  CHECK(std::abs(with(0, 0) - base(0, 0)) < 1e-15);
  CHECK(std::abs(with(1, 1) - base(1, 1) - 1.0 / Complex(0.0, 0.25)) < 1e-15);

  // Reactances scale linearly with frequency: off-diagonal halves at 2x.
  const Eigen::MatrixXcd fast = assemble_admittance(m, 2.0, false);
  CHECK(std::abs(fast(0, 1) - base(0, 1) / 2.0) < 1e-15);

  m.machines[0].xdp = 0.0;
  CHECK_THROWS_AS(assemble_admittance(m, 1.0, true), ConfigError);
}

TEST_CASE("kron_reduce: identity, series chain, singular block") {
  std::mt19937 rng(33);
  const Eigen::MatrixXcd y = assemble_admittance(random_net(rng, 5));
  const Eigen::MatrixXcd same = kron_reduce(y, {0, 1, 2, 3, 4});
  CHECK((same - y).cwiseAbs().maxCoeff() == 0.0);

  // Two unit admittances in series collapse to one half.
  const Eigen::MatrixXcd c = assemble_admittance(chain3());
  const Eigen::MatrixXcd r = kron_reduce(c, {0, 2});
  CHECK(std::abs(r(0, 0) - 0.5) < 1e-14);
  CHECK(std::abs(r(0, 1) + 0.5) < 1e-14);
  CHECK(std::abs(r(1, 1) - 0.5) < 1e-14);

  // An isolated eliminated bus leaves a singular block behind.
  NetworkModel iso = chain3();
  iso.buses.push_back({4, "island", "study"});
  const Eigen::MatrixXcd yi = assemble_admittance(iso);
  CHECK_THROWS_AS(kron_reduce(yi, {0, 1, 2}), NumericError);
  CHECK_THROWS_AS(kron_reduce(yi, {0, 7}), ConfigError);
}

TEST_CASE("kron_reduce: boundary behavior preserved on random networks") {
  std::mt19937 rng(34);
  std::uniform_int_distribution<int> size(4, 12);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = size(rng);
    const Eigen::MatrixXcd y = assemble_admittance(random_net(rng, n));
    std::uniform_int_distribution<int> kn(1, n - 1);
    const int n_keep = kn(rng);
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<int> keep(all.begin(), all.begin() + n_keep);
    std::sort(keep.begin(), keep.end());

    const Eigen::MatrixXcd yr = kron_reduce(y, keep);
    REQUIRE(yr.rows() == n_keep);

    // With zero injection at the eliminated buses, the kept-bus currents of
    // the full solve must match the reduced matrix exactly.
    std::uniform_real_distribution<double> vd(-1.0, 1.0);
    Eigen::VectorXcd vk(n_keep);
    for (int i = 0; i < n_keep; ++i) vk(i) = Complex(vd(rng), vd(rng));

    std::vector<int> elim;
    for (int i = 0; i < n; ++i)
      if (std::find(keep.begin(), keep.end(), i) == keep.end())
        elim.push_back(i);
    Eigen::MatrixXcd yee(elim.size(), elim.size()),
        yek(elim.size(), n_keep), yke(n_keep, elim.size()),
        ykk(n_keep, n_keep);
    for (size_t i = 0; i < elim.size(); ++i) {
      for (size_t j = 0; j < elim.size(); ++j) yee(i, j) = y(elim[i], elim[j]);
      for (int j = 0; j < n_keep; ++j) {
        yek(i, j) = y(elim[i], keep[j]);
        yke(j, i) = y(keep[j], elim[i]);
      }
    }
    for (int i = 0; i < n_keep; ++i)
      for (int j = 0; j < n_keep; ++j) ykk(i, j) = y(keep[i], keep[j]);

    const Eigen::VectorXcd ve = yee.fullPivLu().solve(-yek * vk);
    const Eigen::VectorXcd i_full = ykk * vk + yke * ve;
    const Eigen::VectorXcd i_red = yr * vk;
    CHECK((i_full - i_red).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("aggregate_coherent: singleton identity and parallel pair") {
  NetworkModel m;
  m.buses = {{1, "", "study"}, {2, "", "external"}, {3, "", "external"}};
  m.branches = {{1, 2, 0.01, 0.1, 0.0}, {1, 3, 0.01, 0.1, 0.0},
                {2, 3, 0.02, 0.2, 0.04}};
  m.machines.push_back({"g2", 2, 20.0, 1.0, 0.30, 300.0, 1.02, 2.0, 0.0, 0.0});
  m.machines.push_back({"g3", 3, 15.0, 0.5, 0.60, 200.0, 1.05, 1.5, 0.0, 0.0});

  // Singleton: same machine on a new bus, network spectrum unchanged.
  const NetworkModel single = aggregate_coherent(m, {{"g2"}});
  const Machine& sm = single.machine("agg_g2");
  CHECK(sm.h == 20.0);
  CHECK(sm.d == 1.0);
  CHECK(sm.xdp == doctest::Approx(0.30).epsilon(1e-15));
  CHECK(sm.rating_mva == 300.0);
  CHECK(sm.pm == 2.0);
  CHECK(single.buses.size() == m.buses.size());
  auto spectrum = [](const NetworkModel& net) {
    Eigen::VectorXcd ev =
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(
            assemble_admittance(net, 1.0, true), false)
            .eigenvalues();
    std::vector<double> mags(ev.size());
    for (int i = 0; i < ev.size(); ++i) mags[i] = std::abs(ev(i));
    std::sort(mags.begin(), mags.end());
    return mags;
  };
  const auto s0 = spectrum(m), s1 = spectrum(single);
  for (size_t i = 0; i < s0.size(); ++i)
    CHECK(s0[i] == doctest::Approx(s1[i]).epsilon(1e-12));

  // Pair: inertias, ratings and mechanical powers add; 1/xdp adds; the EMF
  // is rating-weighted; the internal tie keeps only its charging.
  const NetworkModel pair = aggregate_coherent(m, {{"g2", "g3"}});
  const Machine& am = pair.machine("agg_g2_g3");
  CHECK(am.h == doctest::Approx(35.0).epsilon(1e-15));
  CHECK(am.d == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(am.rating_mva == doctest::Approx(500.0).epsilon(1e-15));
  CHECK(am.pm == doctest::Approx(3.5).epsilon(1e-15));
  CHECK(1.0 / am.xdp == doctest::Approx(1.0 / 0.3 + 1.0 / 0.6).epsilon(1e-14));
  CHECK(am.e_mag ==
        doctest::Approx((1.02 * 300.0 + 1.05 * 200.0) / 500.0).epsilon(1e-14));
  CHECK(pair.buses.size() == 2);
  CHECK(pair.branches.size() == 2);  // both ties re-terminated, no self loop
  bool charging_kept = false;
  for (const auto& sh : pair.shunts)
    charging_kept |= sh.bus == am.bus && sh.b == 0.04;
  CHECK(charging_kept);

  CHECK_THROWS_AS(aggregate_coherent(m, {{"g2"}, {"g2"}}), ConfigError);
  CHECK_THROWS_AS(aggregate_coherent(m, {{"nope"}}), ConfigError);

  // Identical twins double, exactly.
  NetworkModel twins = m;
  twins.machines[1] = twins.machines[0];
  twins.machines[1].name = "g3";
  twins.machines[1].bus = 3;
  const NetworkModel agg2 = aggregate_coherent(twins, {{"g2", "g3"}});
  const Machine& tm = agg2.machine("agg_g2_g3");
  CHECK(tm.h == 40.0);
  CHECK(tm.xdp == doctest::Approx(0.15).epsilon(1e-15));
}

TEST_CASE("tsa_step: hand-worked port current and edge cases") {
  TsaBlocks t;
  t.y_bb = Eigen::MatrixXcd::Constant(1, 1, Complex(2.0, 0.0));
  t.y_be = Eigen::MatrixXcd::Constant(1, 1, Complex(1.0, 0.0));
  t.y_eb = Eigen::MatrixXcd::Constant(1, 1, Complex(1.0, 0.0));
  t.y_ee = Eigen::MatrixXcd::Constant(1, 1, Complex(4.0, 0.0));

  Eigen::VectorXcd vb(1), ie(1);
  vb << Complex(1.0, 0.0);
  ie << Complex(2.0, 0.0);
  // V_e = (2 - 1) / 4, I_b = 2 + 0.25.
  const Eigen::VectorXcd ib = tsa_step(t, vb, ie);
  CHECK(std::abs(ib(0) - Complex(2.25, 0.0)) < 1e-15);

  vb << 0.0;
  ie << 0.0;
  CHECK(std::abs(tsa_step(t, vb, ie)(0)) == 0.0);

  // Decoupled blocks: the machine side no longer reaches the port.
  t.y_be.setZero();
  t.y_eb.setZero();
  vb << Complex(0.5, -0.5);
  ie << Complex(3.0, 0.0);
  CHECK(std::abs(tsa_step(t, vb, ie)(0) - Complex(1.0, -1.0)) < 1e-15);

  t.y_ee.setZero();
  CHECK_THROWS_AS(tsa_step(t, vb, ie), NumericError);
}
