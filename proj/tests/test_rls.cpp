#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "windstr/rls.hpp"

using namespace windstr;

namespace {

// Reference plant used throughout: two well-damped real poles (0.7, 0.8).
//   y(k) = 1.5 y(k-1) - 0.56 y(k-2) + 0.1 u(k-1) + 0.05 u(k-2)
struct Plant {
  double a1 = -1.5, a2 = 0.56, b1 = 0.1, b2 = 0.05;
  double y1 = 0.0, y2 = 0.0, u1 = 0.0, u2 = 0.0;

  double step(double u) {
    const double y = -a1 * y1 - a2 * y2 + b1 * u1 + b2 * u2;
    y2 = y1;
    y1 = y;
    u2 = u1;
    u1 = u;
    return y;
  }
};

double coeff_error(const DiscreteTf<double>& tf, const Plant& p) {
  return std::max({std::abs(tf.a[0] - p.a1), std::abs(tf.a[1] - p.a2),
                   std::abs(tf.b[1] - p.b1), std::abs(tf.b[2] - p.b2)});
}

}  // namespace

TEST_CASE("rls: config validation and warm-up") {
  RlsIdentifier<double>::Config bad;
  bad.forgetting = 0.0;
  CHECK_THROWS_AS(RlsIdentifier<double>{bad}, ConfigError);
  bad.forgetting = 1.5;
  CHECK_THROWS_AS(RlsIdentifier<double>{bad}, ConfigError);
  bad.forgetting = 0.98;
  bad.p0_scale = 0.0;
  CHECK_THROWS_AS(RlsIdentifier<double>{bad}, ConfigError);
  bad.p0_scale = 1e6;
  bad.order = 0;
  CHECK_THROWS_AS(RlsIdentifier<double>{bad}, ConfigError);

  RlsIdentifier<double> id{RlsIdentifier<double>::Config{}};
  CHECK_FALSE(id.ready());
  CHECK_THROWS_AS(id.identified_model(), NotReadyError);
  // The first `order` samples only fill the history ring.
  CHECK(id.update(1.0, 1.0) == 0.0);
  CHECK(id.update(1.0, 1.0) == 0.0);
  CHECK_FALSE(id.ready());
  id.update(1.0, 1.0);
  CHECK(id.ready());
  CHECK_THROWS_AS(id.update(std::nan(""), 0.0), NumericError);
}

TEST_CASE("rls: theta and model shapes") {
  RlsIdentifier<double>::Config c;
  c.order = 1;
  RlsIdentifier<double> id{c};
  CHECK(id.theta().size() == 2);
  c.direct_term = true;
  RlsIdentifier<double> idd{c};
  CHECK(idd.theta().size() == 3);

  id.update(1.0, 0.5);
  id.update(-1.0, 0.25);
  const auto tf = id.identified_model();
  CHECK(tf.a.size() == 1);
  CHECK(tf.b.size() == 2);
  CHECK(tf.b[0] == 0.0);  // strictly proper form
}

TEST_CASE("rls: noiseless second-order plant nailed within 500 samples") {
  RlsIdentifier<double> id{RlsIdentifier<double>::Config{}};
  Plant pl;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);

  double first_innov = 0.0, last_innov = 0.0;
  for (int k = 0; k < 500; ++k) {
    const double u = dist(rng);
    const double innov = id.update(u, pl.step(u));
    if (k == 2) first_innov = std::abs(innov);  // first real update
    last_innov = std::abs(innov);
  }
  CHECK(coeff_error(id.identified_model(), pl) < 1e-6);
  // Innovation envelope collapses on noiseless data.
  CHECK(first_innov > 1e-3);
  CHECK(last_innov < first_innov / 1e3);
}

TEST_CASE("rls: gamma = 1 matches the batch least-squares oracle") {
  RlsIdentifier<double>::Config c;
  c.forgetting = 1.0;
  c.p0_scale = 1e9;
  RlsIdentifier<double> id{c};
  Plant pl;
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);

  // Replicate the regressor stream and solve the (ridge-regularized) normal
  // equations in one shot; P0 = p0*I makes RLS exactly that estimator.
  std::vector<Eigen::Vector4d> xs;
  std::vector<double> ys;
  double yh1 = 0.0, yh2 = 0.0, uh1 = 0.0, uh2 = 0.0;
  for (int k = 0; k < 400; ++k) {
    const double u = dist(rng);
    const double y = pl.step(u);
    if (k >= 2) {
      xs.push_back(Eigen::Vector4d(-yh1, -yh2, uh1, uh2));
      ys.push_back(y);
    }
    yh2 = yh1;
    yh1 = y;
    uh2 = uh1;
    uh1 = u;
    id.update(u, y);
  }
  Eigen::Matrix4d xtx = Eigen::Matrix4d::Identity() / c.p0_scale;
  Eigen::Vector4d xty = Eigen::Vector4d::Zero();
  for (size_t i = 0; i < xs.size(); ++i) {
    xtx += xs[i] * xs[i].transpose();
    xty += xs[i] * ys[i];
  }
  const Eigen::Vector4d theta_batch = xtx.ldlt().solve(xty);
  CHECK((id.theta() - theta_batch).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("rls: covariance equals the inverse information matrix") {
  RlsIdentifier<double>::Config c;
  c.forgetting = 0.95;
  RlsIdentifier<double> id{c};
  Plant pl;
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);

  // S(k) = gamma_eff S(k-1) + x x^T alongside the identifier; P must stay
  // its inverse. gamma_eff mirrors the information guard.
  Eigen::Matrix4d s = Eigen::Matrix4d::Identity() / c.p0_scale;
  double yh1 = 0.0, yh2 = 0.0, uh1 = 0.0, uh2 = 0.0;
  for (int k = 0; k < 300; ++k) {
    const double u = dist(rng);
    const double y = pl.step(u);
    if (k >= 2) {
      const Eigen::Vector4d x(-yh1, -yh2, uh1, uh2);
      const double info = x.transpose() * id.cov() * x;
      const double g = info < 1e-8 ? 1.0 : c.forgetting;
      s = g * s + x * x.transpose();
    }
    yh2 = yh1;
    yh1 = y;
    uh2 = uh1;
    uh1 = u;
    id.update(u, y);
    if (k >= 2 && k % 25 == 0) {
      const Eigen::Matrix4d p_ref = s.inverse();
      const double rel = (id.cov() - p_ref).norm() / p_ref.norm();
      CHECK(rel < 1e-8);
    }
  }
}

TEST_CASE("rls: P stays symmetric positive definite under random updates") {
  std::mt19937 rng(14);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double gamma : {0.95, 0.98, 1.0}) {
    RlsIdentifier<double>::Config c;
    c.forgetting = gamma;
    RlsIdentifier<double> id{c};
    for (int k = 0; k < 100000; ++k) {
      id.update(dist(rng), dist(rng));
      if (k % 1000 == 999) {
        const auto& p = id.cov();
        CHECK((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-9 * p.norm());
        Eigen::LLT<Eigen::MatrixXd> llt(p);
        CHECK(llt.info() == Eigen::Success);
      }
    }
  }
}

TEST_CASE("rls: forgetting tracks a plant switch") {
  RlsIdentifier<double> id{RlsIdentifier<double>::Config{}};  // gamma 0.98
  Plant pl;
  std::mt19937 rng(15);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double u = dist(rng);
    id.update(u, pl.step(u));
  }
  CHECK(coeff_error(id.identified_model(), pl) < 1e-8);

  // New dynamics, same stream: re-converged within 10 / (1 - gamma) samples.
  pl.a1 = -1.2;
  pl.a2 = 0.35;
  pl.b1 = 0.08;
  pl.b2 = 0.03;
  for (int k = 0; k < 500; ++k) {
    const double u = dist(rng);
    id.update(u, pl.step(u));
  }
  CHECK(coeff_error(id.identified_model(), pl) < 1e-4);
}

TEST_CASE("rls: exact model yields zero innovation and frozen theta") {
  RlsIdentifier<double> id{RlsIdentifier<double>::Config{}};
  Plant pl;
  DiscreteTf<double> truth;
  truth.a = {pl.a1, pl.a2};
  truth.b = {0.0, pl.b1, pl.b2};
  id.preload(truth);

  std::mt19937 rng(16);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double u = dist(rng);
    const double innov = id.update(u, pl.step(u));
    CHECK(std::abs(innov) < 1e-10);
  }
  CHECK(coeff_error(id.identified_model(), pl) < 1e-8);

  DiscreteTf<double> wrong;
  wrong.a = {0.0};
  wrong.b = {0.0, 0.0};
  CHECK_THROWS_AS(id.preload(wrong), ConfigError);
}

TEST_CASE("rls: complex scalar with a direct term") {
  using C = std::complex<double>;
  RlsIdentifier<C>::Config c;
  c.order = 1;
  c.direct_term = true;
  c.forgetting = 1.0;
  RlsIdentifier<C> id{c};

  const C a1(0.3, 0.4), b0(2.0, -1.0), b1(0.0, 0.5);
  C yh = 0.0, uh = 0.0;
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const C u(dist(rng), dist(rng));
    const C y = -a1 * yh + b0 * u + b1 * uh;
    id.update(u, y);
    yh = y;
    uh = u;
  }
  const auto tf = id.identified_model();
  CHECK(std::abs(tf.a[0] - a1) < 1e-8);
  CHECK(std::abs(tf.b[0] - b0) < 1e-8);
  CHECK(std::abs(tf.b[1] - b1) < 1e-8);

  // Hermitian covariance, positive real diagonal.
  const auto& p = id.cov();
  CHECK((p - p.adjoint()).cwiseAbs().maxCoeff() < 1e-9 * p.norm());
  for (int i = 0; i < p.rows(); ++i) CHECK(p(i, i).real() > 0.0);
}

TEST_CASE("rls: tf_step reproduces the difference equation") {
  DiscreteTf<double> tf;
  tf.a = {-1.5, 0.56};
  tf.b = {0.0, 0.1, 0.05};
  TfState<double> st;
  st.reset(2);
  Plant pl;
  std::mt19937 rng(18);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const double u = dist(rng);
    CHECK(tf_step(tf, st, u) == doctest::Approx(pl.step(u)).epsilon(1e-12));
  }
  // DC gain: B(1)/A(1).
  CHECK(tf.dc_gain().real() == doctest::Approx(0.15 / 0.06).epsilon(1e-12));
  CHECK(tf.dc_gain().imag() == doctest::Approx(0.0));
}
