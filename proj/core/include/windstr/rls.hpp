#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "windstr/errors.hpp"

namespace windstr {

namespace detail {
inline bool finite(double v) { return std::isfinite(v); }
inline bool finite(const std::complex<double>& v) {
  return std::isfinite(v.real()) && std::isfinite(v.imag());
}
}  // namespace detail

// Discrete transfer function
//   y(k) = -a1*y(k-1) - ... - an*y(k-n) + b0*u(k) + b1*u(k-1) + ... + bn*u(k-n)
// i.e. B(q^-1)/A(q^-1) with A = 1 + a1 q^-1 + ... + an q^-n. b[0] is the
// direct (instantaneous) term and is 0 for strictly proper models.
template <class Scalar>
struct DiscreteTf {
  std::vector<Scalar> a;  // a1..an
  std::vector<Scalar> b;  // b0..bn

  int order() const { return static_cast<int>(a.size()); }

  // Frequency response at a point z on (or off) the unit circle.
  std::complex<double> eval(std::complex<double> z) const {
    std::complex<double> den = 1.0, zi = 1.0;
    const std::complex<double> zinv = 1.0 / z;
    std::complex<double> num = std::complex<double>(b[0]);
    for (size_t i = 0; i < a.size(); ++i) {
      zi *= zinv;
      num += std::complex<double>(b[i + 1]) * zi;
      den += std::complex<double>(a[i]) * zi;
    }
    return num / den;
  }

  std::complex<double> dc_gain() const { return eval(1.0); }
};

// Running state for simulating a DiscreteTf sample by sample.
template <class Scalar>
struct TfState {
  std::vector<Scalar> u_hist;  // u(k-1)..u(k-n)
  std::vector<Scalar> y_hist;  // y(k-1)..y(k-n)

  void reset(int n, Scalar u0 = Scalar(0), Scalar y0 = Scalar(0)) {
    u_hist.assign(n, u0);
    y_hist.assign(n, y0);
  }
};

template <class Scalar>
Scalar tf_step(const DiscreteTf<Scalar>& tf, TfState<Scalar>& st, Scalar u) {
  const int n = tf.order();
  Scalar y = tf.b[0] * u;
  for (int i = 0; i < n; ++i)
    y += tf.b[i + 1] * st.u_hist[i] - tf.a[i] * st.y_hist[i];
  for (int i = n - 1; i > 0; --i) {
    st.u_hist[i] = st.u_hist[i - 1];
    st.y_hist[i] = st.y_hist[i - 1];
  }
  if (n > 0) {
    st.u_hist[0] = u;
    st.y_hist[0] = y;
  }
  return y;
}

// Recursive least squares with exponential forgetting.
//
// theta = [a1..an, (b0,) b1..bn] against the regressor
//   x(k) = [-y(k-1)..-y(k-n), (u(k),) u(k-1)..u(k-n)]
// so that the one-step prediction is x(k)^T theta. For complex scalars the
// conjugate regressor drives the gain and P stays Hermitian; the real case
// reduces to the textbook update
//   K = P x / (gamma + x^T P x)
//   theta += K (y - x^T theta)
//   P = (I - K x^T) P / gamma.
template <class Scalar>
class RlsIdentifier {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  struct Config {
    int order = 2;
    bool direct_term = false;  // include b0 (needed for admittance fits)
    double forgetting = 0.98;  // gamma in (0, 1]
    double p0_scale = 1e6;
    // When the regressor carries almost no information (x^H P x below this),
    // forget nothing for that step: prevents covariance wind-up during long
    // quiescent stretches.
    double info_guard = 1e-8;
  };

  explicit RlsIdentifier(const Config& cfg) : cfg_(cfg) {
    if (cfg.order < 1)
      throw ConfigError("rls: order must be >= 1");
    if (!(cfg.forgetting > 0.0) || cfg.forgetting > 1.0)
      throw ConfigError("rls: forgetting factor must be in (0, 1]");
    if (!(cfg.p0_scale > 0.0))
      throw ConfigError("rls: p0_scale must be > 0");
    dim_ = 2 * cfg.order + (cfg.direct_term ? 1 : 0);
    theta_ = Vector::Zero(dim_);
    p_ = Matrix::Identity(dim_, dim_) * Scalar(cfg.p0_scale);
    u_hist_.assign(cfg.order, Scalar(0));
    y_hist_.assign(cfg.order, Scalar(0));
  }

  // Feed one (input, output) sample. Returns the innovation
  // y - x^T theta_prev, or 0 while the history is still filling.
  Scalar update(Scalar u, Scalar y) {
    if (!detail::finite(u) || !detail::finite(y))
      throw NumericError("rls: non-finite sample");
    const int n = cfg_.order;
    if (primed_ < n) {
      push(u, y);
      ++primed_;
      return Scalar(0);
    }
    Vector x(dim_);
    int j = 0;
    for (int i = 0; i < n; ++i) x(j++) = -y_hist_[i];
    if (cfg_.direct_term) x(j++) = u;
    for (int i = 0; i < n; ++i) x(j++) = u_hist_[i];

    const Vector px = p_ * x.conjugate();
    // x^T P conj(x): real and >= 0 for Hermitian positive definite P.
    const Scalar info_s = (x.transpose() * px)(0);
    const double info = std::real(std::complex<double>(info_s));
    const double gamma = info < cfg_.info_guard ? 1.0 : cfg_.forgetting;

    const Scalar innov = y - (x.transpose() * theta_)(0);
    const Vector k = px / (Scalar(gamma) + info_s);
    theta_ += k * innov;
    p_ = (p_ - k * (x.transpose() * p_)) / Scalar(gamma);
    p_ = ((p_ + p_.adjoint()) * Scalar(0.5)).eval();  // keep Hermitian

    push(u, y);
    ++updates_;
    return innov;
  }

  bool ready() const { return primed_ >= cfg_.order && updates_ > 0; }
  int order() const { return cfg_.order; }
  bool direct_term() const { return cfg_.direct_term; }
  long updates() const { return updates_; }
  const Vector& theta() const { return theta_; }
  const Matrix& cov() const { return p_; }

  // Coefficient view in the 1 + a1 q^-1 + ... convention. Throws before the
  // first completed update.
  DiscreteTf<Scalar> identified_model() const {
    if (!ready())
      throw NotReadyError("rls: identifier still in warm-up");
    DiscreteTf<Scalar> tf;
    const int n = cfg_.order;
    tf.a.resize(n);
    tf.b.assign(n + 1, Scalar(0));
    int j = 0;
    for (int i = 0; i < n; ++i) tf.a[i] = theta_(j++);
    if (cfg_.direct_term) tf.b[0] = theta_(j++);
    for (int i = 0; i < n; ++i) tf.b[i + 1] = theta_(j++);
    return tf;
  }

  // Warm-start theta from known coefficients (covariance untouched).
  void preload(const DiscreteTf<Scalar>& tf) {
    if (tf.order() != cfg_.order ||
        static_cast<int>(tf.b.size()) != cfg_.order + 1)
      throw ConfigError("rls: preload model order mismatch");
    int j = 0;
    for (int i = 0; i < cfg_.order; ++i) theta_(j++) = tf.a[i];
    if (cfg_.direct_term) theta_(j++) = tf.b[0];
    for (int i = 0; i < cfg_.order; ++i) theta_(j++) = tf.b[i + 1];
  }

 private:
  void push(Scalar u, Scalar y) {
    for (int i = cfg_.order - 1; i > 0; --i) {
      u_hist_[i] = u_hist_[i - 1];
      y_hist_[i] = y_hist_[i - 1];
    }
    u_hist_[0] = u;
    y_hist_[0] = y;
  }

  Config cfg_;
  int dim_ = 0;
  int primed_ = 0;
  long updates_ = 0;
  Vector theta_;
  Matrix p_;
  std::vector<Scalar> u_hist_, y_hist_;
};

}  // namespace windstr
