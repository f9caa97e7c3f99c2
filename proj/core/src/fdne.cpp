#include "windstr/fdne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "windstr/poly.hpp"

namespace windstr {

namespace {

// Denominator roots in the z plane: z^n + a1 z^(n-1) + ... + an.
std::vector<Complex> den_roots(const FdneTf& tf) {
  const int n = tf.order();
  std::vector<Complex> c(n + 1);
  for (int i = 0; i < n; ++i) c[i] = tf.a[n - 1 - i];
  c[n] = 1.0;
  return poly_roots(c);
}

// Numerator as an ascending z-polynomial: b0 z^n + b1 z^(n-1) + ... + bn.
std::vector<Complex> num_poly(const FdneTf& tf) {
  const int n = tf.order();
  std::vector<Complex> c(n + 1);
  for (int i = 0; i <= n; ++i) c[i] = tf.b[n - i];
  return c;
}

}  // namespace

bool fdne_stable(const FdneTf& tf, double margin) {
  for (const auto& p : den_roots(tf))
    if (std::abs(p) >= 1.0 - margin) return false;
  return true;
}

FdneTf fdne_stabilize(const FdneTf& tf, double cancel_tol) {
  if (fdne_stable(tf)) return tf;

  std::vector<Complex> poles = den_roots(tf);
  std::vector<Complex> nump = num_poly(tf);
  while (!nump.empty() && std::abs(nump.back()) == 0.0) nump.pop_back();
  if (nump.empty())
    throw NumericError("fdne_stabilize: zero numerator with unstable poles");
  const Complex lead = nump.back();
  std::vector<Complex> zeros = poly_roots(nump);

  std::vector<Complex> kept_poles;
  for (const auto& p : poles) {
    if (std::abs(p) < 1.0 - 1e-9) {
      kept_poles.push_back(p);
      continue;
    }
    // Unstable: find the nearest numerator zero and require cancellation.
    size_t best = zeros.size();
    double best_d = cancel_tol * (1.0 + std::abs(p));
    for (size_t i = 0; i < zeros.size(); ++i) {
      const double d = std::abs(zeros[i] - p);
      if (d <= best_d) {
        best_d = d;
        best = i;
      }
    }
    if (best == zeros.size())
      throw NumericError("fdne_stabilize: unstable pole without matching zero at z = (" +
                         std::to_string(p.real()) + ", " +
                         std::to_string(p.imag()) + ")");
    zeros.erase(zeros.begin() + best);
  }

  const int n2 = static_cast<int>(kept_poles.size());
  const int nz2 = static_cast<int>(zeros.size());
  if (nz2 > n2)
    throw NumericError("fdne_stabilize: non-causal result after deflation");
  const auto den2 = poly_from_roots(kept_poles);  // monic, degree n2
  std::vector<Complex> num2 = poly_from_roots(zeros);
  for (auto& c : num2) c *= lead;

  FdneTf out;
  out.a.resize(n2);
  out.b.assign(n2 + 1, Complex(0.0));
  for (int i = 0; i < n2; ++i) out.a[i] = den2[n2 - 1 - i];
  for (int i = 0; i <= n2; ++i) {
    const int zi = n2 - i;  // power of z carried by b_i
    if (zi <= nz2) out.b[i] = num2[zi];
  }
  if (!fdne_stable(out))
    throw NumericError("fdne_stabilize: still unstable after deflation");
  return out;
}

FdneTf fdne_fit(const std::vector<std::pair<Complex, Complex>>& samples,
                int order, bool direct_term, double p0_scale,
                double cancel_tol) {
  RlsIdentifier<Complex>::Config cfg;
  cfg.order = order;
  cfg.direct_term = direct_term;
  cfg.forgetting = 1.0;  // stationary data
  cfg.p0_scale = p0_scale;
  RlsIdentifier<Complex> rls(cfg);
  for (const auto& [v, i] : samples) rls.update(v, i);
  FdneTf tf = rls.identified_model();
  if (!fdne_stable(tf)) tf = fdne_stabilize(tf, cancel_tol);
  return tf;
}

Complex fdne_step(const FdneTf& tf, TfState<Complex>& hist, Complex v_k) {
  return tf_step(tf, hist, v_k);
}

Eigen::MatrixXcd FdneSet::dc_gain() const {
  Eigen::MatrixXcd g(ports, ports);
  for (int i = 0; i < ports; ++i)
    for (int j = 0; j < ports; ++j) g(i, j) = at(i, j).dc_gain();
  return g;
}

Eigen::MatrixXcd FdneSet::direct_gain() const {
  Eigen::MatrixXcd g(ports, ports);
  for (int i = 0; i < ports; ++i)
    for (int j = 0; j < ports; ++j) g(i, j) = at(i, j).b[0];
  return g;
}

FdneRuntime::FdneRuntime(const FdneSet& set) : set_(set) {
  hist_.resize(set_.ports * set_.ports);
  for (int i = 0; i < set_.ports; ++i)
    for (int j = 0; j < set_.ports; ++j)
      hist_[i * set_.ports + j].reset(set_.at(i, j).order());
}

Eigen::VectorXcd FdneRuntime::history_current() const {
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(set_.ports);
  for (int i = 0; i < set_.ports; ++i)
    for (int j = 0; j < set_.ports; ++j) {
      const FdneTf& tf = set_.at(i, j);
      const TfState<Complex>& st = hist_[i * set_.ports + j];
      Complex acc = 0.0;
      for (int l = 0; l < tf.order(); ++l)
        acc += tf.b[l + 1] * st.u_hist[l] - tf.a[l] * st.y_hist[l];
      h(i) += acc;
    }
  return h;
}

Eigen::VectorXcd FdneRuntime::advance(const Eigen::VectorXcd& v_k) {
  Eigen::VectorXcd i_k = Eigen::VectorXcd::Zero(set_.ports);
  for (int i = 0; i < set_.ports; ++i)
    for (int j = 0; j < set_.ports; ++j)
      i_k(i) += tf_step(set_.at(i, j), hist_[i * set_.ports + j], v_k(j));
  return i_k;
}

void FdneRuntime::init_steady(const Eigen::VectorXcd& v0) {
  for (int i = 0; i < set_.ports; ++i)
    for (int j = 0; j < set_.ports; ++j) {
      const FdneTf& tf = set_.at(i, j);
      hist_[i * set_.ports + j].reset(tf.order(), v0(j),
                                      tf.dc_gain() * v0(j));
    }
}

std::vector<SweepPoint> fdne_sweep(const NetworkModel& ext,
                                   const std::vector<int>& port_buses,
                                   double nu_min_hz, double nu_max_hz,
                                   int tones_per_decade) {
  if (!(nu_min_hz > 0.0) || nu_max_hz <= nu_min_hz)
    throw ConfigError("fdne_sweep: need 0 < nu_min < nu_max");
  std::vector<double> tones{0.0};
  const double lg0 = std::log10(nu_min_hz), lg1 = std::log10(nu_max_hz);
  const int steps = static_cast<int>(std::ceil((lg1 - lg0) * tones_per_decade));
  for (int i = 0; i <= steps; ++i) {
    const double nu = std::pow(10.0, std::min(lg0 + double(i) / tones_per_decade, lg1));
    tones.push_back(nu);
    tones.push_back(-nu);
  }
  std::sort(tones.begin(), tones.end());
  tones.erase(std::unique(tones.begin(), tones.end()), tones.end());

  std::vector<int> keep;
  keep.reserve(port_buses.size());
  for (int b : port_buses) keep.push_back(ext.index_of(b));

  std::vector<SweepPoint> out;
  out.reserve(tones.size());
  for (double nu : tones) {
    const double omega_rel = 1.0 + nu / ext.f_hz;
    // The band around omega_rel = 0 is the phasor frame's DC rail: inductors
    // short out and a lightly damped external shows a resistive-limited
    // ridge there. A quasi-sinusoidal co-simulation never legitimately
    // operates in that band, and chasing the ridge destabilizes the fit, so
    // those tones are left out.
    if (std::abs(omega_rel) < 0.15) continue;
    const Eigen::MatrixXcd y = assemble_admittance(ext, omega_rel, true);
    out.push_back({nu, kron_reduce(y, keep)});
  }
  return out;
}

FdneSet fdne_fit_sweep(const std::vector<SweepPoint>& sweep, double dt,
                       int order, int max_order, double err_target) {
  if (sweep.empty()) throw ConfigError("fdne_fit_sweep: empty sweep");
  const int m = static_cast<int>(sweep.front().h.rows());

  // Enough samples to cover the slowest nonzero tone once and a half.
  double nu_min = 0.0;
  for (const auto& sp : sweep)
    if (sp.nu_hz != 0.0)
      nu_min = nu_min == 0.0 ? std::abs(sp.nu_hz)
                             : std::min(nu_min, std::abs(sp.nu_hz));
  const int n_samples =
      nu_min > 0.0 ? static_cast<int>(std::ceil(1.5 / (nu_min * dt))) : 4096;

  constexpr double kGolden = 2.399963229728653;  // radians

  // Decoupled port pairs (external islands) have identically zero response;
  // there is nothing to identify and any denominator would be arbitrary.
  double scale = 0.0;
  for (const auto& sp : sweep) scale = std::max(scale, sp.h.cwiseAbs().maxCoeff());
  const double zero_floor = 1e-10 * scale;

  FdneSet best;
  double best_worst = std::numeric_limits<double>::infinity();
  // Coefficients are complex, so there is no conjugate-pair constraint and
  // odd orders are as valid as even ones.
  for (int n = order; n <= max_order; ++n) {
    FdneSet set;
    set.ports = m;
    set.dt = dt;
    set.tf.resize(m * m);
    set.fit_error.assign(m * m, 0.0);
    bool fit_failed = false;
    for (int j = 0; j < m && !fit_failed; ++j) {
      // Excite port j alone; every other port is held at zero deviation.
      std::vector<std::vector<std::pair<Complex, Complex>>> chan(m);
      for (int i = 0; i < m; ++i) chan[i].reserve(n_samples);
      for (int k = 0; k < n_samples; ++k) {
        Complex v = 0.0;
        Eigen::VectorXcd icur = Eigen::VectorXcd::Zero(m);
        for (size_t t = 0; t < sweep.size(); ++t) {
          const double ph =
              2.0 * M_PI * sweep[t].nu_hz * k * dt + kGolden * (double(t) + 37.0 * j);
          const Complex tone = std::polar(1.0, ph);
          v += tone;
          icur += sweep[t].h.col(j) * tone;
        }
        for (int i = 0; i < m; ++i) chan[i].push_back({v, icur(i)});
      }
      for (int i = 0; i < m; ++i) {
        double ref = 0.0;
        for (const auto& sp : sweep) ref = std::max(ref, std::abs(sp.h(i, j)));
        if (ref <= zero_floor) {
          set.at(i, j) = FdneTf{{}, {Complex(0.0, 0.0)}};  // hard zero
          set.fit_error[i * m + j] = 0.0;
          continue;
        }
        try {
          set.at(i, j) = fdne_fit(chan[i], n);
        } catch (const NumericError&) {
          fit_failed = true;  // unstable at this order; retry higher
          break;
        }
        // Relative response error across the sweep.
        double err = 0.0;
        for (const auto& sp : sweep) {
          const Complex z = std::polar(1.0, 2.0 * M_PI * sp.nu_hz * dt);
          err = std::max(err, std::abs(set.at(i, j).eval(z) - sp.h(i, j)));
        }
        set.fit_error[i * m + j] = err / (ref + 1e-300);
      }
    }
    if (!fit_failed) {
      const double worst =
          *std::max_element(set.fit_error.begin(), set.fit_error.end());
      if (worst < best_worst) {
        best_worst = worst;
        best = set;
      }
      if (worst <= err_target) return set;
    }
  }
  if (best.tf.empty())
    throw NumericError("fdne_fit_sweep: no stable fit up to the order cap");
  return best;  // best effort; caller reports fit_error
}

}  // namespace windstr
