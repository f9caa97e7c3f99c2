#pragma once

#include <complex>
#include <vector>

#include "windstr/network.hpp"
#include "windstr/rls.hpp"

namespace windstr {

// One boundary-port admittance channel fitted as a discrete transfer
// function with complex coefficients (dynamic-phasor frame):
//   i(k) = -a1 i(k-1) - ... - an i(k-n)
//          + b0 v(k) + b1 v(k-1) + ... + bn v(k-n).
using FdneTf = DiscreteTf<Complex>;

// Fit a difference-equation admittance from time-domain samples via the
// recursive least-squares identifier with gamma = 1 (stationary data).
// direct_term defaults on: a strictly proper form cannot represent a
// resistive path. The fitted denominator must be stable; unstable roots that
// cancel against numerator zeros (within cancel_tol) are deflated away, and
// anything else throws NumericError naming the offending root.
// p0_scale doubles as an implicit ridge: when the requested order exceeds
// what the data pins down, the surplus poles shrink toward the origin
// instead of drifting across the unit circle, so keep it moderate.
FdneTf fdne_fit(const std::vector<std::pair<Complex, Complex>>& samples,
                int order, bool direct_term = true, double p0_scale = 1e6,
                double cancel_tol = 1e-5);

// True when every denominator root lies strictly inside the unit circle
// (with a small numerical margin).
bool fdne_stable(const FdneTf& tf, double margin = 1e-9);

// Deflate unstable pole/zero cancellations. Returns the (possibly reduced
// order) transfer function; throws when a genuinely unstable pole remains.
FdneTf fdne_stabilize(const FdneTf& tf, double cancel_tol = 1e-5);

// One evaluation step of the recursion. hist holds the port's past values.
Complex fdne_step(const FdneTf& tf, TfState<Complex>& hist, Complex v_k);

// Multi-port FDNE: an m x m matrix of channels, entry (i,j) mapping the
// voltage at port j to a current contribution at port i; all entries share
// one sample period.
struct FdneSet {
  int ports = 0;
  double dt = 1e-3;
  std::vector<FdneTf> tf;  // row-major m x m
  std::vector<double> fit_error;  // relative response error per entry

  const FdneTf& at(int i, int j) const { return tf[i * ports + j]; }
  FdneTf& at(int i, int j) { return tf[i * ports + j]; }

  Eigen::MatrixXcd dc_gain() const;       // H(z = 1), m x m
  Eigen::MatrixXcd direct_gain() const;   // b0 matrix, m x m
};

// Runtime evaluation state of a multi-port FDNE, in Norton companion form:
// i(k) = B0 v(k) + hist(k), where hist(k) depends only on past samples. The
// engine folds B0 into the nodal matrix and uses hist as a current source,
// which keeps the network solve free of an algebraic loop.
class FdneRuntime {
 public:
  explicit FdneRuntime(const FdneSet& set);

  // History current: the part of i(k) already fixed by past samples.
  Eigen::VectorXcd history_current() const;

  // Complete step k: record the solved port voltages, return the full
  // current i(k) = B0 v(k) + hist(k) and advance the histories.
  Eigen::VectorXcd advance(const Eigen::VectorXcd& v_k);

  // Preload every channel with a steady state: v == v0 for all past k,
  // currents at the channel's DC response.
  void init_steady(const Eigen::VectorXcd& v0);

  const FdneSet& set() const { return set_; }

 private:
  FdneSet set_;
  std::vector<TfState<Complex>> hist_;  // per entry, row-major
};

// Frequency sweep of an external network seen from its boundary ports, in
// the deviation-frequency (dynamic phasor) frame: for each tone nu (Hz,
// deviation from the fundamental, may be negative) the response matrix is
// the boundary-port admittance of the source-shorted external network at
// omega_rel = 1 + nu / f_hz, Kron-reduced to the ports.
struct SweepPoint {
  double nu_hz;
  Eigen::MatrixXcd h;  // ports x ports
};

// ext: the external network including boundary-port buses; machines are
// shorted sources (their xdp stays as a passive branch to ground).
// Tones: 0 and +/- log-spaced between nu_min and nu_max.
std::vector<SweepPoint> fdne_sweep(const NetworkModel& ext,
                                   const std::vector<int>& port_buses,
                                   double nu_min_hz, double nu_max_hz,
                                   int tones_per_decade);

// Synthesize multi-tone time series from a sweep and fit every port pair.
// Voltage excitation is applied one port at a time; deterministic phases.
// Raises the order (up to max_order) until the worst relative response
// error over the sweep is below err_target.
FdneSet fdne_fit_sweep(const std::vector<SweepPoint>& sweep, double dt,
                       int order, int max_order = 20,
                       double err_target = 0.01);

}  // namespace windstr
