#include "windstr/str_pid.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace windstr {

std::array<double, 3> shifted_target(double a1, double a2, double alpha) {
  return {alpha * (1.0 + a1), alpha * alpha * (a1 + a2),
          a2 * alpha * alpha * alpha};
}

RstDesign solve_rst(const SecondOrderModel& m, double alpha, double ts) {
  if (alpha < 0.0 || alpha > 1.0)
    throw ConfigError("solve_rst: alpha must lie in [0, 1]");
  if (!(ts > 0.0)) throw ConfigError("solve_rst: ts must be > 0");

  const auto [t1, t2, t3] = shifted_target(m.a1, m.a2, alpha);

  // A R + B S with R = (1 - q^-1)(1 + r1 q^-1), unknowns (r1, s0, s1, s2).
  // Matching q^-1..q^-4 coefficients of the closed-loop polynomial:
  //   q^-1:        r1 + b1 s0                      = t1 + 1 - a1
  //   q^-2: (a1-1) r1 + b2 s0 + b1 s1              = t2 + a1 - a2
  //   q^-3: (a2-a1) r1 +         b2 s1 + b1 s2     = t3 + a2
  //   q^-4:   -a2  r1 +                  b2 s2     = 0
  Eigen::Matrix4d A;
  A << 1.0, m.b1, 0.0, 0.0,                //
      m.a1 - 1.0, m.b2, m.b1, 0.0,         //
      m.a2 - m.a1, 0.0, m.b2, m.b1,        //
      -m.a2, 0.0, 0.0, m.b2;
  Eigen::Vector4d rhs(t1 + 1.0 - m.a1, t2 + m.a1 - m.a2, t3 + m.a2, 0.0);

  Eigen::FullPivLU<Eigen::Matrix4d> lu(A);
  if (!lu.isInvertible())
    throw NumericError("solve_rst: singular design system (uncontrollable model?)");
  const Eigen::Vector4d sol = lu.solve(rhs);

  RstDesign d;
  d.alpha = alpha;
  d.ts = ts;
  d.r1 = sol(0);
  d.s0 = sol(1);
  d.s1 = sol(2);
  d.s2 = sol(3);
  const auto [kp, ki, kd] = pid_gains(d.r1, d.s0, d.s1, d.s2, ts);
  d.kp_gain = kp;
  d.ki_gain = ki;
  d.kd_gain = kd;
  return d;
}

std::array<double, 3> pid_gains(double r1, double s0, double s1, double s2,
                                double ts) {
  if (!(ts > 0.0)) throw ConfigError("pid_gains: ts must be > 0");
  const double den = 1.0 + r1;
  if (den == 0.0)
    throw NumericError("pid_gains: degenerate design, 1 + r1 = 0");
  const double ki = (s0 + s1 + s2) / ts;
  const double kp = -(s1 + 2.0 * s2) / den;
  const double kd = ts * ((1.0 - r1) * s2 - r1 * s1) / den;
  return {kp, ki, kd};
}

std::array<double, 3> s_from_pid(double kp, double ki, double kd, double ts,
                                 double r1) {
  const double s0 = ts * ki + kd / ts + kp;
  const double s1 = -2.0 * kd / ts - kp + r1 * kp;
  const double s2 = kd / ts - r1 * kp;
  return {s0, s1, s2};
}

double control_step(const RstDesign& d, double e, ControlState& st,
                    double u_min, double u_max) {
  if (!std::isfinite(e)) {
    st.fault = true;
    return st.last;
  }
  const double raw = (1.0 - d.r1) * st.u1 + d.r1 * st.u2 + d.s0 * e +
                     d.s1 * st.e1 + d.s2 * st.e2;
  const double u = std::clamp(raw, u_min, u_max);
  const bool saturated = raw != u;
  if (!saturated || !st.windup_guard) {
    // Advance the difference-equation history. Without the guard the raw
    // (wound-up) value is stored, reproducing naive integrator wind-up.
    st.u2 = st.u1;
    st.u1 = st.windup_guard ? u : raw;
    st.e2 = st.e1;
    st.e1 = e;
  }
  // With the guard, a saturated step leaves the history frozen: the loop
  // re-evaluates against pre-saturation state until the error lets go.
  st.last = u;
  return u;
}

}  // namespace windstr
