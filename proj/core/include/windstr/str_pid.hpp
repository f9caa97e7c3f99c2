#pragma once

#include <array>

#include "windstr/errors.hpp"

namespace windstr {

// Identified second-order strictly proper plant
//   B/A = (b1 q^-1 + b2 q^-2) / (1 + a1 q^-1 + a2 q^-2).
struct SecondOrderModel {
  double a1 = 0.0, a2 = 0.0, b1 = 0.0, b2 = 0.0;
};

// Pole-shifted RST design. R(q^-1) = (1 - q^-1)(1 + r1 q^-1) carries the
// integrator; S(q^-1) = s0 + s1 q^-1 + s2 q^-2 acts on the error (T = S).
struct RstDesign {
  double alpha = 0.9;  // pole-shift factor in [0, 1]
  double ts = 0.01;    // controller sample period, s
  double r1 = 0.0;
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  double kp_gain = 0.0, ki_gain = 0.0, kd_gain = 0.0;
};

// Coefficients (t1, t2, t3) of the shifted target polynomial
//   (1 + alpha q^-1)(1 + a1 alpha q^-1 + a2 alpha^2 q^-2):
// every open-loop pole is pulled toward the origin by the factor alpha and
// one extra pole lands at -alpha.
std::array<double, 3> shifted_target(double a1, double a2, double alpha);

// Solve A R + B S = 1 + t1 q^-1 + t2 q^-2 + t3 q^-3 + 0 q^-4 by matching
// coefficients of q^-1..q^-4 (the fourth closed-loop pole is placed at the
// origin). Throws NumericError when the 4x4 system is singular, e.g. for an
// uncontrollable model with b1 = b2 = 0. The returned design includes the
// extracted PID gains.
RstDesign solve_rst(const SecondOrderModel& m, double alpha, double ts);

// PID gains (kp, ki, kd) equivalent to the (r1, s0..s2) controller at sample
// period ts. Inverse of s_from_pid; throws on the degenerate 1 + r1 = 0.
std::array<double, 3> pid_gains(double r1, double s0, double s1, double s2,
                                double ts);

// s-polynomial coefficients of a PID with gains (kp, ki, kd) behind
// R = (1 - q^-1)(1 + r1 q^-1):
//   s0 = ts*ki + kd/ts + kp
//   s1 = -2 kd/ts - kp + r1*kp
//   s2 = kd/ts - r1*kp
std::array<double, 3> s_from_pid(double kp, double ki, double kd, double ts,
                                 double r1);

// Difference-equation state of one control loop. With windup_guard on, the
// histories freeze on any step whose raw output saturates, so the integrator
// does not wind past the actuator range.
struct ControlState {
  double u1 = 0.0, u2 = 0.0;  // u(k-1), u(k-2)
  double e1 = 0.0, e2 = 0.0;  // e(k-1), e(k-2)
  double last = 0.0;          // last emitted (clamped) command
  bool windup_guard = true;
  bool fault = false;  // set when a non-finite error sample was dropped

  // Bumpless start at a known steady command.
  void reset_at(double u0) {
    u1 = u2 = last = u0;
    e1 = e2 = 0.0;
    fault = false;
  }
};

// One controller tick: u(k) = (1-r1) u(k-1) + r1 u(k-2)
//                             + s0 e(k) + s1 e(k-1) + s2 e(k-2),
// clamped to [u_min, u_max]. A non-finite error holds the previous output
// and flags st.fault.
double control_step(const RstDesign& d, double e, ControlState& st,
                    double u_min, double u_max);

}  // namespace windstr
