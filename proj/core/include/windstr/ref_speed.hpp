#pragma once

#include "windstr/turbine.hpp"

namespace windstr {

// Phasor quantities at the turbine's point of common coupling and the bus it
// feeds, plus the reactance between them. Everything p.u./rad.
struct PccMeasurement {
  double v_pcc = 1.0;
  double v_b = 1.0;
  double delta_pcc = 0.0;
  double delta_b = 0.0;
  double x_line = 0.1;
};

// P = (V_pcc * V_b / X) * sin(delta_pcc - delta_b): real power flowing from
// the PCC toward the measured bus, i.e. the turbine's grid injection.
double electrical_power(const PccMeasurement& m);

// Sensorless reference-speed estimator: finds the rotor speed whose MPPT
// power equals the measured electrical power. The interface deliberately has
// no wind-speed input.
//
// The update iterates on the power imbalance normalized by the inertia-
// scaled speed slope of the previous iterates (a secant-like pass through
// the swing relation), which is singular as it converges; once the step
// shrinks below 10*tol the closed-form fixed point
//   omega = r_gear * (P_e / k_p)^(1/3)
// takes over. Both paths share the fixed point P_m(omega) = P_e.
class RefSpeedEstimator {
 public:
  struct Config {
    double inertia_j = 3.0;  // p.u.-consistent moment scale for the seed pass
    double dt = 1e-3;        // s, seed-pass step
    double tol = 1e-6;       // p.u.
    int max_iter = 100;
  };

  explicit RefSpeedEstimator(const Config& cfg, const TurbineParams& params);

  // Returns omega_ref in p.u., clamped to [0, rated_speed_pu]. p_e <= 0
  // clamps to 0. Sets fallback() when the iteration hit max_iter and the
  // closed form was substituted.
  double estimate(double p_e);

  bool fallback() const { return fallback_; }

 private:
  Config cfg_;
  TurbineParams params_;
  double omega_prev_;   // last converged estimate, seeds the next call
  bool fallback_ = false;
};

}  // namespace windstr
