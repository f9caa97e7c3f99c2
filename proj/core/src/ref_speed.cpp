#include "windstr/ref_speed.hpp"

#include <algorithm>
#include <cmath>

namespace windstr {

double electrical_power(const PccMeasurement& m) {
  if (!(m.x_line > 0.0))
    throw ConfigError("electrical_power: x_line must be > 0");
  return m.v_pcc * m.v_b / m.x_line * std::sin(m.delta_pcc - m.delta_b);
}

RefSpeedEstimator::RefSpeedEstimator(const Config& cfg,
                                     const TurbineParams& params)
    : cfg_(cfg), params_(params), omega_prev_(params.rated_speed_pu) {
  if (!(cfg.tol > 0.0)) throw ConfigError("ref_speed: tol must be > 0");
  if (cfg.max_iter < 1) throw ConfigError("ref_speed: max_iter must be >= 1");
}

double RefSpeedEstimator::estimate(double p_e) {
  fallback_ = false;
  if (p_e <= 0.0) {
    omega_prev_ = 0.0;
    return 0.0;
  }
  // A collapsed previous estimate (fault ride-through) restarts from rated;
  // near omega = 0 the power map has no slope to iterate on.
  double omega = omega_prev_ < 0.05 ? params_.rated_speed_pu : omega_prev_;

  // First pass: physical seed step through the inertia relation,
  // domega = dt * (P_e - P_m) / (J * omega).
  double p_m = mppt_power(params_, omega);
  double step = cfg_.dt * (p_e - p_m) / (cfg_.inertia_j * omega);
  omega = std::clamp(omega + step, 1e-3, params_.speed_limit_pu);

  bool converged = false;
  for (int it = 0; it < cfg_.max_iter; ++it) {
    if (std::abs(step) < 10.0 * cfg_.tol) {
      // The imbalance-over-slope form goes 0/0 here; the closed-form fixed
      // point finishes the job exactly.
      omega = mppt_speed(params_, p_e);
      converged = true;
      break;
    }
    // Newton step on f(omega) = k_p (omega/r)^3 - P_e.
    p_m = mppt_power(params_, omega);
    const double slope =
        3.0 * params_.k_p * omega * omega /
        (params_.r_gear * params_.r_gear * params_.r_gear);
    step = (p_e - p_m) / slope;
    omega = std::clamp(omega + step, 1e-3, params_.speed_limit_pu);
    if (std::abs(step) < cfg_.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    fallback_ = true;
    omega = mppt_speed(params_, p_e);
  }
  omega = std::clamp(omega, 0.0, params_.rated_speed_pu);
  omega_prev_ = omega;
  return omega;
}

}  // namespace windstr
