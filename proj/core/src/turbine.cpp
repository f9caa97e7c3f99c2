#include "windstr/turbine.hpp"

#include <algorithm>
#include <cmath>

namespace windstr {

double tip_speed_ratio(double radius, double omega_t, double v_wind) {
  if (v_wind <= 0.0)
    throw std::domain_error("tip_speed_ratio: wind speed must be positive");
  return radius * omega_t / v_wind;
}

double power_coefficient(const TurbineParams& p, double lambda, double beta) {
  const double den = lambda + 0.08 * beta;
  if (den == 0.0)
    throw std::domain_error("power_coefficient: lambda + 0.08*beta is zero");
  const double inv_li = 1.0 / den - 0.035 / (beta * beta * beta + 1.0);
  const double cp =
      p.c1 * (p.c2 * inv_li - p.c3 * beta - p.c4) * std::exp(-p.c5 * inv_li) +
      p.c6 * lambda;
  return std::max(cp, 0.0);
}

double power_coefficient(double lambda, double beta) {
  return power_coefficient(TurbineParams{}, lambda, beta);
}

double mechanical_power(const TurbineParams& p, double cp, double v_wind) {
  return cp * 0.5 * p.rho * p.area * v_wind * v_wind * v_wind;
}

double mppt_power(const TurbineParams& p, double omega_r) {
  const double w = omega_r / p.r_gear;
  return p.k_p * w * w * w;
}

double mppt_speed(const TurbineParams& p, double p_m) {
  return p.r_gear * std::cbrt(p_m / p.k_p);
}

CpPeak cp_peak(const TurbineParams& p) {
  // The peak depends only on c1..c6; memoize the last answer so the aero
  // hot path does not re-run the search every simulation step.
  struct Memo {
    double c[6];
    CpPeak peak;
    bool set = false;
  };
  thread_local Memo memo;
  const double c[6] = {p.c1, p.c2, p.c3, p.c4, p.c5, p.c6};
  if (memo.set && std::equal(std::begin(c), std::end(c), std::begin(memo.c)))
    return memo.peak;

  // Coarse scan to bracket the maximum, then golden-section refine.
  double best_l = 0.1, best = power_coefficient(p, 0.1, 0.0);
  for (double l = 0.2; l <= 20.0 + 1e-12; l += 0.1) {
    const double cp = power_coefficient(p, l, 0.0);
    if (cp > best) {
      best = cp;
      best_l = l;
    }
  }
  double a = std::max(best_l - 0.1, 1e-6), b = best_l + 0.1;
  constexpr double gr = 0.6180339887498949;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  while (b - a > 1e-12) {
    if (power_coefficient(p, x1, 0.0) > power_coefficient(p, x2, 0.0))
      b = x2;
    else
      a = x1;
    x1 = b - gr * (b - a);
    x2 = a + gr * (b - a);
  }
  const double lam = 0.5 * (a + b);
  memo.peak = {lam, power_coefficient(p, lam, 0.0)};
  std::copy(std::begin(c), std::end(c), std::begin(memo.c));
  memo.set = true;
  return memo.peak;
}

double lambda_of(const TurbineParams& p, double omega_r_pu, double v_wind) {
  const CpPeak pk = cp_peak(p);
  // Physical turbine speed base: the speed giving lambda_opt at rated wind.
  const double omega_t_base = pk.lambda * p.rated_wind / p.radius;
  const double omega_t = (omega_r_pu / p.r_gear) * omega_t_base;
  return tip_speed_ratio(p.radius, omega_t, v_wind);
}

double aero_power_pu(const TurbineParams& p, double omega_r_pu, double v_wind,
                     double beta) {
  if (v_wind <= 0.0) return 0.0;
  const CpPeak pk = cp_peak(p);
  const double lam = lambda_of(p, omega_r_pu, v_wind);
  const double cp = power_coefficient(p, lam, beta);
  const double vr = v_wind / p.rated_wind;
  return (cp / pk.cp) * vr * vr * vr;
}

double pitch_for_power(const TurbineParams& p, double omega_r_pu,
                       double v_wind, double p_target) {
  if (aero_power_pu(p, omega_r_pu, v_wind, p.pitch_min) <= p_target)
    return p.pitch_min;
  double lo = p.pitch_min, hi = p.pitch_max;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (aero_power_pu(p, omega_r_pu, v_wind, mid) > p_target)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

double pitch_actuator_step(double beta_now, double beta_cmd, double dt,
                           const TurbineParams& p) {
  const double max_move = p.pitch_rate_limit * dt;
  const double want = std::clamp(beta_cmd, p.pitch_min, p.pitch_max);
  const double move = std::clamp(want - beta_now, -max_move, max_move);
  return std::clamp(beta_now + move, p.pitch_min, p.pitch_max);
}

TurbineState drivetrain_step(const TurbineState& s, double p_m, double p_e,
                             double dt, const TurbineParams& p, int substeps) {
  if (dt <= 0.0) throw std::domain_error("drivetrain_step: dt must be > 0");
  if (substeps < 1) substeps = 1;
  const double h = dt / substeps;
  double omega = s.omega_r;
  for (int i = 0; i < substeps; ++i) {
    if (omega <= 1e-3)
      throw NumericError("drivetrain_step: rotor speed fell through floor");
    omega += h * (p_m - p_e) / (2.0 * p.inertia_h * omega);
  }
  TurbineState next = s;
  next.omega_r = omega;
  next.p_mech = p_m;
  next.torque_mech = p_m / omega;
  return next;
}

}  // namespace windstr
