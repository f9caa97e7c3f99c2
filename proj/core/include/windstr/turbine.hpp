#pragma once

#include "windstr/errors.hpp"

namespace windstr {

// Aerodynamic, MPPT and drivetrain constants. Angles in degrees, rotor
// speeds in p.u. on the machine's own bases, wind in m/s. Defaults describe
// a 2.0 MW turbine behind a 2.2 MVA generator; the swept area is calibrated
// so that the rated power is extracted at rated wind with the peak Cp.
struct TurbineParams {
  // Cp(lambda, beta) surface constants of the standard exponential model.
  double c1 = 0.5176;
  double c2 = 116.0;
  double c3 = 0.4;
  double c4 = 5.0;
  double c5 = 21.0;
  double c6 = 0.0068;

  double rho = 1.225;        // air density, kg/m^3
  double area = 3936.66227;  // swept area, m^2 (rated power at 12 m/s, peak Cp)
  double radius = 35.398849; // rotor radius, m, consistent with `area`

  double k_p = 1.0;          // MPPT scaling factor, p.u.
  double r_gear = 1.2;       // generator p.u. speed per turbine p.u. speed

  // Lumped inertia constant, MW*s/MVA, expressed on the same power base as
  // the p.u. powers fed to drivetrain_step (the rated-power base here).
  double inertia_h = 1.65;

  double rated_wind = 12.0;  // m/s
  double cut_in = 6.0;       // m/s
  double cut_out = 25.0;     // m/s

  double rated_speed_pu = 1.2;  // generator speed at rated turbine speed
  double speed_limit_pu = 1.25; // protection bound, never a control target

  double pitch_min = 0.0;         // deg
  double pitch_max = 30.0;        // deg
  double pitch_rate_limit = 10.0; // deg/s

  double rated_power_w = 2.0e6;
};

struct TurbineState {
  double omega_r = 1.2;     // generator speed, p.u.
  double beta = 0.0;        // pitch angle, deg
  double p_mech = 0.0;      // mechanical power, p.u.
  double torque_mech = 0.0; // p_mech / omega_r, p.u.
};

// lambda = R * omega_t / v. omega_t is the physical turbine speed in rad/s.
// Throws std::domain_error for non-positive wind; callers gate on cut-in.
double tip_speed_ratio(double radius, double omega_t, double v_wind);

// Cp from the exponential surface, clamped below at 0 (negative values mean
// stall, not reverse extraction). Throws std::domain_error when the
// 1/(lambda + 0.08*beta) term blows up.
double power_coefficient(const TurbineParams& p, double lambda, double beta);
double power_coefficient(double lambda, double beta); // default constants

// P = Cp * (rho*A/2) * v^3, in watts.
double mechanical_power(const TurbineParams& p, double cp, double v_wind);

// MPPT characteristic P = k_p * (omega_r / r_gear)^3 and its inverse.
double mppt_power(const TurbineParams& p, double omega_r);
double mppt_speed(const TurbineParams& p, double p_m);

// Location and value of the Cp peak along beta = 0, found by a coarse grid
// scan refined with golden-section. Pure function of the constants.
struct CpPeak {
  double lambda;
  double cp;
};
CpPeak cp_peak(const TurbineParams& p);

// Tip-speed ratio for a generator p.u. speed at a given wind. The turbine
// p.u. speed is omega_r/r_gear; 1 p.u. turbine speed is the speed that gives
// the optimal lambda at rated wind.
double lambda_of(const TurbineParams& p, double omega_r_pu, double v_wind);

// Aerodynamic power in p.u. on the rated-power base:
//   P = [Cp(lambda, beta) / Cp_peak] * (v / v_rated)^3
// so that P = 1 exactly at (rated speed, rated wind, beta = 0).
double aero_power_pu(const TurbineParams& p, double omega_r_pu, double v_wind,
                     double beta);

// Smallest pitch angle in [pitch_min, pitch_max] with
// aero_power_pu(omega, v, beta) <= p_target; bisection. Used to start
// above-rated scenarios on the steady feathering branch.
double pitch_for_power(const TurbineParams& p, double omega_r_pu,
                       double v_wind, double p_target);

// One rate- and range-limited actuator step toward beta_cmd.
double pitch_actuator_step(double beta_now, double beta_cmd, double dt,
                           const TurbineParams& p);

// Lumped single-mass drivetrain: 2H * domega/dt = (P_m - P_e)/omega, p.u.
// Explicit Euler with an optional substep count. Throws NumericError when
// the rotor speed falls through the 1e-3 p.u. floor.
TurbineState drivetrain_step(const TurbineState& s, double p_m, double p_e,
                             double dt, const TurbineParams& p,
                             int substeps = 1);

}  // namespace windstr
