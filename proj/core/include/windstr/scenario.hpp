#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "windstr/network.hpp"
#include "windstr/reduced_grid.hpp"
#include "windstr/turbine.hpp"
#include "windstr/wind.hpp"

namespace windstr {

// Pitch-controller selection for a run. kNone leaves the blades at their
// initial angle, kFixedPi uses the configured gains, kAdaptiveStr designs
// the gains online from the identified plant model.
enum class ControlMode { kNone, kFixedPi, kAdaptiveStr };

std::string mode_name(ControlMode m);
ControlMode mode_from_name(const std::string& s);  // throws ConfigError

// Fixed-gain baseline acting on the overspeed (omega_r - omega_ref); both
// gains are positive for a stabilizing loop. Shipped defaults are tuned at
// the rated operating point of the 2 MW machine.
struct PiGains {
  double kp = 120.0;
  double ki = 30.0;
};

struct ControllerCfg {
  ControlMode mode = ControlMode::kAdaptiveStr;
  double alpha = 0.9;        // pole-shift factor
  double forgetting = 0.98;  // RLS gamma
  double p0_scale = 1e6;     // RLS initial covariance
  PiGains pi;
};

// One wind turbine generator connected at `bus`, electrically measured
// against `meas_bus` across `x_line` (p.u. on the system base). `count`
// identical units are lumped into one injection; mva is the per-unit
// converter rating of one unit.
struct TurbineSpec {
  std::string name = "wtg";
  int bus = 0;
  int meas_bus = 0;
  double x_line = 0.1;
  int count = 1;
  double mva = 2.2;                 // one unit, MVA
  double current_limit_pu = 1.1;    // converter limit, p.u. on unit rating
  double converter_tau = 0.02;      // electrical power lag, s
  TurbineParams params;
  WindSpec wind;
};

// Bolted (or configurably soft) three-phase fault: a shunt conductance
// g_fault at `bus` during [time, time + duration].
struct FaultEvent {
  double time = 0.1;
  int bus = 0;
  double g_fault = 1.0e4;  // p.u.; large = bolted
  double duration = 0.1;   // s
};

// Wind profile swap: from `time` on, turbine `turbine` (index) follows the
// knots of `file` (CSV, times relative to the event time).
struct WindEvent {
  double time = 0.0;
  int turbine = 0;
  std::string file;
};

struct Scenario {
  std::string name = "scenario";
  NetworkModel network;               // study area, or the full system
  std::optional<ReducedGrid> reduced; // external equivalent, when reduced
  std::vector<TurbineSpec> turbines;
  ControllerCfg controller;
  std::vector<FaultEvent> faults;
  std::vector<WindEvent> wind_events;
  double dt = 1e-3;         // simulation step, s
  double control_dt = 1e-2; // controller / slow-interface tick, s
  double t_end = 10.0;      // s
  std::uint64_t seed = 1;   // turbulence seed

  void validate() const;  // throws ConfigError naming the offending field
};

}  // namespace windstr
