#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "windstr/ref_speed.hpp"
#include "windstr/rls.hpp"
#include "windstr/scenario.hpp"
#include "windstr/str_pid.hpp"

namespace windstr {

struct TurbineRecord {
  double omega_r = 0.0;    // p.u.
  double beta = 0.0;       // deg
  double p_mw = 0.0;       // realized electrical output, MW (all units)
  double torque = 0.0;     // mechanical torque, p.u.
  double omega_ref = 0.0;  // p.u.
  double kp = 0.0, ki = 0.0, kd = 0.0;  // active gains (on omega_ref - omega_r)
};

struct StepRecord {
  double time = 0.0;
  std::vector<double> v_mag;  // per simulated bus, p.u.
  std::vector<double> v_ang;  // rad
  std::vector<TurbineRecord> turbines;
  std::vector<double> gen_dw;  // per machine (study, then reduced), p.u.
};

struct SummaryMetrics {
  double max_omega_r = 0.0;
  double max_p_ratio = 0.0;     // P / rated
  double max_pitch_rate = 0.0;  // deg/s
  double max_torque = 0.0;      // p.u.
  double min_pcc_voltage = 1.0; // p.u., over turbine buses
  int speed_violations = 0;     // steps with omega_r > speed_limit_pu
  int power_violations = 0;     // steps with P > 1.05 rated
  int rate_violations = 0;      // steps with |dbeta/dt| > rate limit
};

struct RunResult {
  std::vector<std::string> columns;  // CSV header, parallel to row layout
  std::vector<StepRecord> records;
  SummaryMetrics summary;
};

// Phasor nodal solve I = Y V with constant-current sources plus
// constant-power injections iterated to convergence. `lu` factors the
// effective admittance (voltage-dependent admittance terms already folded
// in). cp_bus/cp_power/cp_imax describe the constant-power ports: power p.u.
// on the system base, current magnitude capped at cp_imax (converter
// limit). Throws NumericError on non-convergence.
Eigen::VectorXcd network_solve(const Eigen::FullPivLU<Eigen::MatrixXcd>& lu,
                               const Eigen::VectorXcd& i_const,
                               const std::vector<int>& cp_bus,
                               const std::vector<double>& cp_power,
                               const std::vector<double>& cp_imax,
                               Eigen::VectorXcd v_guess,
                               std::vector<Complex>* cp_current = nullptr,
                               double tol = 1e-8, int max_iters = 50);

// Deterministic fixed-step co-simulation of one scenario: study-area phasor
// network + swing machines at the simulation step, reduced external area
// (aggregate machines through the slow TSA interface, FDNE at the fast
// step), DFIG turbines with the sensorless adaptive pitch loop at the
// controller tick.
class CosimEngine {
 public:
  explicit CosimEngine(const Scenario& sc, ControlMode mode_override,
                       bool has_override);
  explicit CosimEngine(const Scenario& sc) : CosimEngine(sc, {}, false) {}

  // One simulation step: events, slow tick when due, network solve, plant
  // integration. Returns the record at the pre-integration time stamp.
  StepRecord step();

  double time() const { return double(k_) * sc_.dt; }
  int steps_total() const { return n_steps_; }
  const std::vector<std::string>& columns() const { return columns_; }

  // State peeks for tests.
  Complex bus_voltage(int bus_id) const;
  const TurbineState& turbine_state(int i) const { return turbines_[i].state; }
  double turbine_cmd(int i) const { return turbines_[i].beta_cmd; }

 private:
  struct GenState {
    double delta = 0.0, dw = 0.0;
    double pm = 0.0, pe = 0.0;
    double h = 0.0, d = 0.0;  // system base
    Complex e_drive;          // e_mag * exp(j delta) * y_int
    Complex y_int;
    int bus_row = 0;
    std::string name;
    double e_mag = 1.0;
  };
  struct TurbineRt {
    TurbineSpec spec;
    TurbineState state;
    std::vector<std::pair<double, WindSeries>> wind;  // (start time, series)
    RefSpeedEstimator est;
    RlsIdentifier<double> rls;
    RstDesign design;
    ControlState ctl;
    bool design_live = false;  // an identified design is active
    std::array<double, 4> beta_ring{};  // recent tick pitches (excitation gate)
    int beta_ring_n = 0;
    double beta_prev = 0.0, y_prev = 0.0;  // last tick's (u, y) for increments
    bool have_prev = false;
    std::uint32_t prbs = 1;  // probing-dither shift register
    int prbs_hold = 0;
    double dither = 0.0;
    double omega_ref = 1.0;
    double beta_cmd = 0.0;
    double p_elec = 0.0;     // converter-lagged power command, unit p.u.
    double p_realized = 0.0; // network-delivered power, unit p.u.
    double i_limit_sys = 0.0;
    double p_base_ratio = 0.0;  // system p.u. -> unit p.u. factor
    int bus_row = 0, meas_row = 0;
    TurbineRt(const TurbineSpec& s, const RefSpeedEstimator::Config& ec,
              const RlsIdentifier<double>::Config& rc)
        : spec(s), est(ec, s.params), rls(rc) {}
  };

  void init_turbines();
  void init_equilibrium();
  void slow_tick();
  void controller_tick(TurbineRt& t);
  double wind_at(const TurbineRt& t, double time) const;
  const Eigen::FullPivLU<Eigen::MatrixXcd>& lu_for_mask(std::uint64_t mask);
  Eigen::VectorXcd solve_now();
  Eigen::VectorXcd boundary_v(const Eigen::VectorXcd& v) const;
  void build_columns();

  Scenario sc_;
  ControlMode mode_;
  NetworkModel net_;  // the simulated (study) network
  int n_steps_ = 0, control_ratio_ = 1;
  long k_ = 0;

  std::vector<int> bus_ids_;               // row -> bus id
  std::map<int, int> row_of_;              // bus id -> row
  Eigen::MatrixXcd y_run_;                 // machines + FDNE B0 folded in
  std::map<std::uint64_t, std::unique_ptr<Eigen::FullPivLU<Eigen::MatrixXcd>>>
      lu_cache_;
  Eigen::VectorXcd v_;

  std::vector<GenState> gens_;      // study machines
  std::vector<GenState> ext_gens_;  // reduced aggregate machines
  std::vector<int> boundary_rows_;
  std::unique_ptr<FdneRuntime> fdne_;
  Eigen::VectorXcd i_corr_;   // TSA fundamental minus FDNE DC, slow-updated
  Eigen::MatrixXcd fdne_dc_;  // H(1)
  std::vector<TurbineRt> turbines_;

  std::vector<std::string> columns_;
};

// Run a scenario to completion (optionally forcing the controller mode).
RunResult run_scenario(const Scenario& sc);
RunResult run_scenario(const Scenario& sc, ControlMode mode);

// CSV of one run: header row with units, one row per step.
void write_run_csv(std::ostream& os, const RunResult& r);

// compare: the three controller modes on identical inputs. Failures are
// isolated per row.
struct CompareRow {
  ControlMode mode = ControlMode::kNone;
  bool failed = false;
  std::string error;
  SummaryMetrics summary;
  RunResult result;
};
std::vector<CompareRow> compare_modes(const Scenario& sc);

// Summary table of a comparison, one row per mode.
void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows);

}  // namespace windstr
