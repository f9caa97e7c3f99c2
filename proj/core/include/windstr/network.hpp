#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "windstr/errors.hpp"

namespace windstr {

using Complex = std::complex<double>;

// Bus area tags: "study" buses stay in the detailed model, "external" buses
// are reduced away. Boundary buses are listed separately in the model and
// belong to the study side; external branches terminate on them.
struct Bus {
  int id = 0;
  std::string name;
  std::string area = "study";
};

// Series r + jx with total line charging b (half at each end), p.u. on the
// system base. Reactances scale with frequency when the matrix is assembled
// off the fundamental.
struct Branch {
  int from = 0, to = 0;
  double r = 0.0, x = 0.0, b = 0.0;
};

// Fixed shunt (constant-impedance load or capacitor bank): g + jb at
// nominal frequency.
struct Shunt {
  int bus = 0;
  double g = 0.0, b = 0.0;
};

// Classical synchronous machine: constant EMF magnitude behind x'd.
// h and d are on the system MVA base.
struct Machine {
  std::string name;
  int bus = 0;
  double h = 0.0;          // inertia constant, MW*s/MVA (system base)
  double d = 0.0;          // damping, p.u. torque per p.u. speed (system base)
  double xdp = 0.0;        // transient reactance, p.u. (system base)
  double rating_mva = 0.0;
  double e_mag = 1.0;      // internal EMF magnitude, p.u.
  double pm = 0.0;         // mechanical power set-point, p.u. (system base)
  double delta0 = 0.0;     // initial internal angle, rad (solved or stored)
  double delta_offset = 0.0;  // test/disturbance knob applied after init
};

struct NetworkModel {
  std::string name;
  double mva_base = 100.0;
  double f_hz = 60.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Shunt> shunts;
  std::vector<Machine> machines;
  std::vector<std::vector<std::string>> coherent_groups;  // machine names
  std::vector<int> boundary_buses;                        // bus ids

  int index_of(int bus_id) const;        // throws ConfigError when absent
  const Machine& machine(const std::string& name) const;
  int max_bus_id() const;
};

// Nodal admittance matrix ordered like model.buses. omega_rel scales every
// reactance (branch x, line charging, shunt susceptance, machine xdp) to
// omega_rel times the fundamental; resistances and conductances are flat.
// include_machines folds each machine's 1/(j xdp) into its bus diagonal
// (Norton form). Duplicate branches accumulate; r = x = 0 is rejected.
Eigen::MatrixXcd assemble_admittance(const NetworkModel& m,
                                     double omega_rel = 1.0,
                                     bool include_machines = false);

// Kron reduction: Y_red = Y_kk - Y_ke Y_ee^-1 Y_ek where k is the kept index
// set (row/col positions in Y, preserving their order) and e is everything
// else. Exact for linear networks. Throws NumericError when the eliminated
// block is singular.
Eigen::MatrixXcd kron_reduce(const Eigen::MatrixXcd& y,
                             const std::vector<int>& keep);

// Replace each coherent group of machines by one aggregate machine on a new
// bus: inertia, damping, ratings and mechanical power add; internal
// admittances parallel (1/xdp sums); EMF magnitude is rating-weighted. All
// branches and shunts that touched a member terminal bus are re-terminated
// on the aggregate bus; branches entirely inside the group keep only their
// charging as a shunt. Groups must not overlap.
NetworkModel aggregate_coherent(const NetworkModel& m,
    const std::vector<std::vector<std::string>>& groups);

// Partitioned admittance blocks of a reduced external network:
// b = boundary ports, e = (aggregated) machine internal buses.
struct TsaBlocks {
  Eigen::MatrixXcd y_bb, y_be, y_eb, y_ee;
};

// Two-step phasor solve of the external area: eliminate the machine-side
// voltages V_e = Y_ee^-1 (I_e - Y_eb V_b), then report the boundary-port
// nodal current I_b = Y_bb V_b + Y_be V_e (the current the study side must
// inject to sustain V_b against the external area).
Eigen::VectorXcd tsa_step(const TsaBlocks& t, const Eigen::VectorXcd& v_b,
                          const Eigen::VectorXcd& i_e);

}  // namespace windstr
