#pragma once

#include <string>
#include <vector>

#include "windstr/fdne.hpp"
#include "windstr/network.hpp"

namespace windstr {

// One aggregated external machine behind its parallel transient reactance.
// Quantities are p.u. on the system base; the EMF phasor and mechanical
// power come from the boundary-matching solve at build time (and are matched
// again against the scenario's own operating point at run start).
struct ReducedMachine {
  std::string name;
  double h = 0.0;       // MW*s/MVA, system base
  double d = 0.0;       // damping, system base
  double xdp = 0.0;     // p.u., system base
  double rating_mva = 0.0;
  double e_mag = 1.0;
  double pm = 0.0;
  double delta0 = 0.0;  // rad
};

// External-area equivalent: slow phasor blocks (boundary ports x aggregate
// machine buses) driven by the aggregate swing machines, plus a
// frequency-dependent network equivalent for the fast network response at
// the boundary. The blocks come from Kron reduction of the aggregated
// external network with the machine admittances folded in, so the machine
// injection is the Norton current y_int * E.
struct ReducedGrid {
  std::string name;
  double mva_base = 100.0;
  double f_hz = 60.0;
  std::vector<int> boundary_buses;      // ids in the study network
  TsaBlocks tsa;                        // b = boundary, e = machine buses
  std::vector<ReducedMachine> machines; // one per column of y_be
  FdneSet fdne;                         // ports match boundary_buses order

  int ports() const { return static_cast<int>(boundary_buses.size()); }
  Complex machine_y(int i) const;  // 1 / (j xdp), system base

  void validate() const;  // block shapes, FDNE stability
};

struct ReduceOptions {
  double dt = 1e-3;           // FDNE sample period
  double nu_min_hz = 0.1;     // sweep band, deviation frequency
  double nu_max_hz = 400.0;   // capped below the 1/(2 dt) Nyquist band edge
  int tones_per_decade = 4;
  int fdne_order = 8;
  int fdne_max_order = 20;
  double fdne_err_target = 0.01;
  double powerflow_tol = 1e-9;
  int powerflow_iters = 20000;
};

// Build the external equivalent of `full`:
//  1. split off the external subnet (external-area buses + boundary ports);
//  2. frequency-sweep + fit the FDNE on the unaggregated subnet with the
//     machine EMFs shorted;
//  3. aggregate the coherent groups, fold the aggregate machine admittances
//     in, and Kron-reduce to boundary + machine buses;
//  4. solve the full model's pre-event power flow and match the aggregate
//     EMF phasors so the reduced boundary injection reproduces it exactly.
// Throws ConfigError for a model without external area / groups / boundary,
// NumericError when a reduction or fit step fails.
ReducedGrid build_reduced(const NetworkModel& full, const ReduceOptions& opts);

// Study-side remainder of a partitioned model: external-area buses, their
// branches, shunts and machines dropped; boundary buses stay.
NetworkModel study_subnet(const NetworkModel& full);

// External subnet used for sweeping/aggregation: external buses + boundary
// ports, only the branches/shunts/machines on the external side. The
// boundary buses are re-tagged as ports with no study-side elements.
NetworkModel external_subnet(const NetworkModel& full);

// Machine-only angle-relaxation power flow on a full model: iterates the
// machine internal angles until each electrical power matches its pm within
// tol (as far as the floating system allows), then reports the solved bus
// voltages, per-machine angles and exact electrical powers. Constant-current
// extra injections may be supplied per bus id.
struct PowerflowResult {
  Eigen::VectorXcd v;              // per model.buses
  std::vector<double> delta;       // per machine, rad
  std::vector<double> pe;          // per machine, p.u. system base
  double mismatch = 0.0;           // max |pm - pe| at exit
  int iters = 0;
};
PowerflowResult machine_powerflow(const NetworkModel& m, double tol = 1e-9,
                                  int max_iters = 20000);

}  // namespace windstr
