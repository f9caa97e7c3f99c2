#include "windstr/reduced_grid.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace windstr {

Complex ReducedGrid::machine_y(int i) const {
  return 1.0 / Complex(0.0, machines[i].xdp);
}

void ReducedGrid::validate() const {
  const int nb = ports();
  const int nm = static_cast<int>(machines.size());
  if (nb == 0) throw ConfigError("reduced '" + name + "': no boundary ports");
  if (nm == 0) throw ConfigError("reduced '" + name + "': no machines");
  if (tsa.y_bb.rows() != nb || tsa.y_bb.cols() != nb ||
      tsa.y_be.rows() != nb || tsa.y_be.cols() != nm ||
      tsa.y_eb.rows() != nm || tsa.y_eb.cols() != nb ||
      tsa.y_ee.rows() != nm || tsa.y_ee.cols() != nm)
    throw ConfigError("reduced '" + name + "': inconsistent block shapes");
  for (const auto& m : machines) {
    if (!(m.xdp > 0.0))
      throw ConfigError("reduced machine '" + m.name + "': xdp must be > 0");
    if (!(m.h > 0.0))
      throw ConfigError("reduced machine '" + m.name + "': h must be > 0");
  }
  if (fdne.ports != nb)
    throw ConfigError("reduced '" + name + "': FDNE port count mismatch");
  for (const auto& tf : fdne.tf)
    if (!fdne_stable(tf))
      throw ConfigError("reduced '" + name + "': unstable FDNE channel");
}

namespace {

bool is_external(const Bus& b) { return b.area == "external"; }

std::set<int> external_bus_ids(const NetworkModel& m) {
  std::set<int> ids;
  for (const auto& b : m.buses)
    if (is_external(b)) ids.insert(b.id);
  return ids;
}

}  // namespace

NetworkModel study_subnet(const NetworkModel& full) {
  const std::set<int> ext = external_bus_ids(full);
  NetworkModel out;
  out.name = full.name;
  out.mva_base = full.mva_base;
  out.f_hz = full.f_hz;
  out.boundary_buses = full.boundary_buses;
  for (const auto& b : full.buses)
    if (!ext.count(b.id)) out.buses.push_back(b);
  for (const auto& br : full.branches)
    if (!ext.count(br.from) && !ext.count(br.to)) out.branches.push_back(br);
  for (const auto& sh : full.shunts)
    if (!ext.count(sh.bus)) out.shunts.push_back(sh);
  for (const auto& g : full.machines)
    if (!ext.count(g.bus)) out.machines.push_back(g);
  return out;
}

NetworkModel external_subnet(const NetworkModel& full) {
  const std::set<int> ext = external_bus_ids(full);
  std::set<int> keep = ext;
  for (int b : full.boundary_buses) {
    full.index_of(b);  // existence
    keep.insert(b);
  }
  NetworkModel out;
  out.name = full.name + "_external";
  out.mva_base = full.mva_base;
  out.f_hz = full.f_hz;
  out.boundary_buses = full.boundary_buses;
  out.coherent_groups = full.coherent_groups;
  for (const auto& b : full.buses)
    if (keep.count(b.id)) out.buses.push_back(b);
  // A branch belongs to the external side when it touches an external bus;
  // boundary-to-boundary branches (and boundary shunts) stay with the study.
  for (const auto& br : full.branches)
    if (ext.count(br.from) || ext.count(br.to)) out.branches.push_back(br);
  for (const auto& sh : full.shunts)
    if (ext.count(sh.bus)) out.shunts.push_back(sh);
  for (const auto& g : full.machines)
    if (ext.count(g.bus)) out.machines.push_back(g);
  return out;
}

PowerflowResult machine_powerflow(const NetworkModel& m, double tol,
                                  int max_iters) {
  const int n = static_cast<int>(m.buses.size());
  const int ng = static_cast<int>(m.machines.size());
  const Eigen::MatrixXcd y = assemble_admittance(m, 1.0, true);
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(y);
  if (!lu.isInvertible())
    throw NumericError("powerflow: singular admittance matrix");

  std::vector<double> delta(ng), slope(ng);
  std::vector<Complex> y_int(ng);
  std::vector<int> row(ng);
  for (int i = 0; i < ng; ++i) {
    const Machine& g = m.machines[i];
    delta[i] = g.delta0;
    y_int[i] = 1.0 / Complex(0.0, g.xdp);
    row[i] = m.index_of(g.bus);
    slope[i] = std::max(g.e_mag * g.e_mag / g.xdp, 1e-6);
  }

  PowerflowResult out;
  out.pe.assign(ng, 0.0);
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
  const double relax = 0.5;
  int it = 0;
  double mismatch = 0.0;
  for (; it < max_iters; ++it) {
    Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(n);
    for (int i = 0; i < ng; ++i)
      inj(row[i]) += y_int[i] * std::polar(m.machines[i].e_mag, delta[i]);
    v = lu.solve(inj);
    mismatch = 0.0;
    for (int i = 0; i < ng; ++i) {
      const Complex e = std::polar(m.machines[i].e_mag, delta[i]);
      const Complex i_gen = y_int[i] * (e - v(row[i]));
      out.pe[i] = std::real(e * std::conj(i_gen));
      if (i == 0) continue;  // machine 0 absorbs the system imbalance
      const double dp = m.machines[i].pm - out.pe[i];
      mismatch = std::max(mismatch, std::abs(dp));
      delta[i] += relax * dp / slope[i];
    }
    if (mismatch < tol) break;
  }
  out.v = std::move(v);
  out.delta = std::move(delta);
  out.mismatch = mismatch;
  out.iters = it;
  return out;
}

ReducedGrid build_reduced(const NetworkModel& full, const ReduceOptions& opts) {
  if (full.boundary_buses.empty())
    throw ConfigError("reduce '" + full.name + "': no boundary buses");
  const NetworkModel ext = external_subnet(full);
  if (ext.machines.empty())
    throw ConfigError("reduce '" + full.name + "': no external machines");
  if (full.coherent_groups.empty())
    throw ConfigError("reduce '" + full.name + "': no coherent groups");

  // Every external machine must land in exactly one group (overlap is
  // checked downstream by aggregate_coherent).
  std::set<std::string> grouped;
  for (const auto& g : full.coherent_groups)
    for (const auto& name : g) grouped.insert(name);
  for (const auto& g : ext.machines)
    if (!grouped.count(g.name))
      throw ConfigError("reduce '" + full.name + "': external machine '" +
                        g.name + "' not in any coherent group");
  for (const auto& g : full.machines)
    if (grouped.count(g.name) &&
        external_bus_ids(full).count(g.bus) == 0)
      throw ConfigError("reduce '" + full.name + "': grouped machine '" +
                        g.name + "' is not in the external area");
  // Partition sanity: a branch may cross areas only at a boundary bus.
  {
    const std::set<int> e = external_bus_ids(full);
    const std::set<int> bnd(full.boundary_buses.begin(),
                            full.boundary_buses.end());
    for (const auto& br : full.branches) {
      const bool fe = e.count(br.from), te = e.count(br.to);
      if (fe != te) {
        const int study_end = fe ? br.to : br.from;
        if (!bnd.count(study_end))
          throw ConfigError("reduce '" + full.name + "': branch " +
                            std::to_string(br.from) + "-" +
                            std::to_string(br.to) +
                            " crosses the area cut away from a boundary bus");
      }
    }
  }

  ReducedGrid out;
  out.name = full.name + "_reduced";
  out.mva_base = full.mva_base;
  out.f_hz = full.f_hz;
  out.boundary_buses = full.boundary_buses;

  // High-frequency equivalent first, on the unaggregated external subnet
  // (the aggregation step is exact only at the fundamental). Tones beyond
  // the runtime Nyquist band alias and cannot be represented, so the sweep
  // stops below it.
  const double nu_cap = std::min(opts.nu_max_hz, 0.45 / opts.dt);
  const auto sweep = fdne_sweep(ext, full.boundary_buses, opts.nu_min_hz,
                                nu_cap, opts.tones_per_decade);
  out.fdne = fdne_fit_sweep(sweep, opts.dt, opts.fdne_order,
                            opts.fdne_max_order, opts.fdne_err_target);

  // Slow equivalent: aggregate, fold the machine admittances in, reduce to
  // boundary ports + aggregate machine buses.
  const NetworkModel agg = aggregate_coherent(ext, full.coherent_groups);
  const Eigen::MatrixXcd y_agg = assemble_admittance(agg, 1.0, true);
  const int nb = static_cast<int>(full.boundary_buses.size());
  const int nm = static_cast<int>(agg.machines.size());
  std::vector<int> keep;
  for (int b : full.boundary_buses) keep.push_back(agg.index_of(b));
  for (const auto& g : agg.machines) keep.push_back(agg.index_of(g.bus));
  const Eigen::MatrixXcd y_red = kron_reduce(y_agg, keep);
  out.tsa.y_bb = y_red.topLeftCorner(nb, nb);
  out.tsa.y_be = y_red.topRightCorner(nb, nm);
  out.tsa.y_eb = y_red.bottomLeftCorner(nm, nb);
  out.tsa.y_ee = y_red.bottomRightCorner(nm, nm);

  for (const auto& g : agg.machines) {
    ReducedMachine rm;
    rm.name = g.name;
    rm.h = g.h;
    rm.d = g.d;
    rm.xdp = g.xdp;
    rm.rating_mva = g.rating_mva;
    out.machines.push_back(rm);
  }

  // Boundary matching: pick the aggregate EMF phasors so the reduced model
  // reproduces the full model's pre-event boundary currents exactly.
  const PowerflowResult pf =
      machine_powerflow(full, opts.powerflow_tol, opts.powerflow_iters);
  const Eigen::MatrixXcd y_ext = assemble_admittance(ext, 1.0, true);
  const int ne = static_cast<int>(ext.buses.size());
  Eigen::VectorXcd v_sub(ne);
  for (int i = 0; i < ne; ++i)
    v_sub(i) = pf.v(full.index_of(ext.buses[i].id));
  Eigen::VectorXcd v_b0(nb), i_b0(nb);
  {
    const Eigen::VectorXcd flow = y_ext * v_sub;
    for (int i = 0; i < nb; ++i) {
      const int r = ext.index_of(full.boundary_buses[i]);
      v_b0(i) = v_sub(r);
      i_b0(i) = flow(r);  // current the study side must inject (TSA sign)
    }
  }

  Eigen::FullPivLU<Eigen::MatrixXcd> lu_ee(out.tsa.y_ee);
  if (!lu_ee.isInvertible())
    throw NumericError("reduce: singular machine-side block");
  Eigen::MatrixXcd k_mat = out.tsa.y_be * lu_ee.solve(Eigen::MatrixXcd(
                               Eigen::MatrixXcd::Identity(nm, nm)));
  for (int j = 0; j < nm; ++j) k_mat.col(j) *= out.machine_y(j);
  const Eigen::MatrixXcd y_eq_bb =
      out.tsa.y_bb - out.tsa.y_be * lu_ee.solve(out.tsa.y_eb);
  const Eigen::VectorXcd rhs = i_b0 - y_eq_bb * v_b0;
  const Eigen::VectorXcd e_vec =
      k_mat.completeOrthogonalDecomposition().solve(rhs);

  Eigen::VectorXcd i_e(nm);
  for (int j = 0; j < nm; ++j) i_e(j) = out.machine_y(j) * e_vec(j);
  const Eigen::VectorXcd v_e = lu_ee.solve(i_e - out.tsa.y_eb * v_b0);
  for (int j = 0; j < nm; ++j) {
    out.machines[j].e_mag = std::abs(e_vec(j));
    out.machines[j].delta0 = std::arg(e_vec(j));
    const Complex i_gen = out.machine_y(j) * (e_vec(j) - v_e(j));
    out.machines[j].pm = std::real(e_vec(j) * std::conj(i_gen));
    if (!(out.machines[j].e_mag > 1e-3))
      throw NumericError("reduce: boundary matching produced a dead EMF on '" +
                         out.machines[j].name + "'");
  }

  out.validate();
  return out;
}

}  // namespace windstr
