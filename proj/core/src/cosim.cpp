#include "windstr/cosim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "windstr/csv.hpp"
#include "windstr/reduced_grid.hpp"

namespace windstr {

std::string mode_name(ControlMode m) {
  switch (m) {
    case ControlMode::kNone: return "none";
    case ControlMode::kFixedPi: return "pi";
    case ControlMode::kAdaptiveStr: return "str";
  }
  return "?";
}

ControlMode mode_from_name(const std::string& s) {
  if (s == "none") return ControlMode::kNone;
  if (s == "pi" || s == "fixed_pi") return ControlMode::kFixedPi;
  if (s == "str" || s == "adaptive_str") return ControlMode::kAdaptiveStr;
  throw ConfigError("unknown controller mode '" + s +
                    "' (expected none|pi|str)");
}

namespace {

double wind_base_at0(const WindSpec& w) {
  if (w.base.empty()) return 0.0;
  if (0.0 <= w.base.front().first) return w.base.front().second;
  for (size_t i = 1; i < w.base.size(); ++i) {
    if (w.base[i].first >= 0.0) {
      const auto& [t0, v0] = w.base[i - 1];
      const auto& [t1, v1] = w.base[i];
      return t1 == t0 ? v1 : v0 - (v1 - v0) * t0 / (t1 - t0);
    }
  }
  return w.base.back().second;
}

RstDesign pi_design(const PiGains& pi, double ts) {
  // The configured gains act on the overspeed omega_r - omega_ref; the
  // control law acts on e = omega_ref - omega_r, hence the sign flip.
  RstDesign d;
  d.alpha = 0.0;
  d.ts = ts;
  d.r1 = 0.0;
  const auto s = s_from_pid(-pi.kp, -pi.ki, 0.0, ts, 0.0);
  d.s0 = s[0];
  d.s1 = s[1];
  d.s2 = s[2];
  const auto g = pid_gains(d.r1, d.s0, d.s1, d.s2, ts);
  d.kp_gain = g[0];
  d.ki_gain = g[1];
  d.kd_gain = g[2];
  return d;
}

}  // namespace

void Scenario::validate() const {
  const std::string ctx = "scenario '" + name + "'";
  if (!(dt > 0.0)) throw ConfigError(ctx + ": dt must be > 0");
  if (t_end < dt) throw ConfigError(ctx + ": t_end must be >= dt");
  const double ratio = control_dt / dt;
  if (!(control_dt >= dt) || std::abs(ratio - std::lround(ratio)) > 1e-6)
    throw ConfigError(ctx + ": control_dt must be an integer multiple of dt");
  if (network.buses.empty()) throw ConfigError(ctx + ": empty network");

  const NetworkModel sim = reduced ? study_subnet(network) : network;
  if (sim.machines.empty() && !reduced)
    throw ConfigError(ctx + ": needs at least one machine or a reduced model");
  if (reduced)
    for (int b : reduced->boundary_buses) sim.index_of(b);

  for (const auto& t : turbines) {
    const std::string tc = ctx + " turbine '" + t.name + "'";
    sim.index_of(t.bus);
    sim.index_of(t.meas_bus);
    if (!(t.x_line > 0.0)) throw ConfigError(tc + ": x_line must be > 0");
    if (t.count < 1) throw ConfigError(tc + ": count must be >= 1");
    if (!(t.mva > 0.0)) throw ConfigError(tc + ": mva must be > 0");
    if (!(t.converter_tau > 0.0))
      throw ConfigError(tc + ": converter_tau must be > 0");
    if (!(t.params.rated_power_w > 0.0))
      throw ConfigError(tc + ": rated_power_w must be > 0");
    if (!(t.params.pitch_rate_limit > 0.0))
      throw ConfigError(tc + ": pitch_rate_limit must be > 0");
    if (t.wind.base.empty()) throw ConfigError(tc + ": empty wind profile");
    const double v0 = wind_base_at0(t.wind);
    if (v0 < t.params.cut_in || v0 > t.params.cut_out)
      throw ConfigError(tc + ": initial wind " + std::to_string(v0) +
                        " m/s is outside the cut-in/cut-out band");
    if (t.wind.turb_sigma < 0.0 || !(t.wind.turb_dt > 0.0) ||
        !(t.wind.turb_tau > 0.0))
      throw ConfigError(tc + ": bad turbulence parameters");
  }
  if (!(controller.alpha >= 0.0) || controller.alpha >= 1.0)
    throw ConfigError(ctx + ": controller.alpha must be in [0, 1)");
  if (!(controller.forgetting > 0.0) || controller.forgetting > 1.0)
    throw ConfigError(ctx + ": controller.forgetting must be in (0, 1]");
  if (!(controller.p0_scale > 0.0))
    throw ConfigError(ctx + ": controller.p0_scale must be > 0");
  for (const auto& f : faults) {
    if (f.time < 0.0 || f.time > t_end)
      throw ConfigError(ctx + ": fault time outside [0, t_end]");
    if (!(f.duration > 0.0)) throw ConfigError(ctx + ": fault duration <= 0");
    if (!(f.g_fault > 0.0)) throw ConfigError(ctx + ": fault admittance <= 0");
    sim.index_of(f.bus);
  }
  for (const auto& w : wind_events) {
    if (w.time < 0.0 || w.time > t_end)
      throw ConfigError(ctx + ": wind event time outside [0, t_end]");
    if (w.turbine < 0 || w.turbine >= static_cast<int>(turbines.size()))
      throw ConfigError(ctx + ": wind event turbine index out of range");
  }
}

Eigen::VectorXcd network_solve(const Eigen::FullPivLU<Eigen::MatrixXcd>& lu,
                               const Eigen::VectorXcd& i_const,
                               const std::vector<int>& cp_bus,
                               const std::vector<double>& cp_power,
                               const std::vector<double>& cp_imax,
                               Eigen::VectorXcd v_guess,
                               std::vector<Complex>* cp_current, double tol,
                               int max_iters) {
  if (cp_bus.empty()) {
    if (cp_current) cp_current->clear();
    return lu.solve(i_const);
  }
  const int n = static_cast<int>(i_const.size());
  Eigen::VectorXcd v = v_guess.size() == n ? std::move(v_guess)
                                           : Eigen::VectorXcd::Zero(n).eval();
  std::vector<Complex> cur(cp_bus.size(), Complex(0.0, 0.0));
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXcd inj = i_const;
    for (size_t k = 0; k < cp_bus.size(); ++k) {
      const Complex vb = v(cp_bus[k]);
      const double vm = std::abs(vb);
      Complex i(0.0, 0.0);
      if (vm > 1e-6) {
        const double mag = std::min(std::abs(cp_power[k]) / vm, cp_imax[k]);
        i = std::copysign(mag, cp_power[k]) * vb / vm;  // unity power factor
      }
      cur[k] = i;
      inj(cp_bus[k]) += i;
    }
    const Eigen::VectorXcd v_next = lu.solve(inj);
    const double diff = (v_next - v).lpNorm<Eigen::Infinity>();
    v = v_next;
    if (diff < tol) {
      if (cp_current) *cp_current = cur;
      return v;
    }
  }
  throw NumericError("network_solve: constant-power iteration did not "
                     "converge");
}

CosimEngine::CosimEngine(const Scenario& sc, ControlMode mode_override,
                         bool has_override)
    : sc_(sc), mode_(has_override ? mode_override : sc.controller.mode) {
  sc_.validate();
  net_ = sc_.reduced ? study_subnet(sc_.network) : sc_.network;
  if (sc_.reduced) sc_.reduced->validate();

  n_steps_ = static_cast<int>(std::max<long>(1, std::lround(sc_.t_end / sc_.dt)));
  control_ratio_ =
      static_cast<int>(std::max<long>(1, std::lround(sc_.control_dt / sc_.dt)));

  const int n = static_cast<int>(net_.buses.size());
  bus_ids_.resize(n);
  for (int i = 0; i < n; ++i) {
    bus_ids_[i] = net_.buses[i].id;
    row_of_[net_.buses[i].id] = i;
  }
  y_run_ = assemble_admittance(net_, 1.0, true);

  for (const auto& m : net_.machines) {
    GenState g;
    g.name = m.name;
    g.h = m.h;
    g.d = m.d;
    g.pm = m.pm;
    g.e_mag = m.e_mag;
    g.delta = m.delta0;
    g.y_int = 1.0 / Complex(0.0, m.xdp);
    g.bus_row = row_of_.at(m.bus);
    g.e_drive = g.y_int * std::polar(g.e_mag, g.delta);
    gens_.push_back(g);
  }

  if (sc_.reduced) {
    const ReducedGrid& rg = *sc_.reduced;
    for (int b : rg.boundary_buses) boundary_rows_.push_back(row_of_.at(b));
    for (size_t i = 0; i < rg.machines.size(); ++i) {
      const ReducedMachine& m = rg.machines[i];
      GenState g;
      g.name = m.name;
      g.h = m.h;
      g.d = m.d;
      g.pm = m.pm;
      g.e_mag = m.e_mag;
      g.delta = m.delta0;
      g.y_int = rg.machine_y(static_cast<int>(i));
      g.e_drive = g.y_int * std::polar(g.e_mag, g.delta);
      ext_gens_.push_back(g);
    }
    fdne_ = std::make_unique<FdneRuntime>(rg.fdne);
    fdne_dc_ = rg.fdne.dc_gain();
    const Eigen::MatrixXcd b0 = rg.fdne.direct_gain();
    const int nb = rg.ports();
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j)
        y_run_(boundary_rows_[i], boundary_rows_[j]) += b0(i, j);
    i_corr_ = Eigen::VectorXcd::Zero(nb);
  }

  init_turbines();
  init_equilibrium();
  build_columns();
}

void CosimEngine::init_turbines() {
  RefSpeedEstimator::Config est_cfg;
  est_cfg.dt = sc_.control_dt;
  RlsIdentifier<double>::Config rls_cfg;
  rls_cfg.order = 2;
  rls_cfg.direct_term = false;
  rls_cfg.forgetting = sc_.controller.forgetting;
  rls_cfg.p0_scale = sc_.controller.p0_scale;

  for (size_t i = 0; i < sc_.turbines.size(); ++i) {
    const TurbineSpec& spec = sc_.turbines[i];
    TurbineRt t(spec, est_cfg, rls_cfg);
    t.bus_row = row_of_.at(spec.bus);
    t.meas_row = row_of_.at(spec.meas_bus);
    const double rated_mw = spec.params.rated_power_w * 1e-6;
    t.p_base_ratio = net_.mva_base / (spec.count * rated_mw);
    t.i_limit_sys =
        spec.current_limit_pu * (spec.count * spec.mva) / net_.mva_base;
    t.prbs = static_cast<std::uint32_t>(sc_.seed * 2654435761u +
                                        40503u * (i + 1)) | 1u;
    t.wind.push_back({-1.0, WindSeries(spec.wind, sc_.t_end,
                                       sc_.seed + 101 * (i + 1))});
    for (size_t e = 0; e < sc_.wind_events.size(); ++e) {
      const WindEvent& ev = sc_.wind_events[e];
      if (ev.turbine != static_cast<int>(i)) continue;
      WindSpec w = spec.wind;
      w.base = load_wind_csv(ev.file);
      for (auto& knot : w.base) knot.first += ev.time;
      t.wind.push_back({ev.time, WindSeries(w, sc_.t_end,
                                            sc_.seed + 101 * (i + 1) +
                                                1000 * (e + 1))});
    }
    std::stable_sort(t.wind.begin(), t.wind.end(),
                     [](const auto& a, const auto& b) {
                       return a.first < b.first;
                     });
    turbines_.push_back(std::move(t));
  }
}

double CosimEngine::wind_at(const TurbineRt& t, double time) const {
  const WindSeries* s = &t.wind.front().second;
  for (const auto& [start, series] : t.wind)
    if (start <= time) s = &series;
  return s->at(time);
}

void CosimEngine::init_equilibrium() {
  // Mechanical side: the MPPT operating point of the initial wind. Above
  // rated the blades start on the feathering branch carrying exactly rated
  // power at rated speed.
  for (auto& t : turbines_) {
    const TurbineParams& p = t.spec.params;
    const double v0 = wind_at(t, 0.0);
    if (v0 >= p.rated_wind) {
      t.state.omega_r = p.rated_speed_pu;
      t.state.beta = pitch_for_power(p, t.state.omega_r, v0, 1.0);
    } else {
      t.state.omega_r = p.rated_speed_pu * (v0 / p.rated_wind);
      t.state.beta = p.pitch_min;
    }
    t.p_elec = std::min(mppt_power(p, t.state.omega_r), 1.0);
    t.p_realized = t.p_elec;
    t.beta_cmd = t.state.beta;
    t.ctl.reset_at(t.state.beta);
    t.design = pi_design(sc_.controller.pi, sc_.control_dt);
    t.design.alpha = sc_.controller.alpha;
    t.state.p_mech = t.p_elec;
    t.state.torque_mech = t.state.omega_r > 1e-3
                              ? t.state.p_mech / t.state.omega_r
                              : 0.0;
  }

  // Electrical side: relax the machine angles against their mechanical
  // set-points around the nodal solve, then adopt the solved electrical
  // powers as the exact equilibrium inputs. Without a reduced area the
  // first machine absorbs the configured imbalance (slack); with one, the
  // fixed external EMFs absorb it through the boundary.
  const int n = static_cast<int>(net_.buses.size());
  Eigen::MatrixXcd y_init = assemble_admittance(net_, 1.0, true);
  Eigen::VectorXcd i_ext_drive = Eigen::VectorXcd::Zero(n);
  Eigen::MatrixXcd y_eq_bb, k_mat;
  std::unique_ptr<Eigen::FullPivLU<Eigen::MatrixXcd>> lu_ee;
  if (sc_.reduced) {
    const ReducedGrid& rg = *sc_.reduced;
    const int nb = rg.ports();
    const int nm = static_cast<int>(rg.machines.size());
    lu_ee = std::make_unique<Eigen::FullPivLU<Eigen::MatrixXcd>>(rg.tsa.y_ee);
    if (!lu_ee->isInvertible())
      throw NumericError("cosim init: singular reduced machine block");
    y_eq_bb = rg.tsa.y_bb - rg.tsa.y_be * lu_ee->solve(rg.tsa.y_eb);
    k_mat = rg.tsa.y_be *
            lu_ee->solve(Eigen::MatrixXcd(Eigen::MatrixXcd::Identity(nm, nm)));
    Eigen::VectorXcd e_vec(nm);  // Norton currents y_int * E
    for (int j = 0; j < nm; ++j) e_vec(j) = ext_gens_[j].e_drive;
    const Eigen::VectorXcd drive = k_mat * e_vec;
    for (int i = 0; i < nb; ++i) {
      for (int j2 = 0; j2 < nb; ++j2)
        y_init(boundary_rows_[i], boundary_rows_[j2]) += y_eq_bb(i, j2);
      i_ext_drive(boundary_rows_[i]) -= drive(i);
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(y_init);
  if (!lu.isInvertible())
    throw NumericError("cosim init: singular admittance matrix");

  std::vector<int> cp_bus;
  std::vector<double> cp_power, cp_imax;
  for (const auto& t : turbines_) {
    cp_bus.push_back(t.bus_row);
    cp_power.push_back(t.p_elec / t.p_base_ratio);
    cp_imax.push_back(t.i_limit_sys);
  }

  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
  const double relax = 0.5;
  const double tol = 1e-11;
  const bool has_slack = !sc_.reduced && !gens_.empty();
  for (int it = 0; it < 20000; ++it) {
    Eigen::VectorXcd inj = i_ext_drive;
    for (const auto& g : gens_) inj(g.bus_row) += g.e_drive;
    v = network_solve(lu, inj, cp_bus, cp_power, cp_imax, v, nullptr, 1e-12,
                      100);
    double mismatch = 0.0;
    for (size_t i = 0; i < gens_.size(); ++i) {
      GenState& g = gens_[i];
      const Complex e = std::polar(g.e_mag, g.delta);
      const Complex i_gen = g.y_int * (e - v(g.bus_row));
      g.pe = std::real(e * std::conj(i_gen));
      if (has_slack && i == 0) continue;
      const double dp = g.pm - g.pe;
      mismatch = std::max(mismatch, std::abs(dp));
      g.delta += relax * dp / std::max(g.e_mag * g.e_mag * std::abs(g.y_int),
                                       1e-6);
      g.e_drive = g.y_int * std::polar(g.e_mag, g.delta);
    }
    if (mismatch < tol) break;
  }
  // Exactness: whatever the relaxation delivered is adopted as the
  // equilibrium, so every shipped scenario starts with zero derivatives.
  for (auto& g : gens_) g.pm = g.pe;
  v_ = v;

  if (sc_.reduced) {
    const ReducedGrid& rg = *sc_.reduced;
    const int nb = rg.ports();
    const int nm = static_cast<int>(rg.machines.size());
    Eigen::VectorXcd v_b(nb);
    for (int i = 0; i < nb; ++i) v_b(i) = v_(boundary_rows_[i]);
    Eigen::VectorXcd i_e(nm);
    for (int j = 0; j < nm; ++j) i_e(j) = ext_gens_[j].e_drive;
    const Eigen::VectorXcd v_e = lu_ee->solve(i_e - rg.tsa.y_eb * v_b);
    for (int j = 0; j < nm; ++j) {
      GenState& g = ext_gens_[j];
      const Complex e = std::polar(g.e_mag, g.delta);
      g.pe = std::real(e * std::conj(g.y_int * (e - v_e(j))));
      g.pm = g.pe;
    }
    const Eigen::VectorXcd i_b = rg.tsa.y_bb * v_b + rg.tsa.y_be * v_e;
    i_corr_ = i_b - fdne_dc_ * v_b;
    fdne_->init_steady(v_b);
  }

  // Disturbance knob: angle offsets go in only after the matching above, so
  // they perturb an otherwise exact equilibrium (applied earlier they would
  // either be relaxed away or re-adopted as the operating point).
  for (size_t i = 0; i < gens_.size(); ++i) {
    const double off = net_.machines[i].delta_offset;
    if (off == 0.0) continue;
    gens_[i].delta += off;
    gens_[i].e_drive =
        gens_[i].y_int * std::polar(gens_[i].e_mag, gens_[i].delta);
  }
}

const Eigen::FullPivLU<Eigen::MatrixXcd>& CosimEngine::lu_for_mask(
    std::uint64_t mask) {
  auto it = lu_cache_.find(mask);
  if (it != lu_cache_.end()) return *it->second;
  Eigen::MatrixXcd y = y_run_;
  for (size_t f = 0; f < sc_.faults.size(); ++f)
    if (mask & (std::uint64_t(1) << f))
      y(row_of_.at(sc_.faults[f].bus), row_of_.at(sc_.faults[f].bus)) +=
          sc_.faults[f].g_fault;
  auto lu = std::make_unique<Eigen::FullPivLU<Eigen::MatrixXcd>>(y);
  if (!lu->isInvertible())
    throw NumericError("cosim: singular effective admittance matrix");
  return *lu_cache_.emplace(mask, std::move(lu)).first->second;
}

Eigen::VectorXcd CosimEngine::boundary_v(const Eigen::VectorXcd& v) const {
  Eigen::VectorXcd v_b(boundary_rows_.size());
  for (size_t i = 0; i < boundary_rows_.size(); ++i)
    v_b(i) = v(boundary_rows_[i]);
  return v_b;
}

void CosimEngine::slow_tick() {
  if (fdne_) {
    const ReducedGrid& rg = *sc_.reduced;
    const int nm = static_cast<int>(ext_gens_.size());
    const Eigen::VectorXcd v_b = boundary_v(v_);
    Eigen::VectorXcd i_e(nm);
    for (int j = 0; j < nm; ++j) i_e(j) = ext_gens_[j].e_drive;
    Eigen::FullPivLU<Eigen::MatrixXcd> lu_ee(rg.tsa.y_ee);
    const Eigen::VectorXcd v_e = lu_ee.solve(i_e - rg.tsa.y_eb * v_b);
    const Eigen::VectorXcd i_b = rg.tsa.y_bb * v_b + rg.tsa.y_be * v_e;
    i_corr_ = i_b - fdne_dc_ * v_b;
    const double h = sc_.control_dt;
    const double w_s = 2.0 * M_PI * net_.f_hz;
    for (int j = 0; j < nm; ++j) {
      GenState& g = ext_gens_[j];
      const Complex e = std::polar(g.e_mag, g.delta);
      g.pe = std::real(e * std::conj(g.y_int * (e - v_e(j))));
      g.dw += h * (g.pm - g.pe - g.d * g.dw) / (2.0 * g.h);
      g.delta += h * w_s * g.dw;
      g.e_drive = g.y_int * std::polar(g.e_mag, g.delta);
    }
  }
  for (auto& t : turbines_) controller_tick(t);
}

void CosimEngine::controller_tick(TurbineRt& t) {
  PccMeasurement m;
  m.v_pcc = std::abs(v_(t.bus_row));
  m.v_b = std::abs(v_(t.meas_row));
  m.delta_pcc = std::arg(v_(t.bus_row));
  m.delta_b = std::arg(v_(t.meas_row));
  m.x_line = t.spec.x_line;
  const double p_e = electrical_power(m) * t.p_base_ratio;
  t.omega_ref = t.est.estimate(p_e);

  if (mode_ == ControlMode::kAdaptiveStr) {
    // Adaptation runs only while the pitch input actually moves. Updating
    // through rail-pinned or trimmed stretches feeds the identifier no new
    // information while the forgetting factor unlearns the old — covariance
    // windup — and the first updates after such a stretch then jump wildly.
    t.beta_ring[t.beta_ring_n++ % t.beta_ring.size()] = t.state.beta;
    const auto [lo, hi] = std::minmax_element(t.beta_ring.begin(),
                                              t.beta_ring.end());
    // ... and only while the grid looks normal: through a voltage dip the
    // speed responds to the fault, not to the blades, and a model fitted to
    // that window is plausible-looking garbage.
    const bool excited =
        t.beta_ring_n >= static_cast<int>(t.beta_ring.size()) &&
        *hi - *lo >= 0.02 && m.v_pcc >= 0.85 && m.v_pcc <= 1.15;
    // Identify on increments: the transfer function Δβ → Δ(ω error) is the
    // same as β → error, but differencing removes the wind trend, which
    // otherwise dwarfs the blade effect and biases the estimate.
    const double y = t.state.omega_r - t.omega_ref;
    if (excited && t.have_prev)
      t.rls.update(t.state.beta - t.beta_prev, y - t.y_prev);
    t.beta_prev = t.state.beta;
    t.y_prev = y;
    t.have_prev = true;
    if (excited && t.rls.ready()) {
      const auto tf = t.rls.identified_model();
      SecondOrderModel sm{tf.a[0], tf.a[1], tf.b[1], tf.b[2]};
      // The physical plant gain is negative (pitching up sheds power) and
      // of meaningful size. Near-zero or positive identified gain means the
      // data is not informative, and a pole-placement design against it
      // would divide by that gain; the previous design stays in force.
      if (sm.b1 + sm.b2 < -1e-7) {
        try {
          RstDesign d = solve_rst(sm, sc_.controller.alpha, sc_.control_dt);
          // Structural checks on the result: a blade-pitch loop must pitch
          // up when the rotor is fast (s0 and the velocity gain S(1) both
          // negative), and even a full-range blade move is a few tens of
          // degrees, so very large coefficients can only come from a
          // spurious identification.
          const double mag = std::max({std::abs(d.s0), std::abs(d.s1),
                                       std::abs(d.s2), std::abs(d.r1)});
          if (std::isfinite(mag) && mag <= 1e4 && d.s0 < 0.0 &&
              d.s0 + d.s1 + d.s2 < 0.0) {
            t.design = d;
            t.design_live = true;
          }
        } catch (const NumericError&) {
          // singular design system: keep the previous gains
        }
      }
    }
  }
  if (mode_ == ControlMode::kNone) return;  // blades stay put
  const double e = t.omega_ref - t.state.omega_r;
  t.beta_cmd = control_step(t.design, e, t.ctl, t.spec.params.pitch_min,
                            t.spec.params.pitch_max);
  if (mode_ == ControlMode::kAdaptiveStr) {
    // Probing dither: a short-hold ±0.05° PRBS on the pitch command keeps
    // the loop identifiable — without an input component that is
    // independent of the feedback path, closed-loop data cannot separate
    // the plant from the controller's own inverse.
    if (++t.prbs_hold >= 3) {
      t.prbs_hold = 0;
      t.prbs ^= t.prbs << 13;
      t.prbs ^= t.prbs >> 17;
      t.prbs ^= t.prbs << 5;
      t.dither = (t.prbs & 1u) ? 0.05 : -0.05;
    }
    t.beta_cmd = std::clamp(t.beta_cmd + t.dither, t.spec.params.pitch_min,
                            t.spec.params.pitch_max);
  }
}

Eigen::VectorXcd CosimEngine::solve_now() {
  std::uint64_t mask = 0;
  for (size_t f = 0; f < sc_.faults.size(); ++f) {
    const long k_on = std::lround(sc_.faults[f].time / sc_.dt);
    const long k_off =
        std::lround((sc_.faults[f].time + sc_.faults[f].duration) / sc_.dt);
    if (k_ >= k_on && k_ < k_off) mask |= std::uint64_t(1) << f;
  }
  const int n = static_cast<int>(net_.buses.size());
  Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(n);
  for (const auto& g : gens_) inj(g.bus_row) += g.e_drive;
  if (fdne_) {
    const Eigen::VectorXcd h = fdne_->history_current();
    for (size_t i = 0; i < boundary_rows_.size(); ++i)
      inj(boundary_rows_[i]) -= h(i) + i_corr_(i);
  }
  std::vector<int> cp_bus;
  std::vector<double> cp_power, cp_imax;
  for (const auto& t : turbines_) {
    cp_bus.push_back(t.bus_row);
    cp_power.push_back(t.p_elec / t.p_base_ratio);
    cp_imax.push_back(t.i_limit_sys);
  }
  std::vector<Complex> cp_cur;
  Eigen::VectorXcd v = network_solve(lu_for_mask(mask), inj, cp_bus, cp_power,
                                     cp_imax, v_, &cp_cur);
  for (size_t i = 0; i < turbines_.size(); ++i)
    turbines_[i].p_realized =
        std::real(v(turbines_[i].bus_row) * std::conj(cp_cur[i])) *
        turbines_[i].p_base_ratio;
  return v;
}

StepRecord CosimEngine::step() {
  const double t_now = time();
  try {
    if (k_ % control_ratio_ == 0) slow_tick();
    v_ = solve_now();
    if (fdne_) fdne_->advance(boundary_v(v_));
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " (t = " +
                       std::to_string(t_now) + " s, step " +
                       std::to_string(k_) + ")");
  }

  StepRecord rec;
  rec.time = t_now;
  const int n = static_cast<int>(net_.buses.size());
  rec.v_mag.resize(n);
  rec.v_ang.resize(n);
  for (int i = 0; i < n; ++i) {
    rec.v_mag[i] = std::abs(v_(i));
    rec.v_ang[i] = std::arg(v_(i));
  }
  for (auto& t : turbines_) {
    const TurbineParams& p = t.spec.params;
    const double v_w = wind_at(t, t_now);
    const bool in_band = v_w >= p.cut_in && v_w <= p.cut_out;
    const double p_m =
        in_band ? aero_power_pu(p, t.state.omega_r, v_w, t.state.beta) : 0.0;

    TurbineRecord tr;
    tr.omega_r = t.state.omega_r;
    tr.beta = t.state.beta;
    tr.p_mw = t.p_realized * t.spec.count * p.rated_power_w * 1e-6;
    tr.torque = t.state.omega_r > 1e-3 ? p_m / t.state.omega_r : 0.0;
    tr.omega_ref = t.omega_ref;
    if (mode_ != ControlMode::kNone) {
      tr.kp = t.design.kp_gain;
      tr.ki = t.design.ki_gain;
      tr.kd = t.design.kd_gain;
    }
    rec.turbines.push_back(tr);

    // Plant integration over [t, t+dt): aero torque from the pre-move pitch,
    // then the actuator slews toward the held command.
    try {
      t.state = drivetrain_step(t.state, p_m, t.p_realized, sc_.dt, p);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (turbine '" + t.spec.name +
                         "', t = " + std::to_string(t_now) + " s)");
    }
    t.state.beta = pitch_actuator_step(t.state.beta, t.beta_cmd, sc_.dt, p);
    const double p_cmd =
        in_band ? std::min(mppt_power(p, t.state.omega_r), 1.0) : 0.0;
    t.p_elec += sc_.dt / t.spec.converter_tau * (p_cmd - t.p_elec);
  }
  const double w_s = 2.0 * M_PI * net_.f_hz;
  for (auto& g : gens_) {
    rec.gen_dw.push_back(g.dw);
    const Complex e = std::polar(g.e_mag, g.delta);
    g.pe = std::real(e * std::conj(g.y_int * (e - v_(g.bus_row))));
    g.dw += sc_.dt * (g.pm - g.pe - g.d * g.dw) / (2.0 * g.h);
    g.delta += sc_.dt * w_s * g.dw;
    g.e_drive = g.y_int * std::polar(g.e_mag, g.delta);
  }
  for (const auto& g : ext_gens_) rec.gen_dw.push_back(g.dw);
  ++k_;
  return rec;
}

Complex CosimEngine::bus_voltage(int bus_id) const {
  return v_(row_of_.at(bus_id));
}

void CosimEngine::build_columns() {
  columns_.clear();
  columns_.push_back("time_s");
  for (int id : bus_ids_) {
    columns_.push_back("v" + std::to_string(id) + "_mag_pu");
    columns_.push_back("v" + std::to_string(id) + "_ang_rad");
  }
  for (const auto& t : turbines_) {
    const std::string& p = t.spec.name;
    columns_.push_back(p + "_omega_r_pu");
    columns_.push_back(p + "_beta_deg");
    columns_.push_back(p + "_p_mw");
    columns_.push_back(p + "_torque_pu");
    columns_.push_back(p + "_omega_ref_pu");
    columns_.push_back(p + "_kp");
    columns_.push_back(p + "_ki");
    columns_.push_back(p + "_kd");
  }
  for (const auto& g : gens_) columns_.push_back(g.name + "_dw_pu");
  for (const auto& g : ext_gens_) columns_.push_back(g.name + "_dw_pu");
}

namespace {

RunResult run_impl(const Scenario& sc, ControlMode mode, bool has_mode) {
  CosimEngine eng(sc, mode, has_mode);
  RunResult r;
  r.columns = eng.columns();
  r.records.reserve(eng.steps_total());

  std::vector<double> prev_beta;
  std::vector<int> t_rows;
  for (size_t i = 0; i < sc.turbines.size(); ++i)
    t_rows.push_back(-1);  // filled from the first record via bus ids below
  // Bus row of each turbine inside the record's voltage arrays.
  {
    const NetworkModel sim = sc.reduced ? study_subnet(sc.network) : sc.network;
    for (size_t i = 0; i < sc.turbines.size(); ++i)
      t_rows[i] = sim.index_of(sc.turbines[i].bus);
  }

  SummaryMetrics s;
  for (int k = 0; k < eng.steps_total(); ++k) {
    r.records.push_back(eng.step());
    const StepRecord& rec = r.records.back();
    for (size_t i = 0; i < rec.turbines.size(); ++i) {
      const TurbineRecord& tr = rec.turbines[i];
      const TurbineParams& p = sc.turbines[i].params;
      const double rated_mw =
          sc.turbines[i].count * p.rated_power_w * 1e-6;
      const double p_ratio = tr.p_mw / rated_mw;
      s.max_omega_r = std::max(s.max_omega_r, tr.omega_r);
      s.max_p_ratio = std::max(s.max_p_ratio, p_ratio);
      s.max_torque = std::max(s.max_torque, tr.torque);
      s.min_pcc_voltage = std::min(s.min_pcc_voltage, rec.v_mag[t_rows[i]]);
      if (tr.omega_r > p.speed_limit_pu) ++s.speed_violations;
      if (p_ratio > 1.05) ++s.power_violations;
      if (k > 0) {
        const double rate = std::abs(tr.beta - prev_beta[i]) / sc.dt;
        s.max_pitch_rate = std::max(s.max_pitch_rate, rate);
        if (rate > p.pitch_rate_limit + 1e-9) ++s.rate_violations;
      }
      if (prev_beta.size() <= i) prev_beta.push_back(tr.beta);
      else prev_beta[i] = tr.beta;
    }
  }
  r.summary = s;
  return r;
}

std::string sanitize_cell(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

RunResult run_scenario(const Scenario& sc) {
  return run_impl(sc, ControlMode::kNone, false);
}

RunResult run_scenario(const Scenario& sc, ControlMode mode) {
  return run_impl(sc, mode, true);
}

void write_run_csv(std::ostream& os, const RunResult& r) {
  CsvWriter w(os);
  w.header(r.columns);
  std::vector<double> row;
  for (const auto& rec : r.records) {
    row.clear();
    row.push_back(rec.time);
    for (size_t i = 0; i < rec.v_mag.size(); ++i) {
      row.push_back(rec.v_mag[i]);
      row.push_back(rec.v_ang[i]);
    }
    for (const auto& t : rec.turbines) {
      row.push_back(t.omega_r);
      row.push_back(t.beta);
      row.push_back(t.p_mw);
      row.push_back(t.torque);
      row.push_back(t.omega_ref);
      row.push_back(t.kp);
      row.push_back(t.ki);
      row.push_back(t.kd);
    }
    for (double dw : rec.gen_dw) row.push_back(dw);
    w.row(row);
  }
}

std::vector<CompareRow> compare_modes(const Scenario& sc) {
  std::vector<CompareRow> rows;
  for (ControlMode m : {ControlMode::kNone, ControlMode::kFixedPi,
                        ControlMode::kAdaptiveStr}) {
    CompareRow row;
    row.mode = m;
    try {
      row.result = run_scenario(sc, m);
      row.summary = row.result.summary;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows) {
  os << "mode,failed,max_omega_r_pu,max_p_ratio,max_pitch_rate_deg_s,"
        "max_torque_pu,min_pcc_voltage_pu,speed_violations,power_violations,"
        "rate_violations,error\n";
  for (const auto& r : rows) {
    const SummaryMetrics& s = r.summary;
    os << mode_name(r.mode) << ',' << (r.failed ? 1 : 0) << ','
       << format_double(s.max_omega_r) << ',' << format_double(s.max_p_ratio)
       << ',' << format_double(s.max_pitch_rate) << ','
       << format_double(s.max_torque) << ','
       << format_double(s.min_pcc_voltage) << ',' << s.speed_violations << ','
       << s.power_violations << ',' << s.rate_violations << ','
       << sanitize_cell(r.error) << '\n';
  }
}

}  // namespace windstr
