#include "windstr/io.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "windstr/csv.hpp"

namespace windstr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

// Required / optional field access with path context in every error.
template <class T>
T need(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key))
    throw ConfigError(ctx + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(ctx + ": field '" + key + "': " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(ctx + ": field '" + key + "': " + e.what());
  }
}

json cpx(const Complex& c) { return json::array({c.real(), c.imag()}); }

Complex cpx_of(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 2)
    throw ConfigError(ctx + ": complex values are [re, im] pairs");
  return Complex(j[0].get<double>(), j[1].get<double>());
}

json mat(const Eigen::MatrixXcd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(cpx(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXcd mat_of(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.empty())
    throw ConfigError(ctx + ": expected a non-empty matrix");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Eigen::MatrixXcd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != cols)
      throw ConfigError(ctx + ": ragged matrix rows");
    for (int c = 0; c < cols; ++c) m(r, c) = cpx_of(j[r][c], ctx);
  }
  return m;
}

std::string resolve(const std::string& base_file, const std::string& rel) {
  const fs::path p(rel);
  if (p.is_absolute()) return rel;
  return (fs::path(base_file).parent_path() / p).string();
}

TurbineParams params_of(const json& j, const std::string& ctx) {
  TurbineParams p;
  p.c1 = get_or(j, "c1", p.c1, ctx);
  p.c2 = get_or(j, "c2", p.c2, ctx);
  p.c3 = get_or(j, "c3", p.c3, ctx);
  p.c4 = get_or(j, "c4", p.c4, ctx);
  p.c5 = get_or(j, "c5", p.c5, ctx);
  p.c6 = get_or(j, "c6", p.c6, ctx);
  p.rho = get_or(j, "rho", p.rho, ctx);
  p.area = get_or(j, "area", p.area, ctx);
  p.radius = get_or(j, "radius", p.radius, ctx);
  p.k_p = get_or(j, "k_p", p.k_p, ctx);
  p.r_gear = get_or(j, "r_gear", p.r_gear, ctx);
  p.inertia_h = get_or(j, "inertia_h", p.inertia_h, ctx);
  p.rated_wind = get_or(j, "rated_wind", p.rated_wind, ctx);
  p.cut_in = get_or(j, "cut_in", p.cut_in, ctx);
  p.cut_out = get_or(j, "cut_out", p.cut_out, ctx);
  p.rated_speed_pu = get_or(j, "rated_speed_pu", p.rated_speed_pu, ctx);
  p.speed_limit_pu = get_or(j, "speed_limit_pu", p.speed_limit_pu, ctx);
  p.pitch_min = get_or(j, "pitch_min", p.pitch_min, ctx);
  p.pitch_max = get_or(j, "pitch_max", p.pitch_max, ctx);
  p.pitch_rate_limit = get_or(j, "pitch_rate_limit", p.pitch_rate_limit, ctx);
  p.rated_power_w = get_or(j, "rated_power_w", p.rated_power_w, ctx);
  return p;
}

WindSpec wind_of(const json& j, const std::string& ctx) {
  WindSpec w;
  if (j.contains("base")) {
    w.base.clear();
    for (const auto& knot : j.at("base")) {
      if (!knot.is_array() || knot.size() != 2)
        throw ConfigError(ctx + ": wind base knots are [t, v] pairs");
      w.base.push_back({knot[0].get<double>(), knot[1].get<double>()});
    }
  }
  for (const auto& g : get_or(j, "gusts", json::array(), ctx)) {
    WindSpec::Gust gust;
    gust.t0 = need<double>(g, "t0", ctx + " gust");
    gust.duration = need<double>(g, "duration", ctx + " gust");
    gust.amplitude = need<double>(g, "amplitude", ctx + " gust");
    w.gusts.push_back(gust);
  }
  w.turb_sigma = get_or(j, "turb_sigma", w.turb_sigma, ctx);
  w.turb_tau = get_or(j, "turb_tau", w.turb_tau, ctx);
  w.turb_dt = get_or(j, "turb_dt", w.turb_dt, ctx);
  return w;
}

NetworkModel network_of(const json& j, const std::string& ctx) {
  NetworkModel m;
  m.name = get_or<std::string>(j, "name", "network", ctx);
  m.mva_base = get_or(j, "mva_base", m.mva_base, ctx);
  m.f_hz = get_or(j, "f_hz", m.f_hz, ctx);
  for (const auto& b : need<json>(j, "buses", ctx)) {
    Bus bus;
    bus.id = need<int>(b, "id", ctx + " bus");
    bus.name = get_or<std::string>(b, "name", "bus" + std::to_string(bus.id),
                                   ctx);
    bus.area = get_or<std::string>(b, "area", "study", ctx);
    m.buses.push_back(bus);
  }
  for (const auto& b : get_or(j, "branches", json::array(), ctx)) {
    Branch br;
    br.from = need<int>(b, "from", ctx + " branch");
    br.to = need<int>(b, "to", ctx + " branch");
    br.r = get_or(b, "r", 0.0, ctx);
    br.x = get_or(b, "x", 0.0, ctx);
    br.b = get_or(b, "b", 0.0, ctx);
    m.branches.push_back(br);
  }
  for (const auto& s : get_or(j, "shunts", json::array(), ctx)) {
    Shunt sh;
    sh.bus = need<int>(s, "bus", ctx + " shunt");
    sh.g = get_or(s, "g", 0.0, ctx);
    sh.b = get_or(s, "b", 0.0, ctx);
    m.shunts.push_back(sh);
  }
  for (const auto& g : get_or(j, "machines", json::array(), ctx)) {
    Machine mc;
    mc.name = need<std::string>(g, "name", ctx + " machine");
    mc.bus = need<int>(g, "bus", ctx + " machine");
    mc.h = need<double>(g, "h", ctx + " machine " + mc.name);
    mc.d = get_or(g, "d", 0.0, ctx);
    mc.xdp = need<double>(g, "xdp", ctx + " machine " + mc.name);
    mc.rating_mva = get_or(g, "rating_mva", 0.0, ctx);
    mc.e_mag = get_or(g, "e_mag", 1.0, ctx);
    mc.pm = get_or(g, "pm", 0.0, ctx);
    mc.delta0 = get_or(g, "delta0", 0.0, ctx);
    m.machines.push_back(mc);
  }
  m.coherent_groups =
      get_or<std::vector<std::vector<std::string>>>(j, "coherent_groups", {},
                                                    ctx);
  m.boundary_buses = get_or<std::vector<int>>(j, "boundary_buses", {}, ctx);
  return m;
}

json network_json(const NetworkModel& m) {
  json j;
  j["name"] = m.name;
  j["mva_base"] = m.mva_base;
  j["f_hz"] = m.f_hz;
  j["buses"] = json::array();
  for (const auto& b : m.buses)
    j["buses"].push_back({{"id", b.id}, {"name", b.name}, {"area", b.area}});
  j["branches"] = json::array();
  for (const auto& br : m.branches)
    j["branches"].push_back({{"from", br.from},
                             {"to", br.to},
                             {"r", br.r},
                             {"x", br.x},
                             {"b", br.b}});
  j["shunts"] = json::array();
  for (const auto& s : m.shunts)
    j["shunts"].push_back({{"bus", s.bus}, {"g", s.g}, {"b", s.b}});
  j["machines"] = json::array();
  for (const auto& g : m.machines)
    j["machines"].push_back({{"name", g.name},
                             {"bus", g.bus},
                             {"h", g.h},
                             {"d", g.d},
                             {"xdp", g.xdp},
                             {"rating_mva", g.rating_mva},
                             {"e_mag", g.e_mag},
                             {"pm", g.pm},
                             {"delta0", g.delta0}});
  j["coherent_groups"] = m.coherent_groups;
  j["boundary_buses"] = m.boundary_buses;
  return j;
}

}  // namespace

NetworkModel load_network(const std::string& path) {
  return network_of(read_json(path), path);
}

void save_network(const NetworkModel& m, const std::string& path) {
  write_json(network_json(m), path);
}

ReducedGrid load_reduced(const std::string& path) {
  const json j = read_json(path);
  ReducedGrid g;
  g.name = get_or<std::string>(j, "name", "reduced", path);
  g.mva_base = get_or(j, "mva_base", g.mva_base, path);
  g.f_hz = get_or(j, "f_hz", g.f_hz, path);
  g.boundary_buses = need<std::vector<int>>(j, "boundary_buses", path);
  const json& t = need<json>(j, "tsa", path);
  g.tsa.y_bb = mat_of(need<json>(t, "y_bb", path), path);
  g.tsa.y_be = mat_of(need<json>(t, "y_be", path), path);
  g.tsa.y_eb = mat_of(need<json>(t, "y_eb", path), path);
  g.tsa.y_ee = mat_of(need<json>(t, "y_ee", path), path);
  for (const auto& m : need<json>(j, "machines", path)) {
    ReducedMachine rm;
    rm.name = need<std::string>(m, "name", path + " machine");
    rm.h = need<double>(m, "h", path + " machine " + rm.name);
    rm.d = get_or(m, "d", 0.0, path);
    rm.xdp = need<double>(m, "xdp", path + " machine " + rm.name);
    rm.rating_mva = get_or(m, "rating_mva", 0.0, path);
    rm.e_mag = need<double>(m, "e_mag", path + " machine " + rm.name);
    rm.pm = need<double>(m, "pm", path + " machine " + rm.name);
    rm.delta0 = need<double>(m, "delta0", path + " machine " + rm.name);
    g.machines.push_back(rm);
  }
  const json& f = need<json>(j, "fdne", path);
  g.fdne.ports = need<int>(f, "ports", path);
  g.fdne.dt = need<double>(f, "dt", path);
  g.fdne.fit_error = get_or<std::vector<double>>(f, "fit_error", {}, path);
  for (const auto& tf_j : need<json>(f, "tf", path)) {
    FdneTf tf;
    for (const auto& c : need<json>(tf_j, "a", path)) tf.a.push_back(cpx_of(c, path));
    for (const auto& c : need<json>(tf_j, "b", path)) tf.b.push_back(cpx_of(c, path));
    if (tf.b.size() != tf.a.size() + 1)
      throw ConfigError(path + ": FDNE channel needs len(b) == len(a)+1");
    g.fdne.tf.push_back(std::move(tf));
  }
  if (static_cast<int>(g.fdne.tf.size()) != g.fdne.ports * g.fdne.ports)
    throw ConfigError(path + ": FDNE needs ports^2 channels");
  g.validate();
  return g;
}

void save_reduced(const ReducedGrid& g, const std::string& path) {
  json j;
  j["name"] = g.name;
  j["mva_base"] = g.mva_base;
  j["f_hz"] = g.f_hz;
  j["boundary_buses"] = g.boundary_buses;
  j["tsa"] = {{"y_bb", mat(g.tsa.y_bb)},
              {"y_be", mat(g.tsa.y_be)},
              {"y_eb", mat(g.tsa.y_eb)},
              {"y_ee", mat(g.tsa.y_ee)}};
  j["machines"] = json::array();
  for (const auto& m : g.machines)
    j["machines"].push_back({{"name", m.name},
                             {"h", m.h},
                             {"d", m.d},
                             {"xdp", m.xdp},
                             {"rating_mva", m.rating_mva},
                             {"e_mag", m.e_mag},
                             {"pm", m.pm},
                             {"delta0", m.delta0}});
  json tfs = json::array();
  for (const auto& tf : g.fdne.tf) {
    json a = json::array(), b = json::array();
    for (const auto& c : tf.a) a.push_back(cpx(c));
    for (const auto& c : tf.b) b.push_back(cpx(c));
    tfs.push_back({{"a", std::move(a)}, {"b", std::move(b)}});
  }
  j["fdne"] = {{"ports", g.fdne.ports},
               {"dt", g.fdne.dt},
               {"fit_error", g.fdne.fit_error},
               {"tf", std::move(tfs)}};
  write_json(j, path);
}

Scenario load_scenario(const std::string& path) {
  const json j = read_json(path);
  Scenario sc;
  sc.name = get_or<std::string>(j, "name", "scenario", path);
  sc.network = load_network(resolve(path, need<std::string>(j, "network", path)));
  if (j.contains("reduced") && !j.at("reduced").is_null())
    sc.reduced = load_reduced(resolve(path, j.at("reduced").get<std::string>()));
  sc.dt = get_or(j, "dt", sc.dt, path);
  sc.control_dt = get_or(j, "control_dt", sc.control_dt, path);
  sc.t_end = get_or(j, "t_end", sc.t_end, path);
  sc.seed = get_or(j, "seed", sc.seed, path);
  if (j.contains("controller")) {
    const json& c = j.at("controller");
    sc.controller.mode =
        mode_from_name(get_or<std::string>(c, "mode", "str", path));
    sc.controller.alpha = get_or(c, "alpha", sc.controller.alpha, path);
    sc.controller.forgetting =
        get_or(c, "forgetting", sc.controller.forgetting, path);
    sc.controller.p0_scale = get_or(c, "p0_scale", sc.controller.p0_scale, path);
    if (c.contains("pi")) {
      sc.controller.pi.kp = get_or(c.at("pi"), "kp", sc.controller.pi.kp, path);
      sc.controller.pi.ki = get_or(c.at("pi"), "ki", sc.controller.pi.ki, path);
    }
  }
  for (const auto& t : get_or(j, "turbines", json::array(), path)) {
    TurbineSpec ts;
    ts.name = get_or<std::string>(t, "name", "wtg", path);
    ts.bus = need<int>(t, "bus", path + " turbine " + ts.name);
    ts.meas_bus = need<int>(t, "meas_bus", path + " turbine " + ts.name);
    ts.x_line = need<double>(t, "x_line", path + " turbine " + ts.name);
    ts.count = get_or(t, "count", 1, path);
    ts.mva = get_or(t, "mva", ts.mva, path);
    ts.current_limit_pu = get_or(t, "current_limit_pu", ts.current_limit_pu, path);
    ts.converter_tau = get_or(t, "converter_tau", ts.converter_tau, path);
    if (t.contains("params")) ts.params = params_of(t.at("params"), path);
    if (t.contains("wind_csv")) {
      ts.wind.base =
          load_wind_csv(resolve(path, t.at("wind_csv").get<std::string>()));
    } else if (t.contains("wind")) {
      ts.wind = wind_of(t.at("wind"), path + " turbine " + ts.name);
    }
    sc.turbines.push_back(std::move(ts));
  }
  for (const auto& f : get_or(j, "faults", json::array(), path)) {
    FaultEvent ev;
    ev.time = need<double>(f, "time", path + " fault");
    ev.bus = need<int>(f, "bus", path + " fault");
    ev.g_fault = get_or(f, "g_fault", ev.g_fault, path);
    ev.duration = need<double>(f, "duration", path + " fault");
    sc.faults.push_back(ev);
  }
  for (const auto& w : get_or(j, "wind_events", json::array(), path)) {
    WindEvent ev;
    ev.time = need<double>(w, "time", path + " wind event");
    ev.turbine = get_or(w, "turbine", 0, path);
    ev.file = resolve(path, need<std::string>(w, "file", path + " wind event"));
    sc.wind_events.push_back(ev);
  }
  sc.validate();
  return sc;
}

void save_summary(const SummaryMetrics& s, const std::string& mode,
                  const std::string& path) {
  json j;
  j["mode"] = mode;
  j["max_omega_r_pu"] = s.max_omega_r;
  j["max_p_ratio"] = s.max_p_ratio;
  j["max_pitch_rate_deg_s"] = s.max_pitch_rate;
  j["max_torque_pu"] = s.max_torque;
  j["min_pcc_voltage_pu"] = s.min_pcc_voltage;
  j["speed_violations"] = s.speed_violations;
  j["power_violations"] = s.power_violations;
  j["rate_violations"] = s.rate_violations;
  write_json(j, path);
}

}  // namespace windstr
