// windstr: validate configs, build reduced grid models, run scenarios and
// mode comparisons. Exit codes: 0 success, 2 bad input, 3 runtime fault.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "windstr/cosim.hpp"
#include "windstr/csv.hpp"
#include "windstr/fdne.hpp"
#include "windstr/io.hpp"
#include "windstr/reduced_grid.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool g_quiet = false;

void say(const std::string& s) {
  if (!g_quiet) std::cout << s << "\n";
}

// Machine-readable error record on stderr, one JSON object per line.
void error_record(const std::string& type, const std::string& message) {
  const json j{{"error", type}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

struct Overrides {
  std::optional<std::string> mode;
  std::optional<double> alpha, gamma, dt;
  std::optional<unsigned long long> seed;

  void apply(windstr::Scenario& sc) const {
    if (mode) sc.controller.mode = windstr::mode_from_name(*mode);
    if (alpha) sc.controller.alpha = *alpha;
    if (gamma) sc.controller.forgetting = *gamma;
    if (dt) sc.dt = *dt;
    if (seed) sc.seed = *seed;
    if (mode || alpha || gamma || dt || seed) sc.validate();
  }
};

fs::path pick_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("WINDSTR_OUT"); env && *env) return env;
  return ".";
}

std::ofstream open_out(const fs::path& p) {
  if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw windstr::ConfigError("cannot write '" + p.string() + "'");
  return os;
}

std::string summary_line(const windstr::SummaryMetrics& s) {
  std::ostringstream os;
  os << "max omega_r " << windstr::format_double(s.max_omega_r)
     << " pu, max P " << windstr::format_double(s.max_p_ratio)
     << " rated, max |dbeta/dt| " << windstr::format_double(s.max_pitch_rate)
     << " deg/s, min V_pcc " << windstr::format_double(s.min_pcc_voltage)
     << " pu, violations speed/power/rate " << s.speed_violations << "/"
     << s.power_violations << "/" << s.rate_violations;
  return os.str();
}

int cmd_validate(const std::string& scenario_path,
                 const std::string& network_path) {
  if (!scenario_path.empty()) {
    const windstr::Scenario sc = windstr::load_scenario(scenario_path);
    say("scenario '" + sc.name + "': OK (" + std::to_string(sc.turbines.size()) +
        " turbine group(s), " + std::to_string(sc.faults.size()) +
        " fault(s), t_end " + windstr::format_double(sc.t_end) + " s)");
  }
  if (!network_path.empty()) {
    const windstr::NetworkModel net = windstr::load_network(network_path);
    windstr::assemble_admittance(net);  // structural check
    say("network '" + net.name + "': OK (" + std::to_string(net.buses.size()) +
        " buses, " + std::to_string(net.machines.size()) + " machines)");
  }
  return 0;
}

int cmd_reduce(const std::string& network_path, const std::string& out_flag,
               const Overrides& ov) {
  const windstr::NetworkModel net = windstr::load_network(network_path);
  windstr::ReduceOptions opts;
  if (ov.dt) opts.dt = *ov.dt;
  const windstr::ReducedGrid rg = windstr::build_reduced(net, opts);
  for (int i = 0; i < rg.ports(); ++i)
    for (int j = 0; j < rg.ports(); ++j)
      say("fdne port (" + std::to_string(rg.boundary_buses[i]) + "," +
          std::to_string(rg.boundary_buses[j]) + "): order " +
          std::to_string(rg.fdne.at(i, j).order()) + ", fit error " +
          windstr::format_double(rg.fdne.fit_error[i * rg.ports() + j]));
  const fs::path out = pick_out_dir(out_flag) / (net.name + "_reduced.json");
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  windstr::save_reduced(rg, out.string());
  say("wrote " + out.string());
  return 0;
}

int cmd_fit_fdne(const std::string& network_path, const std::string& out_flag,
                 const Overrides& ov) {
  const windstr::NetworkModel net = windstr::load_network(network_path);
  if (net.boundary_buses.empty())
    throw windstr::ConfigError("fit-fdne: network has no boundary_buses");
  const windstr::NetworkModel ext = windstr::external_subnet(net);
  windstr::ReduceOptions opts;
  if (ov.dt) opts.dt = *ov.dt;
  const double nu_cap = std::min(opts.nu_max_hz, 0.45 / opts.dt);
  const auto sweep = windstr::fdne_sweep(ext, net.boundary_buses,
                                         opts.nu_min_hz, nu_cap,
                                         opts.tones_per_decade);
  const windstr::FdneSet set =
      windstr::fdne_fit_sweep(sweep, opts.dt, opts.fdne_order,
                              opts.fdne_max_order, opts.fdne_err_target);
  json channels = json::array();
  for (int i = 0; i < set.ports; ++i)
    for (int j = 0; j < set.ports; ++j) {
      const windstr::FdneTf& tf = set.at(i, j);
      json a = json::array(), b = json::array();
      for (const auto& c : tf.a) a.push_back({c.real(), c.imag()});
      for (const auto& c : tf.b) b.push_back({c.real(), c.imag()});
      channels.push_back({{"from_port", j},
                          {"to_port", i},
                          {"order", tf.order()},
                          {"fit_error", set.fit_error[i * set.ports + j]},
                          {"a", a},
                          {"b", b}});
      say("fdne port (" + std::to_string(net.boundary_buses[i]) + "," +
          std::to_string(net.boundary_buses[j]) + "): order " +
          std::to_string(tf.order()) + ", fit error " +
          windstr::format_double(set.fit_error[i * set.ports + j]));
    }
  const json doc{{"network", net.name},
                 {"ports", set.ports},
                 {"port_buses", net.boundary_buses},
                 {"dt", set.dt},
                 {"channels", channels}};
  const fs::path out = pick_out_dir(out_flag) / (net.name + "_fdne.json");
  auto os = open_out(out);
  os << doc.dump(1) << "\n";
  say("wrote " + out.string());
  return 0;
}

int cmd_run(const std::string& scenario_path, const std::string& out_flag,
            const Overrides& ov) {
  windstr::Scenario sc = windstr::load_scenario(scenario_path);
  ov.apply(sc);
  const windstr::RunResult r = windstr::run_scenario(sc);
  const std::string mode = windstr::mode_name(sc.controller.mode);
  const fs::path dir = pick_out_dir(out_flag);
  const fs::path csv = dir / (sc.name + "_" + mode + ".csv");
  {
    auto os = open_out(csv);
    windstr::write_run_csv(os, r);
  }
  const fs::path sum = dir / (sc.name + "_" + mode + "_summary.json");
  windstr::save_summary(r.summary, mode, sum.string());
  say("wrote " + csv.string());
  say("wrote " + sum.string());
  say(mode + ": " + summary_line(r.summary));
  return 0;
}

int cmd_compare(const std::string& scenario_path, const std::string& out_flag,
                const Overrides& ov) {
  windstr::Scenario sc = windstr::load_scenario(scenario_path);
  ov.apply(sc);
  const auto rows = windstr::compare_modes(sc);
  const fs::path dir = pick_out_dir(out_flag);
  int ok = 0;
  for (const auto& row : rows) {
    const std::string mode = windstr::mode_name(row.mode);
    if (row.failed) {
      say(mode + ": FAILED (" + row.error + ")");
      continue;
    }
    ++ok;
    const fs::path csv = dir / (sc.name + "_" + mode + ".csv");
    auto os = open_out(csv);
    windstr::write_run_csv(os, row.result);
    windstr::save_summary(row.summary, mode,
                          (dir / (sc.name + "_" + mode + "_summary.json"))
                              .string());
    say(mode + ": " + summary_line(row.summary));
  }
  const fs::path table = dir / (sc.name + "_compare.csv");
  auto os = open_out(table);
  windstr::write_compare_csv(os, rows);
  say("wrote " + table.string());
  if (ok == 0) throw windstr::NumericError("compare: every mode failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"windstr: adaptive pitch control co-simulation"};
  app.require_subcommand(1);

  std::string scenario_path, network_path, out_flag;
  Overrides ov;

  auto add_common = [&](CLI::App* cmd, bool wants_scenario) {
    if (wants_scenario)
      cmd->add_option("--scenario", scenario_path, "scenario JSON file")
          ->required();
    else
      cmd->add_option("--network", network_path, "network JSON file")
          ->required();
    cmd->add_option("--out", out_flag,
                    "output directory (default $WINDSTR_OUT or .)");
    cmd->add_option("--mode", ov.mode, "controller mode: none|pi|str");
    cmd->add_option("--alpha", ov.alpha, "pole-shift factor override");
    cmd->add_option("--gamma", ov.gamma, "RLS forgetting factor override");
    cmd->add_option("--dt", ov.dt, "simulation step override, s");
    cmd->add_option("--seed", ov.seed, "wind generator seed override");
    cmd->add_flag("--quiet", g_quiet, "suppress progress output");
  };

  CLI::App* reduce = app.add_subcommand(
      "reduce", "build a reduced grid model from a partitioned network");
  add_common(reduce, false);
  CLI::App* fit = app.add_subcommand(
      "fit-fdne", "fit and report the boundary FDNE of the external area");
  add_common(fit, false);
  CLI::App* run = app.add_subcommand("run", "run one scenario");
  add_common(run, true);
  CLI::App* compare = app.add_subcommand(
      "compare", "run a scenario under none, pi and str controllers");
  add_common(compare, true);
  CLI::App* validate =
      app.add_subcommand("validate", "check a scenario or network file");
  validate->add_option("--scenario", scenario_path, "scenario JSON file");
  validate->add_option("--network", network_path, "network JSON file");
  validate->add_flag("--quiet", g_quiet, "suppress progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad usage is an input error
  }

  try {
    if (reduce->parsed()) return cmd_reduce(network_path, out_flag, ov);
    if (fit->parsed()) return cmd_fit_fdne(network_path, out_flag, ov);
    if (run->parsed()) return cmd_run(scenario_path, out_flag, ov);
    if (compare->parsed()) return cmd_compare(scenario_path, out_flag, ov);
    if (validate->parsed()) {
      if (scenario_path.empty() && network_path.empty())
        throw windstr::ConfigError(
            "validate: pass --scenario and/or --network");
      return cmd_validate(scenario_path, network_path);
    }
  } catch (const windstr::ConfigError& e) {
    error_record("config", e.what());
    return 2;
  } catch (const windstr::NumericError& e) {
    error_record("numeric", e.what());
    return 3;
  } catch (const std::exception& e) {
    error_record("runtime", e.what());
    return 3;
  }
  return 0;
}
