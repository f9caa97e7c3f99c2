#include "windstr/network.hpp"

#include <algorithm>
#include <set>

namespace windstr {

int NetworkModel::index_of(int bus_id) const {
  for (size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == bus_id) return static_cast<int>(i);
  throw ConfigError("network '" + name + "': unknown bus id " +
                    std::to_string(bus_id));
}

const Machine& NetworkModel::machine(const std::string& mname) const {
  for (const auto& g : machines)
    if (g.name == mname) return g;
  throw ConfigError("network '" + name + "': unknown machine '" + mname + "'");
}

int NetworkModel::max_bus_id() const {
  int m = 0;
  for (const auto& b : buses) m = std::max(m, b.id);
  return m;
}

Eigen::MatrixXcd assemble_admittance(const NetworkModel& m, double omega_rel,
                                     bool include_machines) {
  const int n = static_cast<int>(m.buses.size());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& br : m.branches) {
    if (br.r == 0.0 && br.x == 0.0)
      throw ConfigError("network '" + m.name + "': zero-impedance branch " +
                        std::to_string(br.from) + "-" + std::to_string(br.to));
    const int i = m.index_of(br.from);
    const int j = m.index_of(br.to);
    const Complex ys = 1.0 / Complex(br.r, br.x * omega_rel);
    const Complex half_chg(0.0, 0.5 * br.b * omega_rel);
    y(i, i) += ys + half_chg;
    y(j, j) += ys + half_chg;
    y(i, j) -= ys;
    y(j, i) -= ys;
  }
  for (const auto& sh : m.shunts)
    y(m.index_of(sh.bus), m.index_of(sh.bus)) += Complex(sh.g, sh.b * omega_rel);
  if (include_machines) {
    for (const auto& g : m.machines) {
      if (!(g.xdp > 0.0))
        throw ConfigError("machine '" + g.name + "': xdp must be > 0");
      y(m.index_of(g.bus), m.index_of(g.bus)) +=
          1.0 / Complex(0.0, g.xdp * omega_rel);
    }
  }
  return y;
}

Eigen::MatrixXcd kron_reduce(const Eigen::MatrixXcd& y,
                             const std::vector<int>& keep) {
  const int n = static_cast<int>(y.rows());
  std::vector<char> kept(n, 0);
  for (int k : keep) {
    if (k < 0 || k >= n) throw ConfigError("kron_reduce: keep index out of range");
    kept[k] = 1;
  }
  std::vector<int> elim;
  for (int i = 0; i < n; ++i)
    if (!kept[i]) elim.push_back(i);
  if (elim.empty()) return y;

  const int nk = static_cast<int>(keep.size());
  const int ne = static_cast<int>(elim.size());
  Eigen::MatrixXcd ykk(nk, nk), yke(nk, ne), yek(ne, nk), yee(ne, ne);
  for (int a = 0; a < nk; ++a) {
    for (int b = 0; b < nk; ++b) ykk(a, b) = y(keep[a], keep[b]);
    for (int b = 0; b < ne; ++b) yke(a, b) = y(keep[a], elim[b]);
  }
  for (int a = 0; a < ne; ++a) {
    for (int b = 0; b < nk; ++b) yek(a, b) = y(elim[a], keep[b]);
    for (int b = 0; b < ne; ++b) yee(a, b) = y(elim[a], elim[b]);
  }
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(yee);
  if (!lu.isInvertible())
    throw NumericError("kron_reduce: eliminated block is singular");
  return ykk - yke * lu.solve(yek);
}

NetworkModel aggregate_coherent(
    const NetworkModel& m,
    const std::vector<std::vector<std::string>>& groups) {
  // Validate: no machine appears twice.
  std::set<std::string> seen;
  for (const auto& g : groups)
    for (const auto& name : g) {
      m.machine(name);  // existence check
      if (!seen.insert(name).second)
        throw ConfigError("aggregate_coherent: machine '" + name +
                          "' appears in more than one group");
    }

  NetworkModel out = m;
  int next_id = m.max_bus_id();
  for (const auto& g : groups) {
    if (g.empty()) continue;
    ++next_id;
    std::set<int> member_buses;
    Machine agg;
    agg.name = "agg";
    double y_sum = 0.0, e_weighted = 0.0;
    for (const auto& name : g) {
      const Machine& mm = m.machine(name);
      member_buses.insert(mm.bus);
      agg.name += "_" + name;
      agg.h += mm.h;
      agg.d += mm.d;
      agg.rating_mva += mm.rating_mva;
      agg.pm += mm.pm;
      y_sum += 1.0 / mm.xdp;
      e_weighted += mm.e_mag * mm.rating_mva;
    }
    agg.xdp = 1.0 / y_sum;
    agg.e_mag = agg.rating_mva > 0.0 ? e_weighted / agg.rating_mva : 1.0;
    agg.bus = next_id;

    // Merge member terminal buses into the new bus.
    const auto mapped = [&](int bus) {
      return member_buses.count(bus) ? next_id : bus;
    };
    std::vector<Branch> branches;
    for (const auto& br : out.branches) {
      Branch nb = br;
      nb.from = mapped(br.from);
      nb.to = mapped(br.to);
      if (nb.from == nb.to) {
        // Collapsed internal tie: series path vanishes, keep its charging.
        if (nb.b != 0.0) out.shunts.push_back({next_id, 0.0, nb.b});
        continue;
      }
      branches.push_back(nb);
    }
    out.branches = std::move(branches);
    for (auto& sh : out.shunts) sh.bus = mapped(sh.bus);

    std::vector<Machine> machines;
    for (const auto& mm : out.machines)
      if (std::find(g.begin(), g.end(), mm.name) == g.end())
        machines.push_back(mm);
    for (auto& mm : machines) mm.bus = mapped(mm.bus);  // shared terminals
    machines.push_back(agg);
    out.machines = std::move(machines);

    std::vector<Bus> buses;
    for (const auto& b : out.buses)
      if (!member_buses.count(b.id)) buses.push_back(b);
    Bus nb;
    nb.id = next_id;
    nb.name = agg.name;
    nb.area = "external";
    buses.push_back(nb);
    out.buses = std::move(buses);
  }
  out.coherent_groups.clear();
  return out;
}

Eigen::VectorXcd tsa_step(const TsaBlocks& t, const Eigen::VectorXcd& v_b,
                          const Eigen::VectorXcd& i_e) {
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(t.y_ee);
  if (!lu.isInvertible())
    throw NumericError("tsa_step: singular machine-side block");
  const Eigen::VectorXcd v_e = lu.solve(i_e - t.y_eb * v_b);
  return t.y_bb * v_b + t.y_be * v_e;
}

}  // namespace windstr
