#include "windstr/wind.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>

namespace windstr {

namespace {

// Uniform in [0, 1) from the raw 64-bit stream. std::uniform_real_distribution
// is implementation-defined; this mapping is not, which keeps scenario CSVs
// byte-identical across standard libraries.
double u01(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller without the trig pair caching (deterministic call order).
double normal(std::mt19937_64& rng) {
  double u = u01(rng);
  while (u == 0.0) u = u01(rng);
  const double v = u01(rng);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
}

}  // namespace

WindSeries::WindSeries(const WindSpec& spec, double t_end, std::uint64_t seed)
    : spec_(spec) {
  if (spec_.base.empty()) throw ConfigError("wind: empty base profile");
  for (size_t i = 1; i < spec_.base.size(); ++i)
    if (spec_.base[i].first < spec_.base[i - 1].first)
      throw ConfigError("wind: base profile times must be non-decreasing");
  if (spec_.turb_sigma > 0.0) {
    const int n = static_cast<int>(std::ceil(t_end / spec_.turb_dt)) + 2;
    std::mt19937_64 rng(seed);
    const double rho = std::exp(-spec_.turb_dt / spec_.turb_tau);
    const double drive = spec_.turb_sigma * std::sqrt(1.0 - rho * rho);
    double x = 0.0;
    turb_.reserve(n);
    for (int i = 0; i < n; ++i) {
      turb_.push_back(x);
      x = rho * x + drive * normal(rng);
    }
  }
}

double WindSeries::at(double t) const {
  const auto& base = spec_.base;
  double v;
  if (t <= base.front().first) {
    v = base.front().second;
  } else if (t >= base.back().first) {
    v = base.back().second;
  } else {
    size_t i = 1;
    while (base[i].first < t) ++i;
    const auto& [t0, v0] = base[i - 1];
    const auto& [t1, v1] = base[i];
    v = t1 == t0 ? v1 : v0 + (v1 - v0) * (t - t0) / (t1 - t0);
  }
  for (const auto& g : spec_.gusts) {
    if (t >= g.t0 && t <= g.t0 + g.duration && g.duration > 0.0)
      v += 0.5 * g.amplitude *
           (1.0 - std::cos(2.0 * M_PI * (t - g.t0) / g.duration));
  }
  if (!turb_.empty()) {
    const double s = t / spec_.turb_dt;
    const size_t i = std::min(static_cast<size_t>(std::max(s, 0.0)),
                              turb_.size() - 2);
    const double f = std::clamp(s - double(i), 0.0, 1.0);
    v += turb_[i] * (1.0 - f) + turb_[i + 1] * f;
  }
  return std::max(v, 0.0);
}

std::vector<std::pair<double, double>> load_wind_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("wind: cannot open '" + path + "'");
  std::vector<std::pair<double, double>> knots;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double t, v;
    if (!(ss >> t >> v)) {
      if (first) {  // tolerate one header row
        first = false;
        continue;
      }
      throw ConfigError("wind: malformed line in '" + path + "': " + line);
    }
    first = false;
    knots.push_back({t, v});
  }
  if (knots.empty()) throw ConfigError("wind: no samples in '" + path + "'");
  return knots;
}

}  // namespace windstr
