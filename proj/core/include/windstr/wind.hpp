#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "windstr/errors.hpp"

namespace windstr {

// Wind speed as a function of time: a piecewise-linear base profile plus
// optional gust bumps and seeded turbulence. Everything is deterministic for
// a given spec + seed.
struct WindSpec {
  // Base profile: (time s, speed m/s) knots, linearly interpolated, held
  // flat outside the range. A constant profile is a single knot.
  std::vector<std::pair<double, double>> base{{0.0, 12.0}};

  // Optional half-cosine gusts: v += amp/2 * (1 - cos(2*pi*(t-t0)/dur)).
  struct Gust {
    double t0 = 0.0, duration = 1.0, amplitude = 0.0;
  };
  std::vector<Gust> gusts;

  // Optional AR(1) turbulence sampled at fixed intervals and linearly
  // interpolated between samples; sigma in m/s, tau the correlation time.
  double turb_sigma = 0.0;
  double turb_tau = 2.0;
  double turb_dt = 0.05;
};

class WindSeries {
 public:
  WindSeries(const WindSpec& spec, double t_end, std::uint64_t seed);

  double at(double t) const;  // m/s, >= 0

 private:
  WindSpec spec_;
  std::vector<double> turb_;  // pre-sampled turbulence track
};

// Parse a two-column CSV (time s, speed m/s) into base knots. Lines starting
// with '#' and a single header row are skipped.
std::vector<std::pair<double, double>> load_wind_csv(const std::string& path);

}  // namespace windstr
