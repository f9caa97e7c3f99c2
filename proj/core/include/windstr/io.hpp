#pragma once

#include <string>

#include "windstr/cosim.hpp"
#include "windstr/reduced_grid.hpp"
#include "windstr/scenario.hpp"

namespace windstr {

// JSON loaders/savers. Loaders throw ConfigError with the file path and the
// offending field; relative paths inside a scenario (network, reduced, wind
// CSVs) resolve against the scenario file's directory.

NetworkModel load_network(const std::string& path);
void save_network(const NetworkModel& m, const std::string& path);

ReducedGrid load_reduced(const std::string& path);
void save_reduced(const ReducedGrid& g, const std::string& path);

Scenario load_scenario(const std::string& path);

// Per-run summary as a small JSON object (metrics + violation counts).
void save_summary(const SummaryMetrics& s, const std::string& mode,
                  const std::string& path);

}  // namespace windstr
