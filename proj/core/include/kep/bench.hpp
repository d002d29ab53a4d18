#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "kep/medical.hpp"

// End-to-end benchmark runs producing per-phase timings and traffic.
namespace kep::bench {

struct BenchRow {
  uint32_t iota = 0;
  size_t key_bits = 0;
  uint64_t num_graphs = 0;
  double total_ms = 0;
  double t_construct_ms = 0;
  double t_eval_ms = 0;
  double t_prio_ms = 0;
  double t_map_ms = 0;
  double t_select_ms = 0;
  double t_output_ms = 0;
  double traffic_bytes = 0;
  uint32_t reps = 0;
};

struct BenchOptions {
  uint32_t reps = 1;
  size_t key_bits = 512;
  uint64_t seed = 1;
  // Relay server over loopback TCP instead of the in-process simulation.
  bool net = false;
  double antibody_rate = 0.05;
  double antigen_rate = 0.2;
  // Defaults to AntigenCatalog::Default().
  const medical::AntigenCatalog* catalog = nullptr;
  std::filesystem::path cache_dir;
};

// Means over options.reps sessions on freshly generated instances. Phase
// timings are those observed by party 1; traffic is the accumulated
// incoming traffic of all parties.
BenchRow RunBench(uint32_t parties, const BenchOptions& options);

std::string_view CsvHeader();
std::string ToCsvLine(const BenchRow& row);
// Share of total runtime spent in the selection phase.
double SelectionShare(const BenchRow& row);

}  // namespace kep::bench
