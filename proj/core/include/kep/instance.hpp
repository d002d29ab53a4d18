#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "kep/medical.hpp"
#include "kep/oracle.hpp"

// Synthetic party inputs: a random generator, instance directories and
// instances constructed to realize a prescribed compatibility graph.
namespace kep::instance {

struct GeneratorOptions {
  uint32_t parties = 3;
  uint64_t seed = 1;
  // Probability that a patient has an antibody against a given antigen.
  double antibody_rate = 0.05;
  // Probability that a donor carries a given antigen.
  double antigen_rate = 0.2;
  // Relative weights of O, B, A, AB.
  std::array<double, 4> blood_weights{1, 1, 1, 1};
  // Resampling budget per party for an incompatible own pair.
  uint32_t max_attempts = 1000;
};

// Deterministic in options.seed. A party whose own pair stays compatible
// after max_attempts keeps its last sample.
std::vector<medical::PartyRecord> Generate(const GeneratorOptions& options,
                                           const medical::AntigenCatalog& catalog);

// party-<i>.json for i = 1..n.
void WriteInstance(const std::filesystem::path& dir,
                   const std::vector<medical::PartyRecord>& records);
// Reads party-1.json, party-2.json, ... until the first missing index.
std::vector<medical::PartyRecord> ReadInstance(const std::filesystem::path& dir);

oracle::ClearInstance Encode(const std::vector<medical::PartyRecord>& records,
                             const medical::AntigenCatalog& catalog);

struct RealizedInstance {
  medical::AntigenCatalog catalog;
  std::vector<medical::PartyRecord> records;
};

// Inputs whose clear compatibility graph is exactly `compatible`: every
// blood type is O, donor i carries antigen X<i>, and patient j has an
// antibody against X<i> for every i that may not donate to j (including
// its own donor). The catalog has one antigen per party.
RealizedInstance RealizeGraph(const oracle::CompatibilityMatrix& compatible);

}  // namespace kep::instance
