#pragma once

#include <cstdint>
#include <vector>

#include "kep/constellation.hpp"
#include "kep/medical.hpp"
#include "kep/random.hpp"

// Plaintext reference solution of the randomized kidney exchange: the clear
// compatibility graph, its potential constellations and the welfare
// optimum.
namespace kep::oracle {

using constellation::ExchangeGraph;

struct ClearInstance {
  std::vector<medical::Quote> quotes;  // entry i - 1 belongs to party i
  size_t antigen_count = 0;
};

// [i - 1][j - 1] is true iff donor i is compatible with patient j; the
// diagonal is false.
using CompatibilityMatrix = std::vector<std::vector<bool>>;

CompatibilityMatrix ClearCompatibilityGraph(const ClearInstance& instance);

// Every edge of graph is an edge of the compatibility graph.
bool IsSubgraph(const ExchangeGraph& graph, const CompatibilityMatrix& compatible);

struct Solution {
  uint32_t max_welfare = 0;
  std::vector<ExchangeGraph> optima;  // in enumeration order; empty if none
};

// graphs defaults to constellation::Enumerate(iota, max_cycle).
Solution Solve(const CompatibilityMatrix& compatible, uint32_t max_cycle = 3,
               const std::vector<ExchangeGraph>* graphs = nullptr);
Solution Solve(const ClearInstance& instance, uint32_t max_cycle = 3,
               const std::vector<ExchangeGraph>* graphs = nullptr);

// Uniform choice among optima. InputError when empty.
const ExchangeGraph& SampleUniform(const std::vector<ExchangeGraph>& optima, Rng& rng);

}  // namespace kep::oracle
