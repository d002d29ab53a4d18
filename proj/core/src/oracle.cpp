#include "kep/oracle.hpp"

#include "kep/errors.hpp"

namespace kep::oracle {

CompatibilityMatrix ClearCompatibilityGraph(const ClearInstance& instance) {
  const size_t n = instance.quotes.size();
  CompatibilityMatrix out(n, std::vector<bool>(n, false));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      out[i][j] =
          medical::PlaintextCompatible(instance.quotes[i].donor, instance.quotes[j].patient);
    }
  }
  return out;
}

bool IsSubgraph(const ExchangeGraph& graph, const CompatibilityMatrix& compatible) {
  for (const auto& e : graph.edges()) {
    if (!compatible.at(e.from - 1).at(e.to - 1)) return false;
  }
  return true;
}

Solution Solve(const CompatibilityMatrix& compatible, uint32_t max_cycle,
               const std::vector<ExchangeGraph>* graphs) {
  const auto n = static_cast<constellation::Party>(compatible.size());
  std::vector<ExchangeGraph> enumerated;
  if (graphs == nullptr) {
    enumerated = constellation::Enumerate(n, max_cycle);
    graphs = &enumerated;
  }
  Solution out;
  for (const auto& g : *graphs) {
    if (!IsSubgraph(g, compatible)) continue;
    const uint32_t w = constellation::Welfare(g);
    if (w > out.max_welfare) {
      out.max_welfare = w;
      out.optima.clear();
    }
    if (w == out.max_welfare) out.optima.push_back(g);
  }
  return out;
}

Solution Solve(const ClearInstance& instance, uint32_t max_cycle,
               const std::vector<ExchangeGraph>* graphs) {
  return Solve(ClearCompatibilityGraph(instance), max_cycle, graphs);
}

const ExchangeGraph& SampleUniform(const std::vector<ExchangeGraph>& optima, Rng& rng) {
  if (optima.empty()) throw InputError("no optimal constellation to sample from");
  return optima[rng.Uniform(optima.size())];
}

}  // namespace kep::oracle
