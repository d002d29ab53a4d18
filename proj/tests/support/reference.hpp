#pragma once

// Reference computations written independently of the library, used as
// oracles by unit and acceptance tests.

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "kep/constellation.hpp"
#include "kep/medical.hpp"
#include "kep/oracle.hpp"

namespace kep::reference {

using constellation::Edge;
using constellation::Party;

// Permutations of n points whose cycles have length 1..3:
// a(n) = a(n-1) + (n-1) a(n-2) + (n-1)(n-2) a(n-3).
inline uint64_t CycleRecurrence(uint64_t n) {
  std::vector<uint64_t> a{1, 1, 2};
  for (uint64_t k = 3; k <= n; ++k) {
    a.push_back(a[k - 1] + (k - 1) * a[k - 2] + (k - 1) * (k - 2) * a[k - 3]);
  }
  return a[n];
}

// Nonempty edge sets on [1, n] with in = out <= 1 at every node and cycles of
// length <= max_cycle, found by filtering every subset of the off-diagonal
// edges. Feasible up to n = 5.
inline std::set<std::vector<Edge>> BruteForceConstellations(Party n, uint32_t max_cycle) {
  std::vector<Edge> all;
  for (Party i = 1; i <= n; ++i) {
    for (Party j = 1; j <= n; ++j) {
      if (i != j) all.push_back({i, j});
    }
  }
  std::set<std::vector<Edge>> out;
  const uint64_t subsets = uint64_t{1} << all.size();
  for (uint64_t mask = 1; mask < subsets; ++mask) {
    std::vector<int> succ(n + 1, 0), in(n + 1, 0);
    bool ok = true;
    for (size_t k = 0; k < all.size() && ok; ++k) {
      if (!(mask >> k & 1)) continue;
      const Edge e = all[k];
      if (succ[e.from] != 0 || in[e.to] != 0) ok = false;
      succ[e.from] = static_cast<int>(e.to);
      in[e.to] = 1;
    }
    if (!ok) continue;
    for (Party i = 1; i <= n && ok; ++i) {
      if ((succ[i] != 0) != (in[i] != 0)) ok = false;
      if (succ[i] == 0) continue;
      uint32_t len = 1;
      int cur = succ[i];
      while (cur != static_cast<int>(i) && len <= max_cycle) {
        cur = succ[cur];
        ++len;
      }
      if (len > max_cycle) ok = false;
    }
    if (!ok) continue;
    std::vector<Edge> edges;
    for (size_t k = 0; k < all.size(); ++k) {
      if (mask >> k & 1) edges.push_back(all[k]);
    }
    out.insert(edges);
  }
  return out;
}

namespace detail {
inline uint32_t BestCover(const oracle::CompatibilityMatrix& m, std::vector<bool>& used, uint32_t from) {
  const auto n = static_cast<uint32_t>(m.size());
  while (from < n && used[from]) ++from;
  if (from == n) return 0;
  used[from] = true;
  uint32_t best = BestCover(m, used, from + 1);
  for (uint32_t j = 0; j < n; ++j) {
    if (used[j] || !m[from][j]) continue;
    used[j] = true;
    if (m[j][from]) best = std::max(best, 2 + BestCover(m, used, from + 1));
    for (uint32_t k = 0; k < n; ++k) {
      if (used[k] || !m[j][k] || !m[k][from]) continue;
      used[k] = true;
      best = std::max(best, 3 + BestCover(m, used, from + 1));
      used[k] = false;
    }
    used[j] = false;
  }
  used[from] = false;
  return best;
}
}  // namespace detail

// Maximum number of vertices covered by vertex-disjoint 2- and 3-cycles of
// m, by recursion over the smallest uncovered vertex.
inline uint32_t MaxWelfare(const oracle::CompatibilityMatrix& m) {
  std::vector<bool> used(m.size(), false);
  return detail::BestCover(m, used, 0);
}

// Donation table, rows donor, columns patient, order O, B, A, AB.
inline constexpr bool kAboTable[4][4] = {
    {true, true, true, true},
    {false, true, false, true},
    {false, false, true, true},
    {false, false, false, true},
};

// Compatibility from blood types and antigen/antibody index sets.
inline bool ClearCompatible(medical::BloodType donor, medical::BloodType patient,
                            const std::vector<size_t>& antigens, const std::vector<size_t>& antibodies) {
  if (!kAboTable[static_cast<int>(donor)][static_cast<int>(patient)]) return false;
  for (size_t a : antigens) {
    if (std::find(antibodies.begin(), antibodies.end(), a) != antibodies.end()) return false;
  }
  return true;
}

}  // namespace kep::reference
