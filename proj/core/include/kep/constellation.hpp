#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "kep/bytes.hpp"
#include "kep/random.hpp"

// Input-independent exchange constellation graphs: disjoint directed 2- and
// 3-cycles on the party set [1, iota], the neighborhoods parties take in
// them, and the prime encoding of neighborhoods used by the mapping phase.
namespace kep::constellation {

using Party = uint32_t;

struct Edge {
  Party from = 0;  // donor side
  Party to = 0;    // patient side
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

class ExchangeGraph {
 public:
  ExchangeGraph() = default;
  // Edges are stored sorted.
  ExchangeGraph(Party parties, std::vector<Edge> edges);

  Party parties() const { return parties_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool contains(Edge e) const;
  std::string ToString() const;

  friend bool operator==(const ExchangeGraph&, const ExchangeGraph&) = default;
  friend auto operator<=>(const ExchangeGraph& a, const ExchangeGraph& b) {
    return a.edges_ <=> b.edges_;
  }

 private:
  Party parties_ = 0;
  std::vector<Edge> edges_;
};

// InvariantError unless every node has in = out = 1 or degree 0, every
// cycle has length in [2, max_cycle] and the graph has at least one edge.
void ValidateExchangeGraph(const ExchangeGraph& graph, uint32_t max_cycle = 3);

// Every nonempty disjoint union of directed 2-cycles (and 3-cycles when
// max_cycle = 3) on [1, parties], sorted by edge list. parties >= 2,
// max_cycle in {2, 3}.
std::vector<ExchangeGraph> Enumerate(Party parties, uint32_t max_cycle = 3);

// a(parties) - 1 from the cycle-count recurrence.
uint64_t Count(Party parties, uint32_t max_cycle = 3);

struct Neighborhood {
  Party donor = 0;      // n_d: whose donor gives to my patient
  Party recipient = 0;  // n_p: whose patient gets my donor's kidney
  bool participates() const { return donor != 0; }
  std::string ToString() const;
  friend auto operator<=>(const Neighborhood&, const Neighborhood&) = default;
};

Neighborhood ExtractNeighborhood(const ExchangeGraph& graph, Party party);

// Entry i - 1 lists the neighborhoods of party i over all graphs plus
// (0, 0), sorted.
std::vector<std::vector<Neighborhood>> Neighborhoods(Party parties, uint32_t max_cycle = 3);
std::vector<Neighborhood> NeighborhoodsOf(Party parties, uint32_t max_cycle, Party party);

uint32_t Welfare(const ExchangeGraph& graph);

// Digest over the canonical enumeration, exchanged at session start.
Digest EnumerationHash(const std::vector<ExchangeGraph>& graphs);

// Deterministic Miller-Rabin, exact for all 64-bit inputs.
bool IsPrime(uint64_t n);

inline constexpr uint64_t kPrimeBase = 1000000;

struct PrimeInterval {
  uint64_t lo = 0;  // inclusive
  uint64_t hi = 0;  // exclusive
  bool contains(uint64_t x) const { return x >= lo && x < hi; }
};

// I_i = [base + (i - 1) W, base + i W), W doubled until every interval
// holds at least |N_i| primes. Entry i - 1 belongs to party i.
std::vector<PrimeInterval> PrimeIntervals(Party parties, uint32_t max_cycle = 3);

// One party's private map from neighborhoods to primes of its interval.
class PartyPrimes {
 public:
  PartyPrimes() = default;
  PartyPrimes(Party party, PrimeInterval interval, std::map<Neighborhood, uint64_t> primes);

  Party party() const { return party_; }
  const PrimeInterval& interval() const { return interval_; }
  const std::map<Neighborhood, uint64_t>& primes() const { return primes_; }
  // InvariantError for neighborhoods outside N_i.
  uint64_t prime(const Neighborhood& n) const;

 private:
  Party party_ = 0;
  PrimeInterval interval_;
  std::map<Neighborhood, uint64_t> primes_;
};

// Samples |N_i| distinct primes of I_i uniformly and assigns them to N_i in
// uniformly random order.
PartyPrimes AssignPartyPrimes(Party parties, uint32_t max_cycle, Party party, Rng& rng);

struct PrimeAssignment {
  std::vector<PartyPrimes> parties;  // entry i - 1 belongs to party i
  const PartyPrimes& of(Party party) const { return parties.at(party - 1); }
};

// Full assignment for all parties, deterministic in seed. Party i uses
// stream i of the seed.
PrimeAssignment AssignPrimes(Party parties, uint32_t max_cycle, uint64_t seed);

// The product of p^(i)_{N_i(graph)} over all parties.
mpz_class EncodeGraph(const ExchangeGraph& graph, const PrimeAssignment& assignment);

// The unique neighborhood whose prime divides product. CorruptionError when
// none or several do.
Neighborhood ReverseMap(const mpz_class& product, const PartyPrimes& primes);
Neighborhood ReverseMap(const mpz_class& product, const PrimeAssignment& assignment, Party party);

// Binary cache: magic, parties, max_cycle, count, then per graph a u32 edge
// count followed by (from, to) u16 pairs. Everything big-endian.
void SaveEnumeration(const std::filesystem::path& path, Party parties, uint32_t max_cycle,
                     const std::vector<ExchangeGraph>& graphs);
// nullopt when the file is missing, for different parameters, or corrupt.
std::optional<std::vector<ExchangeGraph>> LoadEnumeration(const std::filesystem::path& path,
                                                          Party parties, uint32_t max_cycle);
// Loads from cache_dir when possible, otherwise enumerates and writes the
// cache. An empty path disables caching.
std::vector<ExchangeGraph> EnumerateCached(Party parties, uint32_t max_cycle,
                                           const std::filesystem::path& cache_dir);

}  // namespace kep::constellation
