#pragma once

#include <gmpxx.h>

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kep/constellation.hpp"
#include "kep/gates.hpp"
#include "kep/medical.hpp"
#include "kep/paillier.hpp"
#include "kep/transport.hpp"

// Party-side execution of the randomized kidney exchange protocol:
// construction, evaluation, prioritization, mapping, selection, reverse
// mapping and output.
namespace kep::protocol {

using constellation::ExchangeGraph;
using constellation::Neighborhood;
using constellation::Party;
using paillier::Ciphertext;

// Public session parameters. All parties must hold identical values; the
// handshake compares Manifest() digests before any input is used.
struct SessionConfig {
  uint32_t parties = 0;
  uint32_t threshold = 0;
  uint32_t max_cycle = 3;
  size_t key_bits = 0;
  size_t antigen_count = 0;
  Digest catalog_hash{};
  Digest enumeration_hash{};
  Digest key_fingerprint{};

  Digest Manifest() const;
  // First four manifest bytes; tags every gate message of the session.
  uint32_t Tag() const;
};

SessionConfig MakeSessionConfig(const paillier::PublicKey& pk,
                                const medical::AntigenCatalog& catalog,
                                const std::vector<ExchangeGraph>& graphs, uint32_t max_cycle = 3);
// Same, for callers that only know the catalog size and hash.
SessionConfig MakeSessionConfig(const paillier::PublicKey& pk, size_t antigen_count,
                                const Digest& catalog_hash,
                                const std::vector<ExchangeGraph>& graphs, uint32_t max_cycle = 3);

struct Outcome {
  enum class Status { kNoExchange, kExchange };
  Status status = Status::kNoExchange;
  Party donor = 0;      // n_d, only for kExchange
  Party recipient = 0;  // n_p, only for kExchange

  static Outcome NoExchange() { return {}; }
  static Outcome Exchange(Party donor, Party recipient);
  static Outcome FromNeighborhood(const Neighborhood& n);
  bool exchange() const { return status == Status::kExchange; }
  Neighborhood neighborhood() const { return {donor, recipient}; }
  // {"status":"exchange","n_d":3,"n_p":2} or {"status":"no_exchange"}
  std::string ToJson() const;
  friend bool operator==(const Outcome&, const Outcome&) = default;
};

// iota x iota encrypted compatibility bits; diagonal holds the public
// encryption of 0.
class EncryptedAdjacencyMatrix {
 public:
  EncryptedAdjacencyMatrix() = default;
  explicit EncryptedAdjacencyMatrix(Party parties);
  Party parties() const { return parties_; }
  // 1-based donor row i, patient column j.
  const Ciphertext& at(Party i, Party j) const { return cells_.at((i - 1) * parties_ + (j - 1)); }
  Ciphertext& at(Party i, Party j) { return cells_.at((i - 1) * parties_ + (j - 1)); }

 private:
  Party parties_ = 0;
  std::vector<Ciphertext> cells_;
};

enum class Phase : uint8_t {
  kHandshake,
  kConstruction,
  kEvaluation,
  kPrioritization,
  kMapping,
  kSelection,
  kOutput,
};
inline constexpr size_t kPhaseCount = 7;
std::string_view ToString(Phase phase);

struct PhaseMetrics {
  double ms = 0;
  uint64_t incoming_bytes = 0;
};

struct RunReport {
  Outcome outcome;
  std::array<PhaseMetrics, kPhaseCount> phases{};
  double total_ms = 0;
  uint64_t incoming_bytes = 0;
  gates::GateStats stats;
  const PhaseMetrics& phase(Phase p) const { return phases[static_cast<size_t>(p)]; }
};

// Broadcasts the manifest digest and this party's seed commitment, checks
// every other party's manifest. ProtocolAbort on mismatch. Returns the seed
// commitments (index i - 1 for party i).
std::vector<Digest> Handshake(gates::GateContext& ctx, const SessionConfig& cfg,
                              const Digest& seed_commitment);

EncryptedAdjacencyMatrix PhaseConstruction(gates::GateContext& ctx, const SessionConfig& cfg,
                                           const medical::Quote& my_quote);
std::vector<Ciphertext> PhaseEvaluation(gates::GateContext& ctx, const EncryptedAdjacencyMatrix& a,
                                        const std::vector<ExchangeGraph>& graphs);
// Local only.
std::vector<Ciphertext> PhasePrioritization(const paillier::PublicKey& pk,
                                            const std::vector<Ciphertext>& l,
                                            const std::vector<ExchangeGraph>& graphs);
std::vector<Ciphertext> PhaseMapping(gates::GateContext& ctx,
                                     const constellation::PartyPrimes& my_primes,
                                     const std::vector<ExchangeGraph>& graphs);
// The decrypted l2*, or nullopt when no constellation is possible.
std::optional<mpz_class> PhaseSelection(gates::GateContext& ctx, const std::vector<Ciphertext>& l1,
                                        const std::vector<Ciphertext>& l2);
Outcome PhaseReverseAndOutput(const std::optional<mpz_class>& product,
                              const constellation::PartyPrimes& my_primes);

// Runs every phase. Failures are rethrown with the phase name prefixed;
// nothing is output on abort.
RunReport RunKepRnd(gates::GateContext& ctx, const SessionConfig& cfg,
                    const medical::Quote& my_quote, const std::vector<ExchangeGraph>& graphs,
                    const Digest& seed_commitment);

Digest SeedCommitment(uint64_t seed, Party party);

// ---------------------------------------------------------------------------
// Whole sessions with all parties in one process.

struct SimulatedRunOptions {
  size_t key_bits = paillier::kMinKeyBits;
  uint32_t threshold = 0;  // 0 means tau = iota
  uint32_t max_cycle = 3;
  uint64_t seed = 1;
  // Reused if set, otherwise generated from seed.
  const paillier::KeyMaterial* keys = nullptr;
  // Reused if set, otherwise enumerated.
  const std::vector<ExchangeGraph>* graphs = nullptr;
  std::optional<uint64_t> scheduler_seed;
  gates::DecryptionObserver* observer = nullptr;  // shared by all parties
  std::chrono::milliseconds receive_timeout{10 * 60 * 1000};
};

struct SimulatedRun {
  std::vector<RunReport> reports;  // index i - 1 for party i
  transport::SimResult sim;
  std::vector<Outcome> outcomes() const;
};

SimulatedRun RunSimulated(const std::vector<medical::Quote>& quotes, size_t antigen_count,
                          const Digest& catalog_hash, const SimulatedRunOptions& options = {});

// Assembles per-party outcomes into the suggested constellation. Throws
// InvariantError when the outcomes are not reciprocal; nullopt when nobody
// exchanges.
std::optional<ExchangeGraph> AssembleGraph(const std::vector<Outcome>& outcomes);

}  // namespace kep::protocol
