#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "kep/medical.hpp"
#include "kep/paillier.hpp"
#include "kep/random.hpp"
#include "kep/transport.hpp"

// Interactive sub-protocols over threshold-Paillier ciphertexts. Every
// party of a session calls the same gate sequence with identical public
// arguments; messages are tagged (session, gate, round, sender) and a tag
// mismatch aborts the session.
namespace kep::gates {

using paillier::Ciphertext;
using paillier::KeyShare;
using paillier::PartyIndex;
using paillier::PublicKey;

// The only places where a threshold decryption may happen.
enum class DecryptionSite : uint8_t {
  kMultMask,          // x + sum r_i inside Mult, uniformly masked
  kCrsEmptiness,      // the emptiness bit of CrsC
  kSelectedProduct,   // l2* in the selection phase
};

std::string_view ToString(DecryptionSite site);

class DecryptionObserver {
 public:
  virtual ~DecryptionObserver() = default;
  virtual void OnThresholdDecryption(DecryptionSite site, size_t values) = 0;
};

struct GateStats {
  uint64_t mult = 0;
  uint64_t ufi_mult = 0;
  uint64_t less_than = 0;
  uint64_t crs_c = 0;
  uint64_t comp = 0;
  uint64_t decrypted_values = 0;
  uint64_t gates = 0;  // tagged gate invocations
};

// A ciphertext promised to decrypt to 0 or 1.
struct EncryptedBit {
  Ciphertext c;
};

class GateContext {
 public:
  GateContext(const PublicKey& pk, const KeyShare& share, transport::Channel& channel, Rng& rng,
              uint32_t session_tag = 0);

  PartyIndex self() const { return share_.party_index; }
  uint32_t parties() const { return pk_.parties(); }
  uint32_t threshold() const { return pk_.threshold(); }
  const PublicKey& pk() const { return pk_; }
  const KeyShare& share() const { return share_; }
  Rng& rng() { return rng_; }
  transport::Channel& channel() { return channel_; }
  GateStats& stats() { return stats_; }
  const GateStats& stats() const { return stats_; }
  void set_observer(DecryptionObserver* observer) { observer_ = observer; }

  // Starts a new tagged gate and returns its sequence number.
  uint32_t BeginGate();

  void BroadcastValues(uint32_t gate, uint32_t round, std::span<const Ciphertext> values);
  void SendValues(PartyIndex to, uint32_t gate, uint32_t round, std::span<const Ciphertext> values);
  // Receives the next message from `from` and checks its tag. Values are
  // validated as elements of Z*_{N^2}.
  std::vector<Ciphertext> ReceiveValues(PartyIndex from, uint32_t gate, uint32_t round);

  // Parties 1..tau broadcast partial decryptions; everyone combines.
  std::vector<mpz_class> ThresholdDecrypt(std::span<const Ciphertext> values, DecryptionSite site);

  // Party 1 rerandomizes and broadcasts, so all parties keep identical
  // ciphertexts.
  std::vector<Ciphertext> SharedRerandomize(std::span<const Ciphertext> values);

 private:
  Bytes EncodeMessage(uint32_t gate, uint32_t round, std::span<const Ciphertext> values) const;

  const PublicKey& pk_;
  const KeyShare& share_;
  transport::Channel& channel_;
  Rng& rng_;
  uint32_t session_tag_;
  uint32_t next_gate_ = 1;
  GateStats stats_;
  DecryptionObserver* observer_ = nullptr;
};

Ciphertext Mult(GateContext& ctx, const Ciphertext& x, const Ciphertext& y);
// Element-wise products in a single round.
std::vector<Ciphertext> MultMany(GateContext& ctx, std::span<const Ciphertext> xs,
                                 std::span<const Ciphertext> ys);

// Product of all inputs with a balanced tree of Mult; a singleton input is
// returned rerandomized.
Ciphertext UfiMult(GateContext& ctx, std::span<const Ciphertext> xs);
// Runs one UfiMult per list, sharing rounds level by level.
std::vector<Ciphertext> UfiMultMany(GateContext& ctx, const std::vector<std::vector<Ciphertext>>& lists);

// Integer polynomial Q with Q(t) = scale for t in (bound, 2 bound) and
// Q(t) = 0 for t in [1, bound]; [x < y] = Q(y - x + bound) / scale.
struct LtPolynomial {
  std::vector<mpz_class> coefficients;  // ascending degree, degree 2 bound - 2
  mpz_class scale;
};
const LtPolynomial& LessThanPolynomial(uint64_t bound);

// Encrypted [x < y] for plaintexts the caller guarantees to lie in
// [0, bound). InputError if bound == 0 or 2 bound >= N.
EncryptedBit LessThan(GateContext& ctx, const Ciphertext& x, const Ciphertext& y, uint64_t bound);

// Number of Mult calls LessThan performs for a given bound.
uint64_t LessThanMultCount(uint64_t bound);

struct Selection {
  Ciphertext u;
  Ciphertext v;
};

// Conditional random selection with output check. Returns the pair at an
// argmax of U chosen uniformly among ties, or nullopt when every u is 0.
// Only the emptiness bit is decrypted.
std::optional<Selection> CrsC(GateContext& ctx, std::span<const Ciphertext> u,
                              std::span<const Ciphertext> v, uint64_t bound);

struct CompSums {
  Ciphertext blood;     // sum over k with B_P[k] = 1 of B_D[k]
  Ciphertext antigens;  // sum over k with A_P[k] = 1 of A_D[k]
};

// Input sharing phase of the compatibility gate: the donor party sends its
// encrypted vectors to the patient party, who accumulates both sums and
// broadcasts them.
CompSums CompInputSharing(GateContext& ctx, PartyIndex donor_party, PartyIndex patient_party,
                          const medical::DonorInput* my_donor, const medical::PatientInput* my_patient,
                          size_t antigen_count);

// Encrypted compatibility bit of donor_party's donor and patient_party's
// patient. Only those two parties pass inputs; everyone else passes null.
EncryptedBit Comp(GateContext& ctx, PartyIndex donor_party, PartyIndex patient_party,
                  const medical::DonorInput* my_donor, const medical::PatientInput* my_patient,
                  size_t antigen_count);

}  // namespace kep::gates
