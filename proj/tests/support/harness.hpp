#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <vector>

#include "kep/gates.hpp"
#include "kep/paillier.hpp"
#include "kep/random.hpp"
#include "kep/transport.hpp"

namespace kep::testing {

// Key material shared by tests, generated once per (parties, threshold).
inline const paillier::KeyMaterial& Keys(uint32_t parties, uint32_t threshold = 0,
                                         size_t bits = paillier::kMinKeyBits) {
  static std::mutex mu;
  static std::map<std::tuple<uint32_t, uint32_t, size_t>, paillier::KeyMaterial> cache;
  if (threshold == 0) threshold = parties;
  std::lock_guard lock(mu);
  const auto key = std::make_tuple(parties, threshold, bits);
  auto it = cache.find(key);
  if (it == cache.end()) {
    Rng rng = Rng::FromSeed(0x7e57, parties * 1000 + threshold);
    it = cache.emplace(key, paillier::Keygen(parties, threshold, bits, rng)).first;
  }
  return it->second;
}

inline mpz_class Decrypt(const paillier::KeyMaterial& keys, const paillier::Ciphertext& c) {
  return paillier::DecryptWithShares(keys.public_key, keys.shares, c);
}

// Runs fn as every party over the simulated network and returns the
// per-party results (index i - 1 for party i).
template <class T>
std::vector<T> RunParties(const paillier::KeyMaterial& keys,
                          const std::function<T(gates::GateContext&)>& fn, uint64_t seed = 1,
                          gates::DecryptionObserver* observer = nullptr,
                          transport::SimResult* sim_out = nullptr) {
  const uint32_t n = keys.public_key.parties();
  std::vector<T> results(n);
  std::vector<transport::PartyBehavior> behaviors;
  for (uint32_t p = 1; p <= n; ++p) {
    behaviors.push_back([&, p](transport::Channel& channel) {
      Rng rng = Rng::FromSeed(seed, p);
      gates::GateContext ctx(keys.public_key, keys.shares[p - 1], channel, rng);
      ctx.set_observer(observer);
      results[p - 1] = fn(ctx);
    });
  }
  auto sim = transport::Simulate(behaviors);
  if (sim_out != nullptr) *sim_out = std::move(sim);
  return results;
}

// Records every threshold decryption site.
class RecordingObserver : public gates::DecryptionObserver {
 public:
  void OnThresholdDecryption(gates::DecryptionSite site, size_t values) override {
    std::lock_guard lock(mu_);
    counts_[site] += values;
  }
  std::map<gates::DecryptionSite, size_t> counts() const {
    std::lock_guard lock(mu_);
    return counts_;
  }

 private:
  mutable std::mutex mu_;
  std::map<gates::DecryptionSite, size_t> counts_;
};

}  // namespace kep::testing
