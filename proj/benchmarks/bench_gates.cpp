// Microbenchmarks for the cryptographic primitives and gates. Gate
// benchmarks run every party in one process over the simulated network.

#include <benchmark/benchmark.h>

#include <functional>
#include <map>
#include <vector>

#include "kep/constellation.hpp"
#include "kep/gates.hpp"
#include "kep/medical.hpp"
#include "kep/paillier.hpp"
#include "kep/random.hpp"
#include "kep/transport.hpp"

namespace {

using namespace kep;
using paillier::Ciphertext;

const paillier::KeyMaterial& Keys(uint32_t parties, size_t bits) {
  static std::map<std::pair<uint32_t, size_t>, paillier::KeyMaterial> cache;
  auto it = cache.find({parties, bits});
  if (it == cache.end()) {
    Rng rng = Rng::FromSeed(0xbe7c, parties);
    it = cache.emplace(std::make_pair(parties, bits), paillier::Keygen(parties, parties, bits, rng)).first;
  }
  return it->second;
}

void AllParties(const paillier::KeyMaterial& keys, const std::function<void(gates::GateContext&)>& fn) {
  std::vector<transport::PartyBehavior> behaviors;
  for (uint32_t p = 1; p <= keys.public_key.parties(); ++p) {
    behaviors.push_back([&, p](transport::Channel& channel) {
      Rng rng = Rng::FromSeed(11, p);
      gates::GateContext ctx(keys.public_key, keys.shares[p - 1], channel, rng);
      fn(ctx);
    });
  }
  transport::Simulate(behaviors);
}

void BM_Keygen(benchmark::State& state) {
  Rng rng = Rng::FromSeed(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(paillier::Keygen(3, 3, state.range(0), rng));
  }
}
BENCHMARK(BM_Keygen)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Encrypt(benchmark::State& state) {
  const auto& pk = Keys(3, state.range(0)).public_key;
  Rng rng = Rng::FromSeed(2);
  const mpz_class m = rng.UniformBelow(pk.n());
  for (auto _ : state) benchmark::DoNotOptimize(paillier::Encrypt(pk, m, rng));
}
BENCHMARK(BM_Encrypt)->Arg(512)->Arg(1024)->Unit(benchmark::kMicrosecond);

void BM_PartialDecrypt(benchmark::State& state) {
  const auto& keys = Keys(3, state.range(0));
  Rng rng = Rng::FromSeed(3);
  const auto c = paillier::Encrypt(keys.public_key, 42, rng);
  for (auto _ : state) benchmark::DoNotOptimize(paillier::PartialDecrypt(keys.public_key, keys.shares[0], c));
}
BENCHMARK(BM_PartialDecrypt)->Arg(512)->Arg(1024)->Unit(benchmark::kMicrosecond);

void BM_Combine(benchmark::State& state) {
  const auto& keys = Keys(3, state.range(0));
  Rng rng = Rng::FromSeed(4);
  const auto c = paillier::Encrypt(keys.public_key, 42, rng);
  std::vector<paillier::PartialDecryption> partials;
  for (const auto& s : keys.shares) partials.push_back(paillier::PartialDecrypt(keys.public_key, s, c));
  for (auto _ : state) benchmark::DoNotOptimize(paillier::Combine(keys.public_key, c, partials));
}
BENCHMARK(BM_Combine)->Arg(512)->Arg(1024)->Unit(benchmark::kMicrosecond);

// Batched multiplication of range(1) pairs among range(0) parties.
void BM_MultMany(benchmark::State& state) {
  const auto& keys = Keys(state.range(0), paillier::kMinKeyBits);
  Rng rng = Rng::FromSeed(5);
  std::vector<Ciphertext> xs, ys;
  for (int64_t i = 0; i < state.range(1); ++i) {
    xs.push_back(paillier::Encrypt(keys.public_key, i, rng));
    ys.push_back(paillier::Encrypt(keys.public_key, i + 1, rng));
  }
  for (auto _ : state) AllParties(keys, [&](gates::GateContext& ctx) { gates::MultMany(ctx, xs, ys); });
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_MultMany)->Args({3, 1})->Args({3, 32})->Args({5, 32})->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_LessThan(benchmark::State& state) {
  const auto& keys = Keys(3, paillier::kMinKeyBits);
  Rng rng = Rng::FromSeed(6);
  const auto x = paillier::Encrypt(keys.public_key, 1, rng);
  const auto y = paillier::Encrypt(keys.public_key, 2, rng);
  const auto bound = static_cast<uint64_t>(state.range(0));
  for (auto _ : state) AllParties(keys, [&](gates::GateContext& ctx) { gates::LessThan(ctx, x, y, bound); });
  state.counters["mults"] = static_cast<double>(gates::LessThanMultCount(bound));
}
BENCHMARK(BM_LessThan)->Arg(4)->Arg(8)->Arg(16)->UseRealTime()->Unit(benchmark::kMillisecond);

// Compatibility of one donor/patient pair over the default antigen catalog.
void BM_Comp(benchmark::State& state) {
  const auto& keys = Keys(3, paillier::kMinKeyBits);
  const auto& cat = medical::AntigenCatalog::Default();
  const medical::DonorInput donor{medical::DonorBloodVector(medical::BloodType::kO),
                                  medical::BitVector(cat.size(), 0)};
  const medical::PatientInput patient{medical::PatientBloodVector(medical::BloodType::kA),
                                      medical::BitVector(cat.size(), 0)};
  for (auto _ : state) {
    AllParties(keys, [&](gates::GateContext& ctx) {
      gates::Comp(ctx, 1, 2, ctx.self() == 1 ? &donor : nullptr, ctx.self() == 2 ? &patient : nullptr,
                  cat.size());
    });
  }
}
BENCHMARK(BM_Comp)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_Enumerate(benchmark::State& state) {
  const auto n = static_cast<uint32_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(constellation::Enumerate(n));
}
BENCHMARK(BM_Enumerate)->DenseRange(5, 9, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
