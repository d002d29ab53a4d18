#include <gtest/gtest.h>

#include <map>
#include <set>

#include "kep/constellation.hpp"
#include "kep/errors.hpp"
#include "kep/instance.hpp"
#include "kep/oracle.hpp"
#include "kep/protocol.hpp"
#include "support/harness.hpp"

namespace kep::protocol {
namespace {

using oracle::CompatibilityMatrix;

CompatibilityMatrix FromEdges(uint32_t n, std::initializer_list<std::pair<uint32_t, uint32_t>> edges) {
  CompatibilityMatrix m(n, std::vector<bool>(n, false));
  for (auto [i, j] : edges) m[i - 1][j - 1] = true;
  return m;
}

struct Realized {
  instance::RealizedInstance realized;
  oracle::ClearInstance clear;
};

Realized Realize(const CompatibilityMatrix& m) {
  auto r = instance::RealizeGraph(m);
  auto clear = instance::Encode(r.records, r.catalog);
  return {std::move(r), std::move(clear)};
}

SimulatedRun RunRealized(const Realized& r, uint64_t seed, const paillier::KeyMaterial* keys = nullptr,
                         gates::DecryptionObserver* observer = nullptr) {
  SimulatedRunOptions o;
  o.seed = seed;
  o.keys = keys;
  o.observer = observer;
  return RunSimulated(r.clear.quotes, r.clear.antigen_count, r.realized.catalog.Hash(), o);
}

TEST(OutcomeTest, Json) {
  EXPECT_EQ(Outcome::Exchange(3, 2).ToJson(), R"({"status":"exchange","n_d":3,"n_p":2})");
  EXPECT_EQ(Outcome::NoExchange().ToJson(), R"({"status":"no_exchange"})");
  EXPECT_EQ(Outcome::FromNeighborhood({0, 0}), Outcome::NoExchange());
  EXPECT_EQ(Outcome::FromNeighborhood({2, 4}), Outcome::Exchange(2, 4));
  EXPECT_THROW(Outcome::Exchange(0, 2), InvariantError);
}

TEST(AssembleGraphTest, ReciprocalOutcomes) {
  const std::vector<Outcome> o{Outcome::Exchange(3, 2), Outcome::Exchange(1, 3),
                               Outcome::Exchange(2, 1), Outcome::NoExchange()};
  const auto g = AssembleGraph(o);
  ASSERT_TRUE(g.has_value());
  EXPECT_EQ(*g, ExchangeGraph(4, {{1, 2}, {2, 3}, {3, 1}}));
  EXPECT_FALSE(AssembleGraph({Outcome::NoExchange(), Outcome::NoExchange()}).has_value());
  EXPECT_THROW(AssembleGraph({Outcome::Exchange(2, 2), Outcome::NoExchange()}), InvariantError);
  EXPECT_THROW(AssembleGraph({Outcome::Exchange(2, 9), Outcome::Exchange(1, 1)}), InvariantError);
}

TEST(SessionConfigTest, ManifestCoversEveryField) {
  const auto& keys = testing::Keys(3);
  const auto graphs = constellation::Enumerate(3);
  const auto& cat = medical::AntigenCatalog::Default();
  const SessionConfig base = MakeSessionConfig(keys.public_key, cat, graphs);
  EXPECT_EQ(base.parties, 3u);
  EXPECT_EQ(base.threshold, 3u);
  EXPECT_EQ(base.antigen_count, cat.size());
  EXPECT_EQ(base.catalog_hash, cat.Hash());
  EXPECT_EQ(base.key_fingerprint, keys.public_key.Fingerprint());
  std::vector<SessionConfig> variants(8, base);
  variants[0].parties = 4;
  variants[1].threshold = 2;
  variants[2].max_cycle = 2;
  variants[3].key_bits += 8;
  variants[4].antigen_count += 1;
  variants[5].catalog_hash[0] ^= 1;
  variants[6].enumeration_hash[31] ^= 1;
  variants[7].key_fingerprint[5] ^= 1;
  std::set<Digest> digests{base.Manifest()};
  for (const auto& v : variants) digests.insert(v.Manifest());
  EXPECT_EQ(digests.size(), 9u);
  EXPECT_NE(base.Tag(), variants[5].Tag());
}

TEST(HandshakeTest, MismatchedCatalogAborts) {
  const auto& keys = testing::Keys(2);
  const auto graphs = constellation::Enumerate(2);
  SessionConfig a = MakeSessionConfig(keys.public_key, 4, Sha256("catalog-a"), graphs);
  SessionConfig b = MakeSessionConfig(keys.public_key, 4, Sha256("catalog-b"), graphs);
  std::vector<transport::PartyBehavior> behaviors;
  for (uint32_t p = 1; p <= 2; ++p) {
    behaviors.push_back([&, p](transport::Channel& ch) {
      Rng rng = Rng::FromSeed(1, p);
      const SessionConfig& cfg = p == 1 ? a : b;
      gates::GateContext ctx(keys.public_key, keys.shares[p - 1], ch, rng, cfg.Tag());
      Handshake(ctx, cfg, SeedCommitment(1, p));
    });
  }
  EXPECT_THROW(transport::Simulate(behaviors), ProtocolAbort);
}

TEST(HandshakeTest, ReturnsCommitments) {
  const auto& keys = testing::Keys(3);
  const auto graphs = constellation::Enumerate(3);
  const SessionConfig cfg = MakeSessionConfig(keys.public_key, 2, Sha256("c"), graphs);
  auto out = testing::RunParties<std::vector<Digest>>(keys, [&](gates::GateContext& ctx) {
    return Handshake(ctx, cfg, SeedCommitment(7, ctx.self()));
  });
  const std::vector<Digest> expect{SeedCommitment(7, 1), SeedCommitment(7, 2), SeedCommitment(7, 3)};
  for (const auto& o : out) EXPECT_EQ(o, expect);
}

TEST(PrioritizationTest, ScalesByWelfare) {
  const auto& keys = testing::Keys(3);
  const auto graphs = constellation::Enumerate(3);
  Rng rng = Rng::FromSeed(2);
  std::vector<Ciphertext> l;
  for (size_t i = 0; i < graphs.size(); ++i) l.push_back(paillier::Encrypt(keys.public_key, i % 2, rng));
  const auto p = PhasePrioritization(keys.public_key, l, graphs);
  for (size_t i = 0; i < graphs.size(); ++i) {
    EXPECT_EQ(testing::Decrypt(keys, p[i]), (i % 2) * constellation::Welfare(graphs[i]));
  }
  EXPECT_THROW(PhasePrioritization(keys.public_key, std::vector<Ciphertext>(l.begin(), l.end() - 1), graphs),
               InputError);
}

TEST(PhaseTest, EvaluationMatchesSubgraphTest) {
  const auto m = FromEdges(3, {{1, 2}, {2, 1}, {2, 3}, {3, 1}});
  const auto r = Realize(m);
  const auto& keys = testing::Keys(3);
  const auto graphs = constellation::Enumerate(3);
  const auto cfg = MakeSessionConfig(keys.public_key, r.realized.catalog, graphs);
  auto out = testing::RunParties<std::vector<Ciphertext>>(keys, [&](gates::GateContext& ctx) {
    auto a = PhaseConstruction(ctx, cfg, r.clear.quotes[ctx.self() - 1]);
    for (Party i = 1; i <= 3; ++i) {
      for (Party j = 1; j <= 3; ++j) {
        EXPECT_EQ(testing::Decrypt(keys, a.at(i, j)), (i != j && m[i - 1][j - 1]) ? 1 : 0);
      }
    }
    return PhaseEvaluation(ctx, a, graphs);
  });
  for (size_t g = 0; g < graphs.size(); ++g) {
    EXPECT_EQ(testing::Decrypt(keys, out[0][g]), oracle::IsSubgraph(graphs[g], m) ? 1 : 0)
        << graphs[g].ToString();
  }
}

TEST(PhaseTest, ThreeCycleEvaluationFindsTwoPotentialGraphs) {
  const auto m = FromEdges(4, {{1, 2}, {2, 3}, {3, 1}, {2, 4}, {4, 2}});
  const auto r = Realize(m);
  const auto& keys = testing::Keys(4);
  const auto graphs = constellation::Enumerate(4);
  const auto cfg = MakeSessionConfig(keys.public_key, r.realized.catalog, graphs);
  auto out = testing::RunParties<std::vector<Ciphertext>>(keys, [&](gates::GateContext& ctx) {
    return PhaseEvaluation(ctx, PhaseConstruction(ctx, cfg, r.clear.quotes[ctx.self() - 1]), graphs);
  });
  std::set<ExchangeGraph> potential;
  for (size_t g = 0; g < graphs.size(); ++g) {
    if (testing::Decrypt(keys, out[0][g]) == 1) potential.insert(graphs[g]);
  }
  const std::set<ExchangeGraph> expect{ExchangeGraph(4, {{1, 2}, {2, 3}, {3, 1}}),
                                       ExchangeGraph(4, {{2, 4}, {4, 2}})};
  EXPECT_EQ(potential, expect);
}

TEST(PhaseTest, MappingProducesGraphProducts) {
  const auto& keys = testing::Keys(3);
  const auto graphs = constellation::Enumerate(3);
  const auto assignment = constellation::AssignPrimes(3, 3, 12);
  auto out = testing::RunParties<std::vector<Ciphertext>>(keys, [&](gates::GateContext& ctx) {
    return PhaseMapping(ctx, assignment.of(ctx.self()), graphs);
  });
  for (size_t g = 0; g < graphs.size(); ++g) {
    EXPECT_EQ(out[0][g], out[1][g]);
    EXPECT_EQ(testing::Decrypt(keys, out[2][g]), constellation::EncodeGraph(graphs[g], assignment));
  }
}

TEST(RunTest, ThreeCycleInstance) {
  const auto r = Realize(FromEdges(4, {{1, 2}, {2, 3}, {3, 1}, {2, 4}, {4, 2}}));
  testing::RecordingObserver obs;
  const auto run = RunRealized(r, 5, nullptr, &obs);
  const std::vector<Outcome> expect{Outcome::Exchange(3, 2), Outcome::Exchange(1, 3),
                                    Outcome::Exchange(2, 1), Outcome::NoExchange()};
  EXPECT_EQ(run.outcomes(), expect);
  for (const auto& [site, count] : obs.counts()) {
    EXPECT_TRUE(site == gates::DecryptionSite::kMultMask || site == gates::DecryptionSite::kCrsEmptiness ||
                site == gates::DecryptionSite::kSelectedProduct);
  }
  EXPECT_EQ(obs.counts().at(gates::DecryptionSite::kSelectedProduct), 4u);
  EXPECT_EQ(obs.counts().at(gates::DecryptionSite::kCrsEmptiness), 4u);
  const auto& rep = run.reports[0];
  EXPECT_GT(rep.total_ms, 0);
  EXPECT_GT(rep.incoming_bytes, 0u);
  uint64_t phase_bytes = 0;
  for (const auto& p : rep.phases) phase_bytes += p.incoming_bytes;
  EXPECT_EQ(phase_bytes, rep.incoming_bytes);
  EXPECT_EQ(rep.stats.comp, 12u);
  EXPECT_EQ(rep.stats.crs_c, 1u);
}

TEST(RunTest, NoCompatibilityMeansNoExchangeForAll) {
  const auto r = Realize(FromEdges(3, {{1, 2}, {2, 3}}));
  const auto run = RunRealized(r, 6);
  for (const auto& o : run.outcomes()) EXPECT_EQ(o, Outcome::NoExchange());
}

TEST(RunTest, LowerThreshold) {
  const auto r = Realize(FromEdges(3, {{1, 2}, {2, 1}, {3, 1}}));
  const auto& keys = testing::Keys(3, 2);
  const auto run = RunRealized(r, 7, &keys);
  const std::vector<Outcome> expect{Outcome::Exchange(2, 2), Outcome::Exchange(1, 1),
                                    Outcome::NoExchange()};
  EXPECT_EQ(run.outcomes(), expect);
}

TEST(RunTest, RandomInstancesAgainstOracle) {
  Rng rng = Rng::FromSeed(99);
  for (uint32_t n : {2u, 3u, 3u, 4u}) {
    CompatibilityMatrix m(n, std::vector<bool>(n, false));
    for (uint32_t i = 0; i < n; ++i) {
      for (uint32_t j = 0; j < n; ++j) m[i][j] = i != j && rng.Uniform(2) == 0;
    }
    const auto r = Realize(m);
    const auto run = RunRealized(r, rng.NextU64(), &testing::Keys(n));
    const auto solution = oracle::Solve(m);
    const auto got = AssembleGraph(run.outcomes());
    if (solution.max_welfare == 0) {
      EXPECT_FALSE(got.has_value());
    } else {
      ASSERT_TRUE(got.has_value());
      EXPECT_NE(std::find(solution.optima.begin(), solution.optima.end(), *got), solution.optima.end());
    }
  }
}

TEST(RunTest, EnumerationMismatchAborts) {
  const auto r = Realize(FromEdges(3, {{1, 2}, {2, 1}}));
  const auto& keys = testing::Keys(3);
  const auto graphs = constellation::Enumerate(3);
  const auto cfg = MakeSessionConfig(keys.public_key, r.realized.catalog, graphs);
  const auto other = constellation::Enumerate(3, 2);
  EXPECT_THROW(testing::RunParties<int>(keys,
                                        [&](gates::GateContext& ctx) {
                                          RunKepRnd(ctx, cfg, r.clear.quotes[ctx.self() - 1], other,
                                                    SeedCommitment(1, ctx.self()));
                                          return 0;
                                        }),
               ProtocolAbort);
}

TEST(RunTest, FailurePrefixedWithPhase) {
  const auto r = Realize(FromEdges(2, {{1, 2}, {2, 1}}));
  const auto& keys = testing::Keys(2);
  const auto graphs = constellation::Enumerate(2);
  auto cfg = MakeSessionConfig(keys.public_key, r.realized.catalog, graphs);
  cfg.antigen_count += 1;  // inputs no longer fit the session
  try {
    testing::RunParties<int>(keys, [&](gates::GateContext& ctx) {
      RunKepRnd(ctx, cfg, r.clear.quotes[ctx.self() - 1], graphs, SeedCommitment(1, ctx.self()));
      return 0;
    });
    FAIL();
  } catch (const KepError& e) {
    EXPECT_NE(std::string(e.what()).find("construction"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace kep::protocol
