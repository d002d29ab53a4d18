#include "kep/protocol.hpp"

#include <algorithm>
#include <map>

#include "kep/errors.hpp"

namespace kep::protocol {
namespace {

using Clock = std::chrono::steady_clock;

constexpr uint32_t kHandshakeGate = 0;

double MillisSince(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Rethrows the active exception with the phase name prefixed, keeping its
// type.
[[noreturn]] void RethrowInPhase(Phase phase) {
  const std::string prefix = std::string(ToString(phase)) + " phase: ";
  try {
    throw;
  } catch (const CorruptionError& e) {
    throw CorruptionError(prefix + e.what());
  } catch (const ProtocolAbort& e) {
    throw ProtocolAbort(prefix + e.what());
  } catch (const TransportError& e) {
    throw TransportError(prefix + e.what());
  } catch (const InputError& e) {
    throw InputError(prefix + e.what());
  } catch (const ThresholdError& e) {
    throw ThresholdError(prefix + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(prefix + e.what());
  }
}

}  // namespace

Digest SessionConfig::Manifest() const {
  Bytes data;
  const std::string_view label = "kep-session-manifest";
  data.insert(data.end(), label.begin(), label.end());
  AppendU32Be(parties, &data);
  AppendU32Be(threshold, &data);
  AppendU32Be(max_cycle, &data);
  AppendU64Be(key_bits, &data);
  AppendU64Be(antigen_count, &data);
  data.insert(data.end(), catalog_hash.begin(), catalog_hash.end());
  data.insert(data.end(), enumeration_hash.begin(), enumeration_hash.end());
  data.insert(data.end(), key_fingerprint.begin(), key_fingerprint.end());
  return Sha256(data);
}

uint32_t SessionConfig::Tag() const {
  const Digest d = Manifest();
  return (uint32_t{d[0]} << 24) | (uint32_t{d[1]} << 16) | (uint32_t{d[2]} << 8) | d[3];
}

SessionConfig MakeSessionConfig(const paillier::PublicKey& pk, size_t antigen_count,
                                const Digest& catalog_hash,
                                const std::vector<ExchangeGraph>& graphs, uint32_t max_cycle) {
  SessionConfig cfg;
  cfg.parties = pk.parties();
  cfg.threshold = pk.threshold();
  cfg.max_cycle = max_cycle;
  cfg.key_bits = pk.key_bits();
  cfg.antigen_count = antigen_count;
  cfg.catalog_hash = catalog_hash;
  cfg.enumeration_hash = constellation::EnumerationHash(graphs);
  cfg.key_fingerprint = pk.Fingerprint();
  return cfg;
}

SessionConfig MakeSessionConfig(const paillier::PublicKey& pk,
                                const medical::AntigenCatalog& catalog,
                                const std::vector<ExchangeGraph>& graphs, uint32_t max_cycle) {
  return MakeSessionConfig(pk, catalog.size(), catalog.Hash(), graphs, max_cycle);
}

Outcome Outcome::Exchange(Party donor, Party recipient) {
  if (donor == 0 || recipient == 0) {
    throw InvariantError("an exchange outcome needs both neighbors");
  }
  return Outcome{Status::kExchange, donor, recipient};
}

Outcome Outcome::FromNeighborhood(const Neighborhood& n) {
  if (!n.participates()) return NoExchange();
  return Exchange(n.donor, n.recipient);
}

std::string Outcome::ToJson() const {
  if (!exchange()) return R"({"status":"no_exchange"})";
  return R"({"status":"exchange","n_d":)" + std::to_string(donor) + R"(,"n_p":)" +
         std::to_string(recipient) + "}";
}

EncryptedAdjacencyMatrix::EncryptedAdjacencyMatrix(Party parties)
    : parties_(parties), cells_(static_cast<size_t>(parties) * parties) {}

std::string_view ToString(Phase phase) {
  switch (phase) {
    case Phase::kHandshake: return "handshake";
    case Phase::kConstruction: return "construction";
    case Phase::kEvaluation: return "evaluation";
    case Phase::kPrioritization: return "prioritization";
    case Phase::kMapping: return "mapping";
    case Phase::kSelection: return "selection";
    case Phase::kOutput: return "output";
  }
  return "unknown";
}

Digest SeedCommitment(uint64_t seed, Party party) {
  Bytes data;
  const std::string_view label = "kep-seed-commitment";
  data.insert(data.end(), label.begin(), label.end());
  AppendU64Be(seed, &data);
  AppendU32Be(party, &data);
  return Sha256(data);
}

std::vector<Digest> Handshake(gates::GateContext& ctx, const SessionConfig& cfg,
                              const Digest& seed_commitment) {
  const Digest manifest = cfg.Manifest();
  if (cfg.parties != ctx.parties() || cfg.threshold != ctx.threshold()) {
    throw ProtocolAbort("session configuration does not match the dealt key");
  }
  Bytes hello;
  AppendU32Be(cfg.Tag(), &hello);
  AppendU32Be(kHandshakeGate, &hello);
  AppendU32Be(0, &hello);
  AppendU32Be(ctx.self(), &hello);
  hello.insert(hello.end(), manifest.begin(), manifest.end());
  hello.insert(hello.end(), seed_commitment.begin(), seed_commitment.end());
  ctx.channel().Broadcast(hello);

  std::vector<Digest> commitments(ctx.parties());
  commitments[ctx.self() - 1] = seed_commitment;
  for (Party p = 1; p <= ctx.parties(); ++p) {
    if (p == ctx.self()) continue;
    const Bytes msg = ctx.channel().Receive(static_cast<transport::PartyId>(p));
    try {
      ByteReader r(msg);
      r.ReadU32();  // session tag depends on the manifest, compared below
      const uint32_t gate = r.ReadU32();
      const uint32_t round = r.ReadU32();
      const uint32_t sender = r.ReadU32();
      auto theirs = r.ReadBytes(manifest.size());
      auto commitment = r.ReadBytes(seed_commitment.size());
      if (gate != kHandshakeGate || round != 0 || sender != p || !r.done()) {
        throw ProtocolAbort("malformed handshake from party " + std::to_string(p));
      }
      if (!std::equal(theirs.begin(), theirs.end(), manifest.begin())) {
        throw ProtocolAbort("party " + std::to_string(p) +
                            " uses different session parameters (catalog, enumeration, key or "
                            "party count)");
      }
      std::copy(commitment.begin(), commitment.end(), commitments[p - 1].begin());
    } catch (const InputError& e) {
      throw ProtocolAbort("malformed handshake from party " + std::to_string(p) + ": " + e.what());
    }
  }
  return commitments;
}

EncryptedAdjacencyMatrix PhaseConstruction(gates::GateContext& ctx, const SessionConfig& cfg,
                                           const medical::Quote& my_quote) {
  const Party n = ctx.parties();
  EncryptedAdjacencyMatrix a(n);
  for (Party i = 1; i <= n; ++i) {
    for (Party j = 1; j <= n; ++j) {
      if (i == j) {
        a.at(i, j) = paillier::EncryptPublic(ctx.pk(), 0);
        continue;
      }
      const medical::DonorInput* donor = ctx.self() == i ? &my_quote.donor : nullptr;
      const medical::PatientInput* patient = ctx.self() == j ? &my_quote.patient : nullptr;
      try {
        a.at(i, j) = gates::Comp(ctx, i, j, donor, patient, cfg.antigen_count).c;
      } catch (const KepError& e) {
        const std::string where =
            "comp(" + std::to_string(i) + ", " + std::to_string(j) + "): " + e.what();
        if (dynamic_cast<const InputError*>(&e)) throw InputError(where);
        if (dynamic_cast<const TransportError*>(&e)) throw TransportError(where);
        throw ProtocolAbort(where);
      }
    }
  }
  return a;
}

std::vector<Ciphertext> PhaseEvaluation(gates::GateContext& ctx, const EncryptedAdjacencyMatrix& a,
                                        const std::vector<ExchangeGraph>& graphs) {
  std::vector<std::vector<Ciphertext>> lists;
  lists.reserve(graphs.size());
  for (const auto& g : graphs) {
    std::vector<Ciphertext> entries;
    for (const auto& e : g.edges()) entries.push_back(a.at(e.from, e.to));
    lists.push_back(std::move(entries));
  }
  return gates::UfiMultMany(ctx, lists);
}

std::vector<Ciphertext> PhasePrioritization(const paillier::PublicKey& pk,
                                            const std::vector<Ciphertext>& l,
                                            const std::vector<ExchangeGraph>& graphs) {
  if (l.size() != graphs.size()) throw InputError("prioritization: length mismatch");
  std::vector<Ciphertext> out;
  out.reserve(l.size());
  for (size_t k = 0; k < l.size(); ++k) {
    out.push_back(paillier::ScalarMul(pk, l[k], constellation::Welfare(graphs[k])));
  }
  return out;
}

std::vector<Ciphertext> PhaseMapping(gates::GateContext& ctx,
                                     const constellation::PartyPrimes& my_primes,
                                     const std::vector<ExchangeGraph>& graphs) {
  const paillier::PublicKey& pk = ctx.pk();
  const Party self = ctx.self();
  const size_t n = graphs.size();
  std::vector<Ciphertext> chain;
  // Chain party 1 -> 2 -> ... -> iota; every step is broadcast, the last one
  // is the final [[L2]].
  for (Party p = 1; p <= ctx.parties(); ++p) {
    const uint32_t gate = ctx.BeginGate();
    if (p == self) {
      std::vector<Ciphertext> next;
      next.reserve(n);
      for (size_t k = 0; k < n; ++k) {
        const mpz_class prime = static_cast<unsigned long>(
            my_primes.prime(constellation::ExtractNeighborhood(graphs[k], self)));
        if (p == 1) {
          next.push_back(paillier::Encrypt(pk, prime, ctx.rng()));
        } else {
          next.push_back(
              paillier::Rerandomize(pk, paillier::ScalarMul(pk, chain[k], prime), ctx.rng()));
        }
      }
      ctx.BroadcastValues(gate, 1, next);
      chain = std::move(next);
    } else {
      chain = ctx.ReceiveValues(p, gate, 1);
      if (chain.size() != n) {
        throw ProtocolAbort("mapping chain from party " + std::to_string(p) + " has " +
                            std::to_string(chain.size()) + " entries, expected " +
                            std::to_string(n));
      }
    }
  }
  return chain;
}

std::optional<mpz_class> PhaseSelection(gates::GateContext& ctx, const std::vector<Ciphertext>& l1,
                                        const std::vector<Ciphertext>& l2) {
  auto selected = gates::CrsC(ctx, l1, l2, static_cast<uint64_t>(ctx.parties()) + 1);
  if (!selected) return std::nullopt;
  return ctx.ThresholdDecrypt(std::span(&selected->v, 1), gates::DecryptionSite::kSelectedProduct)
      .front();
}

Outcome PhaseReverseAndOutput(const std::optional<mpz_class>& product,
                              const constellation::PartyPrimes& my_primes) {
  if (!product) return Outcome::NoExchange();
  return Outcome::FromNeighborhood(constellation::ReverseMap(*product, my_primes));
}

RunReport RunKepRnd(gates::GateContext& ctx, const SessionConfig& cfg,
                    const medical::Quote& my_quote, const std::vector<ExchangeGraph>& graphs,
                    const Digest& seed_commitment) {
  if (constellation::EnumerationHash(graphs) != cfg.enumeration_hash) {
    throw ProtocolAbort("local constellation enumeration does not match the session");
  }
  RunReport report;
  const auto run_start = Clock::now();
  auto timed = [&](Phase phase, auto&& body) {
    const auto start = Clock::now();
    const uint64_t bytes_before = ctx.channel().incoming_bytes();
    try {
      body();
    } catch (...) {
      RethrowInPhase(phase);
    }
    auto& m = report.phases[static_cast<size_t>(phase)];
    m.ms = MillisSince(start);
    m.incoming_bytes = ctx.channel().incoming_bytes() - bytes_before;
  };

  EncryptedAdjacencyMatrix a;
  std::vector<Ciphertext> l;
  std::vector<Ciphertext> l1;
  std::vector<Ciphertext> l2;
  std::optional<mpz_class> product;
  constellation::PartyPrimes primes;

  timed(Phase::kHandshake, [&] { Handshake(ctx, cfg, seed_commitment); });
  timed(Phase::kConstruction, [&] { a = PhaseConstruction(ctx, cfg, my_quote); });
  timed(Phase::kEvaluation, [&] { l = PhaseEvaluation(ctx, a, graphs); });
  timed(Phase::kPrioritization, [&] { l1 = PhasePrioritization(ctx.pk(), l, graphs); });
  timed(Phase::kMapping, [&] {
    primes = constellation::AssignPartyPrimes(cfg.parties, cfg.max_cycle, ctx.self(), ctx.rng());
    l2 = PhaseMapping(ctx, primes, graphs);
  });
  timed(Phase::kSelection, [&] { product = PhaseSelection(ctx, l1, l2); });
  timed(Phase::kOutput, [&] { report.outcome = PhaseReverseAndOutput(product, primes); });

  report.total_ms = MillisSince(run_start);
  report.incoming_bytes = ctx.channel().incoming_bytes();
  report.stats = ctx.stats();
  return report;
}

// ---------------------------------------------------------------------------

std::vector<Outcome> SimulatedRun::outcomes() const {
  std::vector<Outcome> out;
  for (const auto& r : reports) out.push_back(r.outcome);
  return out;
}

SimulatedRun RunSimulated(const std::vector<medical::Quote>& quotes, size_t antigen_count,
                          const Digest& catalog_hash, const SimulatedRunOptions& options) {
  const auto parties = static_cast<uint32_t>(quotes.size());
  if (parties < 2) throw InputError("a session needs at least 2 parties");
  const uint32_t threshold = options.threshold == 0 ? parties : options.threshold;

  paillier::KeyMaterial generated;
  const paillier::KeyMaterial* keys = options.keys;
  if (keys == nullptr) {
    Rng dealer = Rng::FromSeed(options.seed, 0xdea1);
    generated = paillier::Keygen(parties, threshold, options.key_bits, dealer);
    keys = &generated;
  }
  if (keys->public_key.parties() != parties) {
    throw InputError("key material is for a different party count");
  }
  std::vector<ExchangeGraph> enumerated;
  const std::vector<ExchangeGraph>* graphs = options.graphs;
  if (graphs == nullptr) {
    enumerated = constellation::Enumerate(parties, options.max_cycle);
    graphs = &enumerated;
  }
  const SessionConfig cfg = MakeSessionConfig(keys->public_key, antigen_count, catalog_hash,
                                              *graphs, options.max_cycle);

  SimulatedRun run;
  run.reports.resize(parties);
  std::vector<transport::PartyBehavior> behaviors;
  for (Party p = 1; p <= parties; ++p) {
    behaviors.push_back([&, p](transport::Channel& channel) {
      Rng rng = Rng::FromSeed(options.seed, p);
      gates::GateContext ctx(keys->public_key, keys->shares[p - 1], channel, rng, cfg.Tag());
      ctx.set_observer(options.observer);
      run.reports[p - 1] =
          RunKepRnd(ctx, cfg, quotes[p - 1], *graphs, SeedCommitment(options.seed, p));
    });
  }
  transport::SimOptions sim;
  sim.receive_timeout = options.receive_timeout;
  sim.scheduler_seed = options.scheduler_seed;
  run.sim = transport::Simulate(behaviors, sim);
  return run;
}

std::optional<ExchangeGraph> AssembleGraph(const std::vector<Outcome>& outcomes) {
  const auto n = static_cast<Party>(outcomes.size());
  std::vector<constellation::Edge> edges;
  for (Party i = 1; i <= n; ++i) {
    const Outcome& o = outcomes[i - 1];
    if (!o.exchange()) continue;
    if (o.donor < 1 || o.donor > n || o.recipient < 1 || o.recipient > n) {
      throw InvariantError("outcome of party " + std::to_string(i) + " names an unknown party");
    }
    const Outcome& next = outcomes[o.recipient - 1];
    if (!next.exchange() || next.donor != i) {
      throw InvariantError("outcomes of parties " + std::to_string(i) + " and " +
                           std::to_string(o.recipient) + " are not reciprocal");
    }
    edges.push_back({i, o.recipient});
  }
  if (edges.empty()) return std::nullopt;
  ExchangeGraph g(n, std::move(edges));
  constellation::ValidateExchangeGraph(g, 3);
  return g;
}

}  // namespace kep::protocol
