#include "kep/client.hpp"

#include "kep/errors.hpp"

namespace kep::client {

protocol::RunReport RunClient(const ClientOptions& options, const medical::Quote& quote,
                              size_t antigen_count, const Digest& catalog_hash) {
  auto channel = transport::TcpChannel::Connect(
      options.server, static_cast<transport::PartyId>(options.party),
      static_cast<transport::PartyId>(options.parties), options.session, options.timeout);
  auto dealt = channel->AwaitDeal(options.timeout);
  if (!dealt) throw TransportError("no key material received from the server");
  paillier::PublicKey pk;
  paillier::KeyShare share;
  try {
    pk = paillier::PublicKey::Deserialize(dealt->public_key);
    share = paillier::KeyShare::Deserialize(dealt->share);
  } catch (const InputError& e) {
    throw ProtocolAbort(std::string("malformed key material: ") + e.what());
  }
  if (share.party_index != options.party || pk.parties() != options.parties) {
    throw ProtocolAbort("dealt key material does not match this party");
  }

  const auto graphs =
      constellation::EnumerateCached(options.parties, options.max_cycle, options.cache_dir);
  const auto cfg =
      protocol::MakeSessionConfig(pk, antigen_count, catalog_hash, graphs, options.max_cycle);

  Rng rng = options.seed ? Rng::FromSeed(*options.seed, options.party) : Rng::FromOs();
  Digest commitment;
  if (options.seed) {
    commitment = protocol::SeedCommitment(*options.seed, options.party);
  } else {
    Rng fresh = Rng::FromOs();
    fresh.Fill(commitment);
  }

  gates::GateContext ctx(pk, share, *channel, rng, cfg.Tag());
  ctx.set_observer(options.observer);
  auto report = protocol::RunKepRnd(ctx, cfg, quote, graphs, commitment);
  channel->Finish();
  return report;
}

}  // namespace kep::client
