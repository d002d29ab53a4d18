#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>

#include "kep/gates.hpp"
#include "kep/medical.hpp"
#include "kep/protocol.hpp"
#include "kep/transport.hpp"

// One party connecting to the relay server, receiving its dealt key share
// and running the protocol.
namespace kep::client {

struct ClientOptions {
  transport::Endpoint server;
  protocol::Party party = 0;
  protocol::Party parties = 0;
  transport::SessionId session = transport::MakeSessionId("kep");
  uint32_t max_cycle = 3;
  // Seeds the party's randomness for reproducible runs; OS entropy if
  // unset.
  std::optional<uint64_t> seed;
  std::filesystem::path cache_dir;
  std::chrono::milliseconds timeout = transport::kDefaultTimeout;
  gates::DecryptionObserver* observer = nullptr;
};

protocol::RunReport RunClient(const ClientOptions& options, const medical::Quote& quote,
                              size_t antigen_count, const Digest& catalog_hash);

}  // namespace kep::client
