#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "kep/bytes.hpp"

// Star-topology message layer. Every party-to-party message travels as a
// Frame; the relay server and the in-process simulator route identical
// frame bytes.
namespace kep::transport {

using PartyId = uint16_t;
using SessionId = std::array<uint8_t, 16>;

inline constexpr PartyId kServer = 0;
inline constexpr PartyId kBroadcast = 0xFFFF;
inline constexpr size_t kFrameHeaderSize = 16 + 2 + 2 + 8 + 4;
inline constexpr std::chrono::milliseconds kDefaultTimeout{30 * 60 * 1000};

// Hex string of exactly 32 digits is taken verbatim, anything else is
// hashed.
SessionId MakeSessionId(std::string_view name);

// Layout (big-endian): session_id[16] sender[2] recipient[2] sequence[8]
// payload_length[4] payload.
struct Frame {
  SessionId session{};
  PartyId sender = 0;
  PartyId recipient = 0;
  uint64_t sequence = 0;
  Bytes payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

Bytes EncodeFrame(const Frame& frame);
Frame DecodeFrame(std::span<const uint8_t> bytes);
// Returns the payload length announced in a 32-byte header.
uint32_t PeekPayloadLength(std::span<const uint8_t> header);

// Control payloads exchanged with the server start with one kind byte.
enum class ControlKind : uint8_t {
  kRegister = 1,
  kReject = 2,
  kDeal = 3,
  kAbort = 4,
  kGoodbye = 5,
};

Bytes MakeControl(ControlKind kind, std::span<const uint8_t> body = {});

// Accumulated incoming bytes per party (index 1..parties).
class TrafficMeter {
 public:
  explicit TrafficMeter(PartyId parties);

  void Record(PartyId party, uint64_t bytes);
  uint64_t incoming(PartyId party) const;
  uint64_t total() const;
  PartyId parties() const { return static_cast<PartyId>(counters_.size() - 1); }

 private:
  std::vector<std::atomic<uint64_t>> counters_;
};

struct DealtKeys {
  Bytes public_key;
  Bytes share;
};

// Communication handle of one party inside one session.
class Channel {
 public:
  virtual ~Channel() = default;

  virtual PartyId self() const = 0;
  virtual PartyId parties() const = 0;

  virtual void Send(PartyId to, Bytes payload) = 0;
  virtual void Broadcast(Bytes payload) = 0;
  // Next payload from `from`, FIFO per sender. Throws TransportError on
  // timeout, session abort or sequence violation.
  virtual Bytes Receive(PartyId from) = 0;

  // Total bytes (headers included) delivered to this party so far.
  virtual uint64_t incoming_bytes() const = 0;
  virtual void set_timeout(std::chrono::milliseconds timeout) = 0;
};

// Channel backed by per-sender in-memory queues. Outbound frames are
// handed to a transmit function; inbound frame bytes are pushed via
// Deliver().
class QueueChannel : public Channel {
 public:
  using Transmit = std::function<void(const Bytes& frame)>;

  QueueChannel(SessionId session, PartyId self, PartyId parties, Transmit transmit);

  PartyId self() const override { return self_; }
  PartyId parties() const override { return parties_; }
  void Send(PartyId to, Bytes payload) override;
  void Broadcast(Bytes payload) override;
  Bytes Receive(PartyId from) override;
  uint64_t incoming_bytes() const override { return incoming_.load(); }
  void set_timeout(std::chrono::milliseconds timeout) override { timeout_ = timeout; }

  void Deliver(const Bytes& frame_bytes);
  void Abort(const std::string& reason);
  std::optional<DealtKeys> AwaitDeal(std::chrono::milliseconds timeout);
  const SessionId& session() const { return session_; }

 protected:
  void SendControl(ControlKind kind, std::span<const uint8_t> body = {});

 private:
  void Emit(PartyId recipient, Bytes payload);

  SessionId session_;
  PartyId self_;
  PartyId parties_;
  Transmit transmit_;
  std::atomic<uint64_t> next_sequence_{1};
  std::atomic<uint64_t> incoming_{0};
  std::chrono::milliseconds timeout_ = kDefaultTimeout;

  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::deque<Bytes>> inbox_;
  std::vector<uint64_t> last_sequence_;
  std::optional<DealtKeys> deal_;
  std::optional<std::string> abort_reason_;
};

// ---------------------------------------------------------------------------
// In-process simulation

struct SimOptions {
  std::chrono::milliseconds receive_timeout{120000};
  // Global deadline after which every party is aborted (deadlock guard).
  std::chrono::milliseconds global_timeout{60 * 60 * 1000};
  // When set, frame delivery yields the scheduler a pseudo-random number of
  // times, perturbing thread interleavings reproducibly.
  std::optional<uint64_t> scheduler_seed;
  SessionId session = MakeSessionId("kep-simulation");
};

struct SimResult {
  // Frames sent by each party (index 0 unused), in send order.
  std::vector<std::vector<Bytes>> transcript;
  std::vector<uint64_t> incoming_bytes;  // per party, index 0 unused
  uint64_t total_incoming() const;
};

using PartyBehavior = std::function<void(Channel&)>;

// Runs behaviors[i] as party i+1 on its own thread over a simulated star
// network. Broadcasts fan out to the other parties exactly as the relay
// does. Rethrows the first party failure after all threads stop.
SimResult Simulate(std::span<const PartyBehavior> behaviors, const SimOptions& options = {});

// ---------------------------------------------------------------------------
// TCP relay

struct Endpoint {
  std::string host = "127.0.0.1";
  uint16_t port = 0;

  static Endpoint Parse(std::string_view text);
  std::string ToString() const;
};

struct RelayOptions {
  Endpoint bind;
  PartyId parties = 3;
  uint32_t threshold = 0;  // 0 means tau = iota
  size_t key_bits = 512;
  std::optional<uint64_t> dealer_seed;
  // Stop accepting once the first session finished.
  bool once = false;
};

// Forwards frames between registered clients and deals threshold keys once
// all parties of a session registered. Holds no key share afterwards.
class RelayServer {
 public:
  explicit RelayServer(RelayOptions options);
  ~RelayServer();
  RelayServer(const RelayServer&) = delete;
  RelayServer& operator=(const RelayServer&) = delete;

  // Binds and starts the accept loop; returns the bound port.
  uint16_t Start();
  void Stop();
  // Blocks until Stop() or, with `once`, until the first session ends.
  void Wait();

  uint16_t port() const;
  // Incoming traffic of the most recently completed (or running) session.
  uint64_t last_session_traffic() const;
  uint64_t last_session_incoming(PartyId party) const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

// Registers with the relay and returns the party's communication handle.
class TcpChannel : public QueueChannel {
 public:
  static std::unique_ptr<TcpChannel> Connect(const Endpoint& server, PartyId self, PartyId parties,
                                             SessionId session,
                                             std::chrono::milliseconds timeout = kDefaultTimeout);
  ~TcpChannel() override;

  // Announces an orderly departure. A channel destroyed without Finish()
  // makes the relay abort the session for everyone else.
  void Finish();

 private:
  TcpChannel(int fd, SessionId session, PartyId self, PartyId parties);
  void ReaderLoop();

  int fd_;
  std::mutex write_mu_;
  std::thread reader_;
  std::atomic<bool> closing_{false};
};

}  // namespace kep::transport
