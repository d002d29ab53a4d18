#include "kep/transport.hpp"

#include <algorithm>
#include <cctype>
#include <exception>
#include <string>

#include "kep/errors.hpp"
#include "kep/random.hpp"

namespace kep::transport {

SessionId MakeSessionId(std::string_view name) {
  SessionId id{};
  const bool is_hex = name.size() == 32 && std::all_of(name.begin(), name.end(), [](char c) {
                        return std::isxdigit(static_cast<unsigned char>(c)) != 0;
                      });
  if (is_hex) {
    for (size_t i = 0; i < 16; ++i) {
      id[i] = static_cast<uint8_t>(std::stoi(std::string(name.substr(2 * i, 2)), nullptr, 16));
    }
    return id;
  }
  const Digest d = Sha256(name);
  std::copy_n(d.begin(), id.size(), id.begin());
  return id;
}

Bytes EncodeFrame(const Frame& frame) {
  if (frame.payload.size() >= (uint64_t{1} << 32)) {
    throw InputError("frame payload too large");
  }
  Bytes out;
  out.reserve(kFrameHeaderSize + frame.payload.size());
  out.insert(out.end(), frame.session.begin(), frame.session.end());
  AppendU16Be(frame.sender, &out);
  AppendU16Be(frame.recipient, &out);
  AppendU64Be(frame.sequence, &out);
  AppendU32Be(static_cast<uint32_t>(frame.payload.size()), &out);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

uint32_t PeekPayloadLength(std::span<const uint8_t> header) {
  if (header.size() < kFrameHeaderSize) {
    throw TransportError("short frame header");
  }
  ByteReader reader(header.subspan(kFrameHeaderSize - 4, 4));
  return reader.ReadU32();
}

Frame DecodeFrame(std::span<const uint8_t> bytes) {
  ByteReader reader(bytes);
  Frame f;
  try {
    auto sid = reader.ReadBytes(16);
    std::copy(sid.begin(), sid.end(), f.session.begin());
    f.sender = reader.ReadU16();
    f.recipient = reader.ReadU16();
    f.sequence = reader.ReadU64();
    const uint32_t len = reader.ReadU32();
    auto body = reader.ReadBytes(len);
    f.payload.assign(body.begin(), body.end());
  } catch (const InputError& e) {
    throw TransportError(std::string("malformed frame: ") + e.what());
  }
  if (!reader.done()) {
    throw TransportError("trailing bytes after frame");
  }
  return f;
}

Bytes MakeControl(ControlKind kind, std::span<const uint8_t> body) {
  Bytes out{static_cast<uint8_t>(kind)};
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

TrafficMeter::TrafficMeter(PartyId parties) : counters_(static_cast<size_t>(parties) + 1) {}

void TrafficMeter::Record(PartyId party, uint64_t bytes) {
  if (party >= counters_.size()) return;
  counters_[party].fetch_add(bytes);
}

uint64_t TrafficMeter::incoming(PartyId party) const {
  return party < counters_.size() ? counters_[party].load() : 0;
}

uint64_t TrafficMeter::total() const {
  uint64_t sum = 0;
  for (size_t i = 1; i < counters_.size(); ++i) sum += counters_[i].load();
  return sum;
}

// ---------------------------------------------------------------------------

QueueChannel::QueueChannel(SessionId session, PartyId self, PartyId parties, Transmit transmit)
    : session_(session),
      self_(self),
      parties_(parties),
      transmit_(std::move(transmit)),
      inbox_(static_cast<size_t>(parties) + 1),
      last_sequence_(static_cast<size_t>(parties) + 1, 0) {
  if (self < 1 || self > parties) {
    throw InputError("party index outside [1, iota]");
  }
}

void QueueChannel::Emit(PartyId recipient, Bytes payload) {
  Frame f{session_, self_, recipient, next_sequence_.fetch_add(1), std::move(payload)};
  transmit_(EncodeFrame(f));
}

void QueueChannel::Send(PartyId to, Bytes payload) {
  if (to < 1 || to > parties_ || to == self_) {
    throw InputError("invalid recipient " + std::to_string(to));
  }
  Emit(to, std::move(payload));
}

void QueueChannel::Broadcast(Bytes payload) { Emit(kBroadcast, std::move(payload)); }

void QueueChannel::SendControl(ControlKind kind, std::span<const uint8_t> body) {
  Emit(kServer, MakeControl(kind, body));
}

void QueueChannel::Deliver(const Bytes& frame_bytes) {
  incoming_.fetch_add(frame_bytes.size());
  Frame f = DecodeFrame(frame_bytes);
  std::lock_guard lock(mu_);
  if (f.session != session_) {
    abort_reason_ = "frame for a foreign session";
  } else if (f.sender == kServer) {
    if (f.payload.empty()) {
      abort_reason_ = "empty control frame";
    } else {
      const auto kind = static_cast<ControlKind>(f.payload[0]);
      const std::span<const uint8_t> body(f.payload.data() + 1, f.payload.size() - 1);
      if (kind == ControlKind::kDeal) {
        try {
          ByteReader reader(body);
          DealtKeys keys;
          auto pk = reader.ReadBytes(reader.ReadU32());
          keys.public_key.assign(pk.begin(), pk.end());
          auto share = reader.ReadBytes(reader.ReadU32());
          keys.share.assign(share.begin(), share.end());
          deal_ = std::move(keys);
        } catch (const InputError&) {
          abort_reason_ = "malformed key deal";
        }
      } else if (kind == ControlKind::kAbort || kind == ControlKind::kReject) {
        abort_reason_ = std::string(kind == ControlKind::kAbort ? "session aborted: " : "rejected: ") +
                        std::string(body.begin(), body.end());
      }
    }
  } else if (f.sender > parties_) {
    abort_reason_ = "frame from unknown sender " + std::to_string(f.sender);
  } else if (f.sequence <= last_sequence_[f.sender]) {
    abort_reason_ = "non-increasing sequence from party " + std::to_string(f.sender);
  } else {
    last_sequence_[f.sender] = f.sequence;
    inbox_[f.sender].push_back(std::move(f.payload));
  }
  cv_.notify_all();
}

void QueueChannel::Abort(const std::string& reason) {
  std::lock_guard lock(mu_);
  if (!abort_reason_) abort_reason_ = reason;
  cv_.notify_all();
}

Bytes QueueChannel::Receive(PartyId from) {
  if (from < 1 || from > parties_ || from == self_) {
    throw InputError("invalid sender " + std::to_string(from));
  }
  std::unique_lock lock(mu_);
  const bool ready = cv_.wait_for(lock, timeout_, [&] {
    return !inbox_[from].empty() || abort_reason_.has_value();
  });
  if (!inbox_[from].empty()) {
    Bytes payload = std::move(inbox_[from].front());
    inbox_[from].pop_front();
    return payload;
  }
  if (abort_reason_) {
    throw TransportError(*abort_reason_);
  }
  (void)ready;
  throw TransportError("receive from party " + std::to_string(from) + " timed out");
}

std::optional<DealtKeys> QueueChannel::AwaitDeal(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return deal_.has_value() || abort_reason_.has_value(); });
  if (abort_reason_) {
    throw TransportError(*abort_reason_);
  }
  return deal_;
}

// ---------------------------------------------------------------------------

uint64_t SimResult::total_incoming() const {
  uint64_t sum = 0;
  for (size_t i = 1; i < incoming_bytes.size(); ++i) sum += incoming_bytes[i];
  return sum;
}

namespace {

class SimHub {
 public:
  SimHub(PartyId parties, const SimOptions& options) : options_(options), transcript_(parties + 1) {
    if (options.scheduler_seed) {
      jitter_.emplace(Rng::FromSeed(*options.scheduler_seed, 0x5c4ed));
    }
    for (PartyId i = 1; i <= parties; ++i) {
      channels_.push_back(std::make_unique<QueueChannel>(
          options.session, i, parties, [this, i](const Bytes& frame) { Route(i, frame); }));
      channels_.back()->set_timeout(options.receive_timeout);
    }
  }

  QueueChannel& channel(PartyId i) { return *channels_[i - 1]; }

  void Route(PartyId sender, const Bytes& frame) {
    {
      std::lock_guard lock(mu_);
      transcript_[sender].push_back(frame);
      if (jitter_) {
        const uint64_t spins = jitter_->Uniform(4);
        for (uint64_t k = 0; k < spins; ++k) std::this_thread::yield();
      }
    }
    const Frame header = DecodeFrame(frame);
    if (header.recipient == kBroadcast) {
      for (auto& ch : channels_) {
        if (ch->self() != sender) ch->Deliver(frame);
      }
    } else if (header.recipient >= 1 && header.recipient <= channels_.size()) {
      channels_[header.recipient - 1]->Deliver(frame);
    }
  }

  void AbortAll(const std::string& reason) {
    for (auto& ch : channels_) ch->Abort(reason);
  }

  SimResult Result() const {
    SimResult r;
    r.transcript = transcript_;
    r.incoming_bytes.push_back(0);
    for (const auto& ch : channels_) r.incoming_bytes.push_back(ch->incoming_bytes());
    return r;
  }

 private:
  SimOptions options_;
  std::vector<std::unique_ptr<QueueChannel>> channels_;
  std::mutex mu_;
  std::vector<std::vector<Bytes>> transcript_;
  std::optional<Rng> jitter_;
};

}  // namespace

SimResult Simulate(std::span<const PartyBehavior> behaviors, const SimOptions& options) {
  const auto parties = static_cast<PartyId>(behaviors.size());
  if (parties < 1) {
    throw InputError("simulation needs at least one party");
  }
  SimHub hub(parties, options);

  std::mutex err_mu;
  std::exception_ptr first_error;
  std::atomic<int> running{parties};
  std::condition_variable done_cv;
  std::mutex done_mu;

  std::vector<std::thread> threads;
  for (PartyId i = 1; i <= parties; ++i) {
    threads.emplace_back([&, i] {
      try {
        behaviors[i - 1](hub.channel(i));
      } catch (...) {
        {
          std::lock_guard lock(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
        hub.AbortAll("party " + std::to_string(i) + " failed");
      }
      std::lock_guard lock(done_mu);
      --running;
      done_cv.notify_all();
    });
  }
  {
    std::unique_lock lock(done_mu);
    if (!done_cv.wait_for(lock, options.global_timeout, [&] { return running.load() == 0; })) {
      std::lock_guard elock(err_mu);
      if (!first_error) {
        first_error = std::make_exception_ptr(TransportError("simulation deadline exceeded"));
      }
      hub.AbortAll("simulation deadline exceeded");
    }
  }
  for (auto& t : threads) t.join();
  if (first_error) {
    std::rethrow_exception(first_error);
  }
  return hub.Result();
}

}  // namespace kep::transport
