#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include "kep/errors.hpp"
#include "kep/paillier.hpp"
#include "kep/random.hpp"
#include "kep/transport.hpp"

namespace kep::transport {
namespace {

void WriteAll(int fd, const Bytes& data) {
  size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("socket write failed: ") + std::strerror(errno));
    }
    off += static_cast<size_t>(n);
  }
}

// False on orderly EOF before the first byte.
bool ReadExact(int fd, uint8_t* out, size_t len) {
  size_t off = 0;
  while (off < len) {
    const ssize_t n = ::recv(fd, out + off, len - off, 0);
    if (n == 0) {
      if (off == 0) return false;
      throw TransportError("connection closed mid-frame");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("socket read failed: ") + std::strerror(errno));
    }
    off += static_cast<size_t>(n);
  }
  return true;
}

std::optional<Bytes> ReadFrameBytes(int fd) {
  Bytes buf(kFrameHeaderSize);
  if (!ReadExact(fd, buf.data(), buf.size())) return std::nullopt;
  const uint32_t len = PeekPayloadLength(buf);
  buf.resize(kFrameHeaderSize + len);
  if (len > 0 && !ReadExact(fd, buf.data() + kFrameHeaderSize, len)) {
    throw TransportError("connection closed mid-frame");
  }
  return buf;
}

void SetNoDelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

addrinfo* Resolve(const Endpoint& ep, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  const int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) {
    throw TransportError("cannot resolve " + ep.ToString() + ": " + ::gai_strerror(rc));
  }
  return res;
}

}  // namespace

Endpoint Endpoint::Parse(std::string_view text) {
  const auto colon = text.rfind(':');
  Endpoint ep;
  if (colon == std::string_view::npos) {
    throw InputError("address must be host:port, got '" + std::string(text) + "'");
  }
  ep.host = std::string(text.substr(0, colon));
  const std::string port(text.substr(colon + 1));
  try {
    const int p = std::stoi(port);
    if (p < 0 || p > 65535) throw std::out_of_range("port");
    ep.port = static_cast<uint16_t>(p);
  } catch (const std::exception&) {
    throw InputError("invalid port '" + port + "'");
  }
  return ep;
}

std::string Endpoint::ToString() const { return host + ":" + std::to_string(port); }

// ---------------------------------------------------------------------------

struct RelayServer::Impl {
  struct Client {
    int fd = -1;
    PartyId party = 0;
    std::mutex write_mu;
    bool said_goodbye = false;
  };

  struct Session {
    SessionId id{};
    std::map<PartyId, std::shared_ptr<Client>> clients;
    bool dealt = false;
    bool aborted = false;
    uint64_t server_sequence = 1;
    std::vector<uint64_t> last_sequence;
    std::shared_ptr<TrafficMeter> meter;
  };

  RelayOptions options;
  int listen_fd = -1;
  uint16_t bound_port = 0;
  std::thread acceptor;
  std::vector<std::thread> workers;
  std::mutex mu;
  std::condition_variable finished_cv;
  std::map<SessionId, Session> sessions;
  std::shared_ptr<TrafficMeter> last_meter;
  bool stopping = false;
  bool finished_once = false;
  uint64_t dealer_counter = 0;

  uint32_t threshold() const { return options.threshold == 0 ? options.parties : options.threshold; }

  void SendTo(Client& c, const Bytes& frame, TrafficMeter* meter) {
    std::lock_guard lock(c.write_mu);
    try {
      WriteAll(c.fd, frame);
      if (meter) meter->Record(c.party, frame.size());
    } catch (const TransportError&) {
      // The reader thread of that client notices the failure.
    }
  }

  Bytes ServerFrame(Session& s, PartyId to, ControlKind kind, std::span<const uint8_t> body) {
    return EncodeFrame(Frame{s.id, kServer, to, s.server_sequence++, MakeControl(kind, body)});
  }

  void Reject(int fd, const SessionId& sid, PartyId to, const std::string& reason) {
    Bytes body(reason.begin(), reason.end());
    Bytes frame = EncodeFrame(Frame{sid, kServer, to, 1, MakeControl(ControlKind::kReject, body)});
    try {
      WriteAll(fd, frame);
    } catch (const TransportError&) {
    }
  }

  // Called with mu held.
  void DealKeys(Session& s) {
    Rng rng = options.dealer_seed ? Rng::FromSeed(*options.dealer_seed, 0xdea1 + dealer_counter++)
                                  : Rng::FromOs();
    auto keys = paillier::Keygen(options.parties, threshold(), options.key_bits, rng);
    const Bytes pk = keys.public_key.Serialize();
    for (auto& [party, client] : s.clients) {
      const Bytes share = keys.shares[party - 1].Serialize();
      Bytes body;
      AppendU32Be(static_cast<uint32_t>(pk.size()), &body);
      body.insert(body.end(), pk.begin(), pk.end());
      AppendU32Be(static_cast<uint32_t>(share.size()), &body);
      body.insert(body.end(), share.begin(), share.end());
      SendTo(*client, ServerFrame(s, party, ControlKind::kDeal, body), s.meter.get());
    }
    s.dealt = true;
  }

  void AbortSession(Session& s, PartyId gone, const std::string& reason) {
    if (s.aborted) return;
    s.aborted = true;
    Bytes body(reason.begin(), reason.end());
    for (auto& [party, client] : s.clients) {
      if (party == gone || client->said_goodbye) continue;
      SendTo(*client, ServerFrame(s, party, ControlKind::kAbort, body), s.meter.get());
    }
  }

  void Serve(int fd) {
    SetNoDelay(fd);
    std::shared_ptr<Client> me;
    SessionId sid{};
    try {
      auto first = ReadFrameBytes(fd);
      if (!first) {
        ::close(fd);
        return;
      }
      Frame reg = DecodeFrame(*first);
      sid = reg.session;
      if (reg.recipient != kServer || reg.payload.empty() ||
          reg.payload[0] != static_cast<uint8_t>(ControlKind::kRegister)) {
        Reject(fd, sid, reg.sender, "expected registration");
        ::close(fd);
        return;
      }
      {
        std::lock_guard lock(mu);
        if (reg.sender < 1 || reg.sender > options.parties) {
          Reject(fd, sid, reg.sender, "party index out of range");
          ::close(fd);
          return;
        }
        auto& s = sessions[sid];
        if (!s.meter) {
          s.id = sid;
          s.meter = std::make_shared<TrafficMeter>(options.parties);
          s.last_sequence.assign(options.parties + 1, 0);
          last_meter = s.meter;
        }
        if (s.clients.count(reg.sender) || s.dealt) {
          Reject(fd, sid, reg.sender, "duplicate registration for party " + std::to_string(reg.sender));
          ::close(fd);
          return;
        }
        me = std::make_shared<Client>();
        me->fd = fd;
        me->party = reg.sender;
        s.clients[reg.sender] = me;
        s.last_sequence[reg.sender] = reg.sequence;
        if (s.clients.size() == options.parties) {
          DealKeys(s);
        }
      }

      for (;;) {
        auto bytes = ReadFrameBytes(fd);
        if (!bytes) break;
        Frame f = DecodeFrame(*bytes);
        std::lock_guard lock(mu);
        auto& s = sessions[sid];
        if (f.session != sid || f.sender != me->party || f.sequence <= s.last_sequence[me->party]) {
          AbortSession(s, 0, "protocol violation by party " + std::to_string(me->party));
          break;
        }
        s.last_sequence[me->party] = f.sequence;
        if (f.recipient == kServer) {
          if (!f.payload.empty() && f.payload[0] == static_cast<uint8_t>(ControlKind::kGoodbye)) {
            me->said_goodbye = true;
          }
          continue;
        }
        if (f.recipient == kBroadcast) {
          for (auto& [party, client] : s.clients) {
            if (party != me->party) SendTo(*client, *bytes, s.meter.get());
          }
        } else if (auto it = s.clients.find(f.recipient); it != s.clients.end()) {
          SendTo(*it->second, *bytes, s.meter.get());
        }
      }
    } catch (const KepError&) {
    }

    std::lock_guard lock(mu);
    if (me) {
      auto& s = sessions[sid];
      if (!me->said_goodbye) {
        AbortSession(s, me->party, "party " + std::to_string(me->party) + " disconnected");
      }
      s.clients.erase(me->party);
      if (s.clients.empty()) {
        sessions.erase(sid);
        finished_once = true;
        finished_cv.notify_all();
      }
    }
    ::close(fd);
  }

  void AcceptLoop() {
    for (;;) {
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        return;
      }
      std::lock_guard lock(mu);
      if (stopping || (options.once && finished_once)) {
        ::close(fd);
        continue;
      }
      workers.emplace_back([this, fd] { Serve(fd); });
    }
  }
};

RelayServer::RelayServer(RelayOptions options) : impl_(std::make_unique<Impl>()) {
  if (options.parties < 2) {
    throw InputError("relay needs at least two parties");
  }
  impl_->options = std::move(options);
}

RelayServer::~RelayServer() { Stop(); }

uint16_t RelayServer::Start() {
  addrinfo* res = Resolve(impl_->options.bind, true);
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw TransportError("cannot create socket");
  }
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 64) != 0) {
    const std::string err = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(fd);
    throw TransportError("cannot bind " + impl_->options.bind.ToString() + ": " + err);
  }
  ::freeaddrinfo(res);
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  impl_->listen_fd = fd;
  impl_->bound_port = ntohs(addr.sin_port);
  impl_->acceptor = std::thread([this] { impl_->AcceptLoop(); });
  return impl_->bound_port;
}

void RelayServer::Stop() {
  if (!impl_) return;
  {
    std::lock_guard lock(impl_->mu);
    if (impl_->stopping) return;
    impl_->stopping = true;
    for (auto& [sid, s] : impl_->sessions) {
      for (auto& [party, c] : s.clients) ::shutdown(c->fd, SHUT_RDWR);
    }
    impl_->finished_cv.notify_all();
  }
  if (impl_->listen_fd >= 0) {
    ::shutdown(impl_->listen_fd, SHUT_RDWR);
    ::close(impl_->listen_fd);
  }
  if (impl_->acceptor.joinable()) impl_->acceptor.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(impl_->mu);
    workers.swap(impl_->workers);
  }
  for (auto& w : workers) w.join();
}

void RelayServer::Wait() {
  std::unique_lock lock(impl_->mu);
  impl_->finished_cv.wait(lock, [&] {
    return impl_->stopping || (impl_->options.once && impl_->finished_once);
  });
}

uint16_t RelayServer::port() const { return impl_->bound_port; }

uint64_t RelayServer::last_session_traffic() const {
  std::lock_guard lock(impl_->mu);
  return impl_->last_meter ? impl_->last_meter->total() : 0;
}

uint64_t RelayServer::last_session_incoming(PartyId party) const {
  std::lock_guard lock(impl_->mu);
  return impl_->last_meter ? impl_->last_meter->incoming(party) : 0;
}

// ---------------------------------------------------------------------------

TcpChannel::TcpChannel(int fd, SessionId session, PartyId self, PartyId parties)
    : QueueChannel(session, self, parties,
                   [this](const Bytes& frame) {
                     std::lock_guard lock(write_mu_);
                     WriteAll(fd_, frame);
                   }),
      fd_(fd) {}

std::unique_ptr<TcpChannel> TcpChannel::Connect(const Endpoint& server, PartyId self, PartyId parties,
                                                SessionId session, std::chrono::milliseconds timeout) {
  addrinfo* res = Resolve(server, false);
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0 || ::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
    const std::string err = std::strerror(errno);
    ::freeaddrinfo(res);
    if (fd >= 0) ::close(fd);
    throw TransportError("cannot connect to " + server.ToString() + ": " + err);
  }
  ::freeaddrinfo(res);
  SetNoDelay(fd);
  std::unique_ptr<TcpChannel> ch(new TcpChannel(fd, session, self, parties));
  ch->set_timeout(timeout);
  ch->SendControl(ControlKind::kRegister);
  ch->reader_ = std::thread([raw = ch.get()] { raw->ReaderLoop(); });
  return ch;
}

void TcpChannel::ReaderLoop() {
  try {
    for (;;) {
      auto bytes = ReadFrameBytes(fd_);
      if (!bytes) break;
      Deliver(*bytes);
    }
    if (!closing_) Abort("relay closed the connection");
  } catch (const KepError& e) {
    if (!closing_) Abort(e.what());
  }
}

void TcpChannel::Finish() {
  closing_ = true;
  SendControl(ControlKind::kGoodbye);
}

TcpChannel::~TcpChannel() {
  closing_ = true;
  ::shutdown(fd_, SHUT_RDWR);
  if (reader_.joinable()) reader_.join();
  ::close(fd_);
}

}  // namespace kep::transport
