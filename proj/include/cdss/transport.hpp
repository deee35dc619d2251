// Copyright 2026 The MPC-CDSS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Ordered, reliable frame channels. Two interchangeable implementations:
// TCP sockets and in-process loopback queues. A Network hands out listeners
// and dialed channels for either, addressed as "host:port" or "loop:name".

#ifndef CDSS_TRANSPORT_HPP_
#define CDSS_TRANSPORT_HPP_

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cdss/error.hpp"
#include "cdss/wire.hpp"

namespace cdss {

using Millis = std::chrono::milliseconds;

struct TranscriptEntry {
  bool outgoing;
  MessageType type;
  std::uint32_t length;  // frame length field: 1 + payload bytes

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

class Channel {
 public:
  virtual ~Channel() = default;

  void send(MessageType type, std::span<const std::uint8_t> payload) {
    if (payload.size() > kMaxPayload) {
      fail(ErrorKind::kFrameError, "payload exceeds frame cap");
    }
    do_send(type, payload);
    frames_sent_.fetch_add(1);
    bytes_sent_.fetch_add(payload.size() + 5);
    note(true, type, payload.size());
  }

  void send(const Frame& f) { send(f.type, f.payload); }

  // Throws ConnectionLost on timeout or when the peer has gone away.
  Frame recv(Millis timeout) {
    Frame f = do_recv(timeout);
    frames_received_.fetch_add(1);
    bytes_received_.fetch_add(f.payload.size() + 5);
    note(false, f.type, f.payload.size());
    return f;
  }

  // Receives one frame and requires it to have `type`. An ABORT from the
  // peer surfaces as ProtocolError carrying the peer's reason.
  Frame expect(MessageType type, Millis timeout) {
    Frame f = recv(timeout);
    if (f.type == MessageType::kAbort) {
      ByteReader r(f.payload);
      fail(ErrorKind::kProtocolError, "peer aborted: " + r.str());
    }
    if (f.type != type) {
      fail(ErrorKind::kDesyncAbort, "expected " + std::string(message_type_name(type)) +
                                        ", got " + std::string(message_type_name(f.type)));
    }
    return f;
  }

  void send_abort(std::string_view reason) {
    ByteWriter w;
    w.str(reason);
    try {
      send(MessageType::kAbort, w.data());
    } catch (const std::exception&) {
      // Best effort: the channel may already be gone.
    }
  }

  virtual void close() = 0;

  // True once a frame is ready or the channel has closed (so recv will not
  // block); false when `timeout` passes first.
  virtual bool wait_readable(Millis timeout) = 0;

  std::uint64_t frames_sent() const { return frames_sent_.load(); }
  std::uint64_t bytes_sent() const { return bytes_sent_.load(); }
  std::uint64_t frames_received() const { return frames_received_.load(); }
  std::uint64_t bytes_received() const { return bytes_received_.load(); }

  void set_recording(bool on) {
    std::lock_guard lock(transcript_mu_);
    recording_ = on;
  }

  std::vector<TranscriptEntry> transcript() const {
    std::lock_guard lock(transcript_mu_);
    return transcript_;
  }

 protected:
  virtual void do_send(MessageType type, std::span<const std::uint8_t> payload) = 0;
  virtual Frame do_recv(Millis timeout) = 0;

 private:
  void note(bool outgoing, MessageType type, std::size_t payload_size) {
    std::lock_guard lock(transcript_mu_);
    if (recording_) {
      transcript_.push_back({outgoing, type, static_cast<std::uint32_t>(payload_size + 1)});
    }
  }

  std::atomic<std::uint64_t> frames_sent_{0}, bytes_sent_{0};
  std::atomic<std::uint64_t> frames_received_{0}, bytes_received_{0};
  mutable std::mutex transcript_mu_;
  bool recording_ = false;
  std::vector<TranscriptEntry> transcript_;
};

// ---------------------------------------------------------------------------
// Loopback

namespace detail {

struct FrameQueue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Frame> frames;
  bool closed = false;

  void push(Frame f) {
    {
      std::lock_guard lock(mu);
      if (closed) fail(ErrorKind::kConnectionLost, "loopback peer closed");
      frames.push_back(std::move(f));
    }
    cv.notify_one();
  }

  Frame pop(Millis timeout) {
    std::unique_lock lock(mu);
    if (!cv.wait_for(lock, timeout, [&] { return !frames.empty() || closed; })) {
      fail(ErrorKind::kConnectionLost, "receive timed out");
    }
    if (frames.empty()) fail(ErrorKind::kConnectionLost, "loopback peer closed");
    Frame f = std::move(frames.front());
    frames.pop_front();
    return f;
  }

  bool wait(Millis timeout) {
    std::unique_lock lock(mu);
    return cv.wait_for(lock, timeout, [&] { return !frames.empty() || closed; });
  }

  void close() {
    {
      std::lock_guard lock(mu);
      closed = true;
    }
    cv.notify_all();
  }
};

}  // namespace detail

class LoopbackChannel : public Channel {
 public:
  LoopbackChannel(std::shared_ptr<detail::FrameQueue> inbox,
                  std::shared_ptr<detail::FrameQueue> outbox)
      : inbox_(std::move(inbox)), outbox_(std::move(outbox)) {}

  ~LoopbackChannel() override { close(); }

  void close() override {
    inbox_->close();
    outbox_->close();
  }

  bool wait_readable(Millis timeout) override { return inbox_->wait(timeout); }

 protected:
  void do_send(MessageType type, std::span<const std::uint8_t> payload) override {
    outbox_->push(Frame{type, Bytes(payload.begin(), payload.end())});
  }

  Frame do_recv(Millis timeout) override { return inbox_->pop(timeout); }

 private:
  std::shared_ptr<detail::FrameQueue> inbox_, outbox_;
};

inline std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_loopback_pair() {
  auto a = std::make_shared<detail::FrameQueue>();
  auto b = std::make_shared<detail::FrameQueue>();
  return {std::make_unique<LoopbackChannel>(a, b), std::make_unique<LoopbackChannel>(b, a)};
}

// ---------------------------------------------------------------------------
// TCP

class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }

  ~TcpChannel() override {
    close();
    if (fd_ >= 0) ::close(fd_);
  }

  void close() override {
    if (!shut_.exchange(true) && fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

  bool wait_readable(Millis timeout) override {
    pollfd p{fd_, POLLIN, 0};
    int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    return rc != 0;
  }

 protected:
  void do_send(MessageType type, std::span<const std::uint8_t> payload) override {
    std::lock_guard lock(send_mu_);
    auto len = static_cast<std::uint32_t>(payload.size() + 1);
    std::uint8_t header[5] = {static_cast<std::uint8_t>(len >> 24),
                              static_cast<std::uint8_t>(len >> 16),
                              static_cast<std::uint8_t>(len >> 8), static_cast<std::uint8_t>(len),
                              static_cast<std::uint8_t>(type)};
    write_all(header, sizeof(header));
    write_all(payload.data(), payload.size());
  }

  Frame do_recv(Millis timeout) override {
    std::lock_guard lock(recv_mu_);
    auto deadline = std::chrono::steady_clock::now() + timeout;
    std::array<std::uint8_t, 4> header;
    read_all(header.data(), header.size(), deadline);
    std::uint32_t len = read_frame_length(header);
    Bytes body(len);
    read_all(body.data(), body.size(), deadline);
    if (!is_known_message_type(body[0])) {
      fail(ErrorKind::kProtocolError, "unknown message type " + std::to_string(body[0]));
    }
    Frame f;
    f.type = static_cast<MessageType>(body[0]);
    f.payload.assign(body.begin() + 1, body.end());
    return f;
  }

 private:
  void write_all(const std::uint8_t* data, std::size_t n) {
    while (n > 0) {
      ssize_t w = ::send(fd_, data, n, MSG_NOSIGNAL);
      if (w < 0) {
        if (errno == EINTR) continue;
        fail(ErrorKind::kConnectionLost, std::string("send: ") + std::strerror(errno));
      }
      data += w;
      n -= static_cast<std::size_t>(w);
    }
  }

  void read_all(std::uint8_t* data, std::size_t n,
                std::chrono::steady_clock::time_point deadline) {
    while (n > 0) {
      auto left = std::chrono::duration_cast<Millis>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) fail(ErrorKind::kConnectionLost, "receive timed out");
      pollfd p{fd_, POLLIN, 0};
      int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1000)));
      if (rc < 0) {
        if (errno == EINTR) continue;
        fail(ErrorKind::kConnectionLost, std::string("poll: ") + std::strerror(errno));
      }
      if (rc == 0) continue;
      ssize_t r = ::recv(fd_, data, n, 0);
      if (r == 0) fail(ErrorKind::kConnectionLost, "connection closed by peer");
      if (r < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        fail(ErrorKind::kConnectionLost, std::string("recv: ") + std::strerror(errno));
      }
      data += r;
      n -= static_cast<std::size_t>(r);
    }
  }

  int fd_;
  std::atomic<bool> shut_{false};
  std::mutex send_mu_, recv_mu_;
};

struct HostPort {
  std::string host;
  std::string port;
};

inline HostPort split_host_port(const std::string& endpoint) {
  auto colon = endpoint.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == endpoint.size()) {
    fail(ErrorKind::kConfigError, "endpoint must be host:port, got '" + endpoint + "'");
  }
  return {endpoint.substr(0, colon), endpoint.substr(colon + 1)};
}

// ---------------------------------------------------------------------------
// Listeners and networks

class Listener {
 public:
  virtual ~Listener() = default;
  // Returns nullptr when nothing arrived within `timeout`.
  virtual std::unique_ptr<Channel> accept(Millis timeout) = 0;
  virtual void close() = 0;
};

class Network {
 public:
  virtual ~Network() = default;
  virtual std::unique_ptr<Listener> listen(const std::string& address) = 0;
  // Retries until `timeout` elapses, then throws ConnectError.
  virtual std::unique_ptr<Channel> dial(const std::string& address, Millis timeout) = 0;
};

class TcpListener : public Listener {
 public:
  explicit TcpListener(const std::string& address) {
    HostPort hp = split_host_port(address);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    if (::getaddrinfo(hp.host.c_str(), hp.port.c_str(), &hints, &res) != 0 || !res) {
      fail(ErrorKind::kConfigError, "cannot resolve listen address " + address);
    }
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    int rc = ::bind(fd_, res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc != 0 || ::listen(fd_, 16) != 0) {
      int err = errno;
      ::close(fd_);
      fd_ = -1;
      fail(ErrorKind::kConnectError, "cannot listen on " + address + ": " + std::strerror(err));
    }
  }

  ~TcpListener() override { close(); }

  // The bound port; useful after listening on port 0.
  std::uint16_t port() const {
    sockaddr_in a{};
    socklen_t n = sizeof(a);
    if (fd_ < 0 || ::getsockname(fd_, reinterpret_cast<sockaddr*>(&a), &n) != 0) return 0;
    return ntohs(a.sin_port);
  }

  std::unique_ptr<Channel> accept(Millis timeout) override {
    if (fd_ < 0) return nullptr;
    pollfd p{fd_, POLLIN, 0};
    int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc <= 0) return nullptr;
    int c = ::accept(fd_, nullptr, nullptr);
    if (c < 0) return nullptr;
    return std::make_unique<TcpChannel>(c);
  }

  void close() override {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
};

class TcpNetwork : public Network {
 public:
  std::unique_ptr<Listener> listen(const std::string& address) override {
    return std::make_unique<TcpListener>(address);
  }

  std::unique_ptr<Channel> dial(const std::string& address, Millis timeout) override {
    HostPort hp = split_host_port(address);
    auto deadline = std::chrono::steady_clock::now() + timeout;
    std::string last_error = "timed out";
    do {
      addrinfo hints{};
      hints.ai_family = AF_INET;
      hints.ai_socktype = SOCK_STREAM;
      addrinfo* res = nullptr;
      if (::getaddrinfo(hp.host.c_str(), hp.port.c_str(), &hints, &res) == 0 && res) {
        int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
        int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
        ::freeaddrinfo(res);
        if (rc == 0) return std::make_unique<TcpChannel>(fd);
        last_error = std::strerror(errno);
        ::close(fd);
      } else {
        last_error = "cannot resolve " + hp.host;
      }
      std::this_thread::sleep_for(Millis(50));
    } while (std::chrono::steady_clock::now() < deadline);
    fail(ErrorKind::kConnectError, "cannot reach " + address + ": " + last_error);
  }
};

class LoopbackListener : public Listener {
 public:
  std::unique_ptr<Channel> accept(Millis timeout) override {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return !pending_.empty() || closed_; });
    if (pending_.empty()) return nullptr;
    auto c = std::move(pending_.front());
    pending_.pop_front();
    return c;
  }

  void close() override {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
      pending_.clear();
    }
    cv_.notify_all();
  }

  bool offer(std::unique_ptr<Channel> c) {
    {
      std::lock_guard lock(mu_);
      if (closed_) return false;
      pending_.push_back(std::move(c));
    }
    cv_.notify_one();
    return true;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::unique_ptr<Channel>> pending_;
  bool closed_ = false;
};

// In-process network: listeners are registered by name in this object.
class LoopbackNetwork : public Network {
 public:
  std::unique_ptr<Listener> listen(const std::string& address) override {
    auto shared = std::make_shared<LoopbackListener>();
    {
      std::lock_guard lock(mu_);
      listeners_[address] = shared;
    }
    return std::make_unique<Handle>(shared);
  }

  std::unique_ptr<Channel> dial(const std::string& address, Millis timeout) override {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    do {
      std::shared_ptr<LoopbackListener> l;
      {
        std::lock_guard lock(mu_);
        auto it = listeners_.find(address);
        if (it != listeners_.end()) l = it->second.lock();
      }
      if (l) {
        auto [mine, theirs] = make_loopback_pair();
        if (l->offer(std::move(theirs))) return std::move(mine);
      }
      std::this_thread::sleep_for(Millis(5));
    } while (std::chrono::steady_clock::now() < deadline);
    fail(ErrorKind::kConnectError, "no loopback listener at " + address);
  }

 private:
  class Handle : public Listener {
   public:
    explicit Handle(std::shared_ptr<LoopbackListener> l) : l_(std::move(l)) {}
    ~Handle() override { l_->close(); }
    std::unique_ptr<Channel> accept(Millis timeout) override { return l_->accept(timeout); }
    void close() override { l_->close(); }

   private:
    std::shared_ptr<LoopbackListener> l_;
  };

  std::mutex mu_;
  std::map<std::string, std::weak_ptr<LoopbackListener>> listeners_;
};

// ---------------------------------------------------------------------------
// Handshake

inline constexpr std::uint16_t kProtocolVersion = 1;

enum class Role : std::uint8_t { kParty = 0, kClient = 1 };

struct Hello {
  std::uint16_t version = kProtocolVersion;
  Id128 session_id{};
  Role role = Role::kParty;
  std::uint8_t id = 0;
  u128 modulus = 0;
  std::uint16_t n_bits = 0;
  std::uint16_t n_treatments = 0;
  Mode mode = Mode::kSemiHonest;

  Bytes encode() const {
    ByteWriter w;
    w.u16(version);
    w.bytes(session_id);
    w.u8(static_cast<std::uint8_t>(role));
    w.u8(id);
    for (int i = 0; i < 16; ++i) w.u8(static_cast<std::uint8_t>(modulus >> (8 * i)));
    w.u16(n_bits);
    w.u16(n_treatments);
    w.u8(static_cast<std::uint8_t>(mode));
    return w.take();
  }

  static Hello decode(std::span<const std::uint8_t> payload) {
    ByteReader r(payload);
    Hello h;
    h.version = r.u16();
    h.session_id = r.fixed<16>();
    std::uint8_t role = r.u8();
    if (role > 1) fail(ErrorKind::kHandshakeError, "bad role byte");
    h.role = static_cast<Role>(role);
    h.id = r.u8();
    auto m = r.bytes(16);
    for (int i = 15; i >= 0; --i) h.modulus = (h.modulus << 8) | m[static_cast<std::size_t>(i)];
    h.n_bits = r.u16();
    h.n_treatments = r.u16();
    std::uint8_t mode = r.u8();
    if (mode > 1) fail(ErrorKind::kHandshakeError, "bad mode byte");
    h.mode = static_cast<Mode>(mode);
    r.expect_done("HELLO");
    return h;
  }
};

// Returns the first mismatching field name, or empty when compatible.
// Session ids are compared between parties, and between a client and a
// party in authenticated mode (where input masks bind to a dealing session).
inline std::string hello_mismatch(const Hello& mine, const Hello& theirs) {
  if (mine.version != theirs.version) return "version";
  if (mine.modulus != theirs.modulus) return "modulus";
  if (mine.n_bits != theirs.n_bits) return "N";
  if (mine.n_treatments != theirs.n_treatments) return "T";
  if (mine.mode != theirs.mode) return "mode";
  bool both_parties = mine.role == Role::kParty && theirs.role == Role::kParty;
  if ((both_parties || mine.mode == Mode::kAuthenticated) &&
      mine.session_id != theirs.session_id) {
    return "session";
  }
  return {};
}

// Symmetric HELLO exchange. On mismatch sends ABORT and throws
// HandshakeError naming the offending field.
inline Hello exchange_hello(Channel& ch, const Hello& mine, Millis timeout) {
  ch.send(MessageType::kHello, mine.encode());
  Frame f = ch.recv(timeout);
  if (f.type == MessageType::kAbort) {
    ByteReader r(f.payload);
    fail(ErrorKind::kHandshakeError, "peer rejected handshake: " + r.str());
  }
  if (f.type != MessageType::kHello) fail(ErrorKind::kHandshakeError, "expected HELLO");
  Hello theirs = Hello::decode(f.payload);
  std::string field = hello_mismatch(mine, theirs);
  if (!field.empty()) {
    ch.send_abort("handshake: " + field + " mismatch");
    fail(ErrorKind::kHandshakeError, field + " mismatch");
  }
  return theirs;
}

// Acceptor side: waits for the dialer's HELLO, answers with `mine`, then
// checks compatibility. `mine` may be adjusted from the peer's HELLO first.
inline Hello answer_hello(Channel& ch, const std::function<Hello(const Hello&)>& mine,
                          Millis timeout) {
  Frame f = ch.recv(timeout);
  if (f.type != MessageType::kHello) fail(ErrorKind::kHandshakeError, "expected HELLO");
  Hello theirs = Hello::decode(f.payload);
  Hello reply = mine(theirs);
  ch.send(MessageType::kHello, reply.encode());
  std::string field = hello_mismatch(reply, theirs);
  if (!field.empty()) {
    ch.send_abort("handshake: " + field + " mismatch");
    fail(ErrorKind::kHandshakeError, field + " mismatch");
  }
  return theirs;
}

}  // namespace cdss

#endif  // CDSS_TRANSPORT_HPP_
