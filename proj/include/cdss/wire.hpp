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

// Length-prefixed framing: u32 big-endian length (type byte + payload),
// u8 message type, payload. Protocol integers are big-endian; field
// elements are 16-byte little-endian.

#ifndef CDSS_WIRE_HPP_
#define CDSS_WIRE_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdss/error.hpp"
#include "cdss/field.hpp"
#include "cdss/sharing.hpp"

namespace cdss {

using Bytes = std::vector<std::uint8_t>;
using Id128 = std::array<std::uint8_t, 16>;

inline constexpr std::size_t kMaxFrameLength = 64u * 1024u * 1024u;  // type + payload
inline constexpr std::size_t kMaxPayload = kMaxFrameLength - 1;

enum class MessageType : std::uint8_t {
  kHello = 1,
  kIngestBatch = 2,
  kIngestAck = 3,
  kQuerySubmit = 4,
  kResultShare = 5,
  kOpenBatch = 6,
  kSync = 7,
  kCommit = 8,
  kReveal = 9,
  kAbort = 10,
};

inline bool is_known_message_type(std::uint8_t t) { return t >= 1 && t <= 10; }

inline std::string_view message_type_name(MessageType t) {
  switch (t) {
    case MessageType::kHello: return "HELLO";
    case MessageType::kIngestBatch: return "INGEST_BATCH";
    case MessageType::kIngestAck: return "INGEST_ACK";
    case MessageType::kQuerySubmit: return "QUERY_SUBMIT";
    case MessageType::kResultShare: return "RESULT_SHARE";
    case MessageType::kOpenBatch: return "OPEN_BATCH";
    case MessageType::kSync: return "SYNC";
    case MessageType::kCommit: return "COMMIT";
    case MessageType::kReveal: return "REVEAL";
    case MessageType::kAbort: return "ABORT";
  }
  return "UNKNOWN";
}

struct Frame {
  MessageType type = MessageType::kSync;
  Bytes payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline Bytes encode_frame(MessageType type, std::span<const std::uint8_t> payload) {
  if (payload.size() > kMaxPayload) {
    fail(ErrorKind::kFrameError, "payload of " + std::to_string(payload.size()) +
                                     " bytes exceeds frame cap");
  }
  auto len = static_cast<std::uint32_t>(payload.size() + 1);
  Bytes out;
  out.reserve(payload.size() + 5);
  out.push_back(static_cast<std::uint8_t>(len >> 24));
  out.push_back(static_cast<std::uint8_t>(len >> 16));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.push_back(static_cast<std::uint8_t>(len));
  out.push_back(static_cast<std::uint8_t>(type));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline Bytes encode_frame(const Frame& f) { return encode_frame(f.type, f.payload); }

inline std::uint32_t read_frame_length(std::span<const std::uint8_t, 4> header) {
  std::uint32_t len = (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
                      (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
  if (len == 0 || len > kMaxFrameLength) {
    fail(ErrorKind::kFrameError, "invalid frame length " + std::to_string(len));
  }
  return len;
}

// Decodes one frame from the front of `bytes`. Sets `consumed` to the number
// of bytes used. Throws NeedMoreBytes when the input is a strict prefix.
inline Frame decode_frame(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr) {
  if (bytes.size() < 4) fail(ErrorKind::kNeedMoreBytes, "incomplete length prefix");
  std::uint32_t len = read_frame_length(bytes.first<4>());
  if (bytes.size() < 4 + static_cast<std::size_t>(len)) {
    fail(ErrorKind::kNeedMoreBytes, "incomplete frame body");
  }
  std::uint8_t t = bytes[4];
  if (!is_known_message_type(t)) {
    fail(ErrorKind::kProtocolError, "unknown message type " + std::to_string(t));
  }
  Frame f;
  f.type = static_cast<MessageType>(t);
  f.payload.assign(bytes.begin() + 5, bytes.begin() + 4 + len);
  if (consumed) *consumed = 4 + len;
  return f;
}

class ByteWriter {
 public:
  ByteWriter() = default;

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put_be(v, 2); }
  void u32(std::uint32_t v) { put_be(v, 4); }
  void u64(std::uint64_t v) { put_be(v, 8); }

  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }

  void element(const Field& f, FieldElement e) {
    std::array<std::uint8_t, kElementBytes> buf;
    f.encode(e, buf);
    bytes(buf);
  }

  // value || mac in authenticated mode, value alone otherwise.
  void share(const Field& f, Mode mode, const Share& s) {
    element(f, s.value);
    if (mode == Mode::kAuthenticated) element(f, s.mac);
  }

  void reserve(std::size_t n) { out_.reserve(n); }
  std::size_t size() const { return out_.size(); }
  Bytes& data() { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  void put_be(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_be(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_be(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_be(4)); }
  std::uint64_t u64() { return get_be(8); }

  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> fixed() {
    auto s = bytes(N);
    std::array<std::uint8_t, N> a;
    std::copy(s.begin(), s.end(), a.begin());
    return a;
  }

  std::string str() {
    std::uint32_t n = u32();
    auto s = bytes(n);
    return std::string(s.begin(), s.end());
  }

  FieldElement element(const Field& f) {
    return f.decode(bytes(kElementBytes).first<kElementBytes>());
  }

  Share share(const Field& f, Mode mode) {
    Share s;
    s.value = element(f);
    if (mode == Mode::kAuthenticated) s.mac = element(f);
    return s;
  }

  std::size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }

  void expect_done(std::string_view what) const {
    if (!done()) fail(ErrorKind::kProtocolError, std::string(what) + ": trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) fail(ErrorKind::kProtocolError, "truncated message");
  }

  std::uint64_t get_be(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 8) | in_[pos_ + static_cast<std::size_t>(i)];
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline std::size_t share_bytes(Mode mode) {
  return mode == Mode::kAuthenticated ? 2 * kElementBytes : kElementBytes;
}

inline std::string hex(std::span<const std::uint8_t> b) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(b.size() * 2);
  for (auto c : b) {
    s.push_back(kDigits[c >> 4]);
    s.push_back(kDigits[c & 15]);
  }
  return s;
}

inline Id128 random_id(Csprng& rng) {
  Id128 id;
  rng.fill(id);
  return id;
}

}  // namespace cdss

#endif  // CDSS_WIRE_HPP_
