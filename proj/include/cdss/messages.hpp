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

// Client <-> party payloads and the party <-> party SYNC used to agree on
// the next operation.
//
// INGEST_BATCH: batch id(16) | u8 input | u32 count | u16 N | u16 T |
//               [u64 first mask id, masked input only] | count*(N+2T) elements
// INGEST_ACK:   batch id(16) | u64 record count after the batch
// QUERY_SUBMIT: query id(16) | u8 input | u16 N | [u64 first mask id] | N elements
// SYNC:         u8 kind | id(16) | u8 status
//
// Direct input carries one additive share per element (semi-honest mode).
// Masked input carries x - r for dealer masks r, identical at both parties
// (authenticated mode; the parties hold MAC'd shares of r).

#ifndef CDSS_MESSAGES_HPP_
#define CDSS_MESSAGES_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cdss/error.hpp"
#include "cdss/field.hpp"
#include "cdss/wire.hpp"

namespace cdss {

inline constexpr std::uint32_t kMaxRecordsPerBatch = 5000;

enum class InputMode : std::uint8_t { kDirect = 0, kMasked = 1 };

inline InputMode input_mode_for(Mode mode) {
  return mode == Mode::kAuthenticated ? InputMode::kMasked : InputMode::kDirect;
}

namespace detail {

inline InputMode read_input_mode(ByteReader& r) {
  std::uint8_t m = r.u8();
  if (m > 1) fail(ErrorKind::kProtocolError, "bad input mode");
  return static_cast<InputMode>(m);
}

}  // namespace detail

struct IngestBatch {
  Id128 batch_id{};
  InputMode input = InputMode::kDirect;
  std::uint32_t count = 0;
  std::uint16_t n_bits = 0;
  std::uint16_t n_treatments = 0;
  std::uint64_t first_mask_id = 0;
  std::vector<FieldElement> values;

  std::size_t width() const { return std::size_t{n_bits} + 2 * std::size_t{n_treatments}; }

  Bytes encode(const Field& f) const {
    ByteWriter w;
    w.reserve(64 + values.size() * kElementBytes);
    w.bytes(batch_id);
    w.u8(static_cast<std::uint8_t>(input));
    w.u32(count);
    w.u16(n_bits);
    w.u16(n_treatments);
    if (input == InputMode::kMasked) w.u64(first_mask_id);
    for (auto v : values) w.element(f, v);
    return w.take();
  }

  static IngestBatch decode(const Field& f, std::span<const std::uint8_t> payload) {
    ByteReader r(payload);
    IngestBatch b;
    b.batch_id = r.fixed<16>();
    b.input = detail::read_input_mode(r);
    b.count = r.u32();
    b.n_bits = r.u16();
    b.n_treatments = r.u16();
    if (b.input == InputMode::kMasked) b.first_mask_id = r.u64();
    if (b.count > kMaxRecordsPerBatch) fail(ErrorKind::kProtocolError, "batch too large");
    std::size_t n = b.count * b.width();
    if (r.remaining() != n * kElementBytes) {
      fail(ErrorKind::kProtocolError, "INGEST_BATCH element count does not match header");
    }
    b.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) b.values.push_back(r.element(f));
    return b;
  }
};

struct IngestAck {
  Id128 batch_id{};
  std::uint64_t record_count = 0;

  Bytes encode() const {
    ByteWriter w;
    w.bytes(batch_id);
    w.u64(record_count);
    return w.take();
  }

  static IngestAck decode(std::span<const std::uint8_t> payload) {
    ByteReader r(payload);
    IngestAck a{r.fixed<16>(), r.u64()};
    r.expect_done("INGEST_ACK");
    return a;
  }
};

struct QuerySubmit {
  Id128 query_id{};
  InputMode input = InputMode::kDirect;
  std::uint16_t n_bits = 0;
  std::uint64_t first_mask_id = 0;
  std::vector<FieldElement> values;

  Bytes encode(const Field& f) const {
    ByteWriter w;
    w.bytes(query_id);
    w.u8(static_cast<std::uint8_t>(input));
    w.u16(n_bits);
    if (input == InputMode::kMasked) w.u64(first_mask_id);
    for (auto v : values) w.element(f, v);
    return w.take();
  }

  static QuerySubmit decode(const Field& f, std::span<const std::uint8_t> payload) {
    ByteReader r(payload);
    QuerySubmit q;
    q.query_id = r.fixed<16>();
    q.input = detail::read_input_mode(r);
    q.n_bits = r.u16();
    if (q.input == InputMode::kMasked) q.first_mask_id = r.u64();
    if (r.remaining() != std::size_t{q.n_bits} * kElementBytes) {
      fail(ErrorKind::kProtocolError, "QUERY_SUBMIT element count does not match header");
    }
    for (std::uint16_t i = 0; i < q.n_bits; ++i) q.values.push_back(r.element(f));
    return q;
  }
};

enum class OpKind : std::uint8_t { kIngest = 1, kQuery = 2 };

enum class SyncStatus : std::uint8_t {
  kOk = 0,
  kDuplicate = 1,
  kMissing = 2,
  kInvalid = 3,
  kQuota = 4,
  kPreproc = 5,
};

// ABORT reason sent to the client for a rejected operation.
inline std::string_view sync_reason(SyncStatus s) {
  switch (s) {
    case SyncStatus::kOk: return "ok";
    case SyncStatus::kDuplicate: return "duplicate";
    case SyncStatus::kMissing: return "desync";
    case SyncStatus::kInvalid: return "validation";
    case SyncStatus::kQuota: return "quota";
    case SyncStatus::kPreproc: return "preproc";
  }
  return "protocol";
}

struct SyncMessage {
  OpKind kind = OpKind::kIngest;
  Id128 id{};
  SyncStatus status = SyncStatus::kOk;

  Bytes encode() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(kind));
    w.bytes(id);
    w.u8(static_cast<std::uint8_t>(status));
    return w.take();
  }

  static SyncMessage decode(std::span<const std::uint8_t> payload) {
    ByteReader r(payload);
    SyncMessage m;
    std::uint8_t k = r.u8();
    if (k != 1 && k != 2) fail(ErrorKind::kDesyncAbort, "bad SYNC kind");
    m.kind = static_cast<OpKind>(k);
    m.id = r.fixed<16>();
    std::uint8_t s = r.u8();
    if (s > 5) fail(ErrorKind::kDesyncAbort, "bad SYNC status");
    m.status = static_cast<SyncStatus>(s);
    r.expect_done("SYNC");
    return m;
  }
};

}  // namespace cdss

#endif  // CDSS_MESSAGES_HPP_
