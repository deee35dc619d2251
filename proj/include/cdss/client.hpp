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

// Clinician-side client: shares records and queries to both parties and
// reconstructs the aggregate answer.

#ifndef CDSS_CLIENT_HPP_
#define CDSS_CLIENT_HPP_

#include <array>
#include <future>
#include <memory>
#include <string>
#include <vector>

#include "cdss/config.hpp"
#include "cdss/messages.hpp"
#include "cdss/preprocessing.hpp"
#include "cdss/query.hpp"
#include "cdss/random.hpp"
#include "cdss/transport.hpp"

namespace cdss {

class ClinicianClient {
 public:
  // `masks` is required in authenticated mode and ignored otherwise.
  ClinicianClient(DeploymentConfig cfg, Network& net, ClientMasks* masks = nullptr)
      : cfg_(std::move(cfg)), net_(net), masks_(masks) {
    if (cfg_.mode() == Mode::kAuthenticated && !masks_) {
      fail(ErrorKind::kConfigError, "authenticated mode needs the client mask file");
    }
    if (cfg_.party0.empty() || cfg_.party1.empty()) {
      fail(ErrorKind::kConfigError, "party0 and party1 endpoints must be configured");
    }
  }

  void connect() {
    const std::array<std::string, kNumParties> addr{cfg_.party0, cfg_.party1};
    for (int i = 0; i < kNumParties; ++i) {
      if (ch_[static_cast<std::size_t>(i)]) continue;
      try {
        auto c = net_.dial(addr[static_cast<std::size_t>(i)], cfg_.timeout());
        exchange_hello(*c, hello(), cfg_.timeout());
        ch_[static_cast<std::size_t>(i)] = std::move(c);
      } catch (const CdssError& e) {
        if (e.kind() == ErrorKind::kConnectionLost) {
          fail(ErrorKind::kConnectError, "party " + std::to_string(i) + ": " + e.detail());
        }
        throw;
      }
    }
  }

  void close() {
    for (auto& c : ch_) {
      if (c) c->close();
      c.reset();
    }
  }

  // Validates every record, then uploads in batches. Returns the database
  // size both parties report after the last batch.
  std::uint64_t ingest(const std::vector<PatientRecordPlain>& records) {
    for (const auto& r : records) validate_record(r, cfg_.n_bits, cfg_.n_treatments);
    connect();
    std::uint64_t total = 0;
    for (std::size_t off = 0; off < records.size(); off += kMaxRecordsPerBatch) {
      std::size_t n = std::min<std::size_t>(kMaxRecordsPerBatch, records.size() - off);
      total = ingest_batch(std::span(records).subspan(off, n));
    }
    return total;
  }

  QueryResultPlain query(const Genotype& genotype) {
    if (genotype.size() != cfg_.n_bits) {
      fail(ErrorKind::kValidationError, "genotype length " + std::to_string(genotype.size()) +
                                            " != N=" + std::to_string(cfg_.n_bits));
    }
    try {
      connect();
      std::array<QuerySubmit, kNumParties> sub;
      const Id128 qid = random_id(rng_);
      std::vector<FieldElement> plain;
      plain.reserve(genotype.size());
      for (auto b : genotype) plain.push_back(cfg_.field().from_int(b));
      auto values = split(plain, sub[0].first_mask_id);
      for (int i = 0; i < kNumParties; ++i) {
        auto& q = sub[static_cast<std::size_t>(i)];
        q.query_id = qid;
        q.input = input_mode_for(cfg_.mode());
        q.n_bits = static_cast<std::uint16_t>(cfg_.n_bits);
        q.first_mask_id = sub[0].first_mask_id;
        q.values = std::move(values[static_cast<std::size_t>(i)]);
      }
      auto frames = round_trip(MessageType::kQuerySubmit,
                               {sub[0].encode(cfg_.field()), sub[1].encode(cfg_.field())},
                               MessageType::kResultShare);
      ResultShare a = ResultShare::decode(cfg_.field(), frames[0].payload);
      ResultShare b = ResultShare::decode(cfg_.field(), frames[1].payload);
      return finalize_result(cfg_.field(), a, b, qid, cfg_.n_treatments);
    } catch (const CdssError& e) {
      if (e.kind() == ErrorKind::kConnectError || e.kind() == ErrorKind::kConnectionLost) {
        close();
        fail(ErrorKind::kQueryTimeout, e.detail());
      }
      throw;
    }
  }

 private:
  Hello hello() const {
    Hello h;
    if (masks_) h.session_id = masks_->session_id();
    h.role = Role::kClient;
    h.id = cfg_.client_id;
    h.modulus = cfg_.field().modulus();
    h.n_bits = static_cast<std::uint16_t>(cfg_.n_bits);
    h.n_treatments = static_cast<std::uint16_t>(cfg_.n_treatments);
    h.mode = cfg_.mode();
    return h;
  }

  // Per-party payload values: additive shares, or x - r for dealer masks.
  std::array<std::vector<FieldElement>, kNumParties> split(const std::vector<FieldElement>& xs,
                                                           std::uint64_t& first_mask_id) {
    const Field& f = cfg_.field();
    std::array<std::vector<FieldElement>, kNumParties> out;
    if (cfg_.mode() == Mode::kAuthenticated) {
      auto [first, r] = masks_->take(xs.size());
      first_mask_id = first;
      out[0].reserve(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) out[0].push_back(f.sub(xs[i], r[i]));
      out[1] = out[0];
      return out;
    }
    first_mask_id = 0;
    for (auto& o : out) o.reserve(xs.size());
    for (auto x : xs) {
      auto s = share_secret(f, x, rng_);
      out[0].push_back(s[0]);
      out[1].push_back(s[1]);
    }
    return out;
  }

  std::uint64_t ingest_batch(std::span<const PatientRecordPlain> recs) {
    std::vector<FieldElement> plain;
    for (const auto& r : recs) {
      auto e = expand_record(cfg_.field(), r, cfg_.n_treatments);
      plain.insert(plain.end(), e.begin(), e.end());
    }
    std::uint64_t first = 0;
    auto values = split(plain, first);
    const Id128 bid = random_id(rng_);
    std::array<Bytes, kNumParties> payload;
    for (int i = 0; i < kNumParties; ++i) {
      IngestBatch b;
      b.batch_id = bid;
      b.input = input_mode_for(cfg_.mode());
      b.count = static_cast<std::uint32_t>(recs.size());
      b.n_bits = static_cast<std::uint16_t>(cfg_.n_bits);
      b.n_treatments = static_cast<std::uint16_t>(cfg_.n_treatments);
      b.first_mask_id = first;
      b.values = std::move(values[static_cast<std::size_t>(i)]);
      payload[static_cast<std::size_t>(i)] = b.encode(cfg_.field());
    }
    auto frames = round_trip(MessageType::kIngestBatch, payload, MessageType::kIngestAck);
    IngestAck a = IngestAck::decode(frames[0].payload);
    IngestAck b = IngestAck::decode(frames[1].payload);
    if (a.batch_id != bid || b.batch_id != bid || a.record_count != b.record_count) {
      fail(ErrorKind::kIngestError, "parties acknowledged different database states");
    }
    return a.record_count;
  }

  // Sends one payload to each party and waits for both answers concurrently.
  std::array<Frame, kNumParties> round_trip(MessageType type,
                                            const std::array<Bytes, kNumParties>& payload,
                                            MessageType reply) {
    std::array<std::future<Frame>, kNumParties> pending;
    for (std::size_t i = 0; i < std::size_t{kNumParties}; ++i) {
      Channel& c = *ch_[i];
      pending[i] = std::async(std::launch::async, [&, i] {
        c.send(type, payload[i]);
        return c.recv(2 * cfg_.timeout());
      });
    }
    std::array<Frame, kNumParties> out;
    std::exception_ptr first_error;
    for (std::size_t i = 0; i < std::size_t{kNumParties}; ++i) {
      try {
        out[i] = pending[i].get();
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
      }
    }
    // An ABORT from either party explains the failure better than a timeout.
    for (const auto& f : out) {
      if (f.type == MessageType::kAbort) {
        ByteReader r(f.payload);
        fail(ErrorKind::kProtocolError, "party aborted: " + r.str());
      }
    }
    if (first_error) std::rethrow_exception(first_error);
    for (const auto& f : out) {
      if (f.type != reply) {
        fail(ErrorKind::kProtocolError, "expected " + std::string(message_type_name(reply)) +
                                            ", got " + std::string(message_type_name(f.type)));
      }
    }
    return out;
  }

  DeploymentConfig cfg_;
  Network& net_;
  ClientMasks* masks_;
  Csprng rng_;
  std::array<std::unique_ptr<Channel>, kNumParties> ch_;
};

// Exit codes shared by the command-line tools.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidationError:
    case ErrorKind::kConfigError:
      return 2;
    case ErrorKind::kQueryTimeout:
    case ErrorKind::kConnectError:
    case ErrorKind::kConnectionLost:
      return 3;
    default:
      return 4;
  }
}

}  // namespace cdss

#endif  // CDSS_CLIENT_HPP_
