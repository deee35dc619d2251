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

// Online two-party protocol over additive shares.
//
// Every gadget here is batched: a call over n inputs performs the same
// fixed number of communication rounds regardless of n, and the sequence
// of messages depends only on public sizes, never on secret values.

#ifndef CDSS_ENGINE_HPP_
#define CDSS_ENGINE_HPP_

#include <chrono>
#include <exception>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cdss/commitment.hpp"
#include "cdss/error.hpp"
#include "cdss/field.hpp"
#include "cdss/preprocessing.hpp"
#include "cdss/sharing.hpp"
#include "cdss/transport.hpp"
#include "cdss/wire.hpp"

namespace cdss {

using SharedBitVector = std::vector<Share>;

inline constexpr Millis kDefaultTimeout = std::chrono::seconds(30);

// Max field elements per OPEN_BATCH frame; larger openings are chunked
// within the same round.
inline constexpr std::size_t kMaxElementsPerFrame = 4'000'000;

class ProtocolSession {
 public:
  ProtocolSession(const ProtocolConfig& cfg, int party, Channel& peer, TripleStore& store,
                  FieldElement alpha_share = {}, Millis timeout = kDefaultTimeout)
      : cfg_(cfg),
        party_(party),
        peer_(peer),
        store_(store),
        ops_(cfg.field, party, cfg.mode, alpha_share),
        timeout_(timeout) {
    cfg_.validate();
    if (party != 0 && party != 1) fail(ErrorKind::kConfigError, "party id must be 0 or 1");
  }

  const ProtocolConfig& config() const { return cfg_; }
  const Field& field() const { return cfg_.field; }
  const ShareArithmetic& ops() const { return ops_; }
  int party() const { return party_; }
  TripleStore& store() { return store_; }
  Channel& channel() { return peer_; }
  Millis timeout() const { return timeout_; }

  std::uint32_t rounds() const { return round_; }
  std::uint64_t opened_count() const { return opened_count_; }
  std::size_t mac_log_size() const { return mac_log_.size(); }

  // Test hook: the next open() adds `delta` to this party's outgoing share
  // at `index`, modelling a corrupted party.
  void inject_open_fault(std::size_t index, FieldElement delta = FieldElement(1)) {
    fault_index_ = index;
    fault_delta_ = delta;
  }

  // Test hook: sees every batch of opened (public) values.
  void set_open_observer(std::function<void(std::span<const FieldElement>)> observer) {
    observer_ = std::move(observer);
  }

  // Reveals a batch in one round: each party sends its value shares and adds
  // the peer's. In authenticated mode the opened values join the MAC log.
  std::vector<FieldElement> open(std::span<const Share> shares) {
    const Field& f = cfg_.field;
    const std::uint32_t round = round_++;
    const std::uint64_t tcur = store_.consumed().triples;
    const std::uint64_t bcur = store_.consumed().bits;
    const auto total = static_cast<std::uint32_t>(shares.size());

    std::vector<FieldElement> mine(shares.size());
    for (std::size_t i = 0; i < shares.size(); ++i) mine[i] = shares[i].value;
    if (fault_index_ && *fault_index_ < mine.size()) {
      mine[*fault_index_] = f.add(mine[*fault_index_], fault_delta_);
    }
    fault_index_.reset();

    std::exception_ptr send_error;
    std::thread sender([&] {
      try {
        std::size_t offset = 0;
        do {
          std::size_t n = std::min(kMaxElementsPerFrame, mine.size() - offset);
          ByteWriter w;
          w.reserve(32 + n * kElementBytes);
          w.u32(round);
          w.u64(tcur);
          w.u64(bcur);
          w.u32(total);
          w.u32(static_cast<std::uint32_t>(offset));
          w.u32(static_cast<std::uint32_t>(n));
          for (std::size_t i = 0; i < n; ++i) w.element(f, mine[offset + i]);
          peer_.send(MessageType::kOpenBatch, w.data());
          offset += n;
        } while (offset < mine.size());
      } catch (...) {
        send_error = std::current_exception();
      }
    });

    std::vector<FieldElement> out(shares.size());
    std::exception_ptr recv_error;
    try {
      std::size_t got = 0;
      do {
        Frame fr = peer_.expect(MessageType::kOpenBatch, timeout_);
        ByteReader r(fr.payload);
        std::uint32_t their_round = r.u32();
        std::uint64_t their_tcur = r.u64(), their_bcur = r.u64();
        std::uint32_t their_total = r.u32(), offset = r.u32(), n = r.u32();
        if (their_round != round || their_tcur != tcur || their_bcur != bcur ||
            their_total != total || offset != got || got + n > total) {
          fail(ErrorKind::kDesyncAbort,
               "open round " + std::to_string(round) + " out of step with peer (round " +
                   std::to_string(their_round) + ")");
        }
        for (std::uint32_t i = 0; i < n; ++i, ++got) {
          out[got] = f.add(mine[got], r.element(f));
        }
        r.expect_done("OPEN_BATCH");
      } while (got < total);
    } catch (...) {
      recv_error = std::current_exception();
    }
    sender.join();
    if (send_error) std::rethrow_exception(send_error);
    if (recv_error) std::rethrow_exception(recv_error);

    opened_count_ += out.size();
    if (observer_) observer_(out);
    if (cfg_.mode == Mode::kAuthenticated) {
      mac_log_.reserve(mac_log_.size() + out.size());
      for (std::size_t i = 0; i < out.size(); ++i) mac_log_.push_back({out[i], shares[i].mac});
    }
    return out;
  }

  FieldElement open(const Share& s) { return open(std::span(&s, 1))[0]; }

  // Batched Beaver multiplication: one round for all pairs, one triple each.
  std::vector<Share> mul(std::span<const Share> xs, std::span<const Share> ys) {
    if (xs.size() != ys.size()) fail(ErrorKind::kArityError, "mul: operand lengths differ");
    const std::size_t n = xs.size();
    if (n == 0) return {};
    std::vector<BeaverTriple> triples = store_.consume_triples(n);
    std::vector<Share> masked(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      masked[2 * i] = ops_.sub(xs[i], triples[i].a);
      masked[2 * i + 1] = ops_.sub(ys[i], triples[i].b);
    }
    std::vector<FieldElement> de = open(masked);
    const Field& f = cfg_.field;
    std::vector<Share> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      FieldElement d = de[2 * i], e = de[2 * i + 1];
      Share z = ops_.add(triples[i].c, ops_.scale(triples[i].b, d));
      z = ops_.add(z, ops_.scale(triples[i].a, e));
      out[i] = ops_.add_const(z, f.mul(d, e));
    }
    return out;
  }

  Share mul(const Share& x, const Share& y) { return mul(std::span(&x, 1), std::span(&y, 1))[0]; }

  std::vector<Share> take_bits(std::uint64_t k) { return store_.consume_bits(k); }

  // Batched MAC verification of everything opened since the last check.
  // Public coefficients come from a commit-reveal coin flip; each party then
  // commits to sigma_i = sum rho_k (mac_k - alpha_i * opened_k) and the
  // check passes iff sigma_0 + sigma_1 = 0. No-op in semi-honest mode.
  void mac_check() {
    if (cfg_.mode != Mode::kAuthenticated || mac_log_.empty()) {
      mac_log_.clear();
      return;
    }
    const Field& f = cfg_.field;
    Seed my_seed = rng_.next_seed();
    Bytes their_seed = commit_and_reveal(my_seed);
    if (their_seed.size() != my_seed.size()) fail(ErrorKind::kMacAbort, "bad coin share");
    Seed joint;
    for (std::size_t i = 0; i < joint.size(); ++i) joint[i] = my_seed[i] ^ their_seed[i];
    Csprng coins(joint);

    FieldElement sigma;
    for (const auto& [opened, mac] : mac_log_) {
      FieldElement rho = f.sample(coins);
      FieldElement term = f.sub(mac, f.mul(ops_.alpha_share(), opened));
      sigma = f.add(sigma, f.mul(rho, term));
    }
    mac_log_.clear();

    ByteWriter w;
    w.element(f, sigma);
    Bytes theirs = commit_and_reveal(w.data());
    ByteReader r(theirs);
    FieldElement their_sigma = r.element(f);
    if (!f.add(sigma, their_sigma).is_zero()) {
      fail(ErrorKind::kMacAbort, "MAC check failed; opened values were tampered with");
    }
  }

 private:
  // COMMIT then REVEAL exchange; returns the peer's verified payload.
  Bytes commit_and_reveal(std::span<const std::uint8_t> payload) {
    Commitment c = commit(payload, rng_);
    peer_.send(MessageType::kCommit, c.digest);
    Frame their_commit = peer_.expect(MessageType::kCommit, timeout_);
    if (their_commit.payload.size() != Digest{}.size()) {
      fail(ErrorKind::kMacAbort, "malformed commitment");
    }
    Digest digest;
    std::copy(their_commit.payload.begin(), their_commit.payload.end(), digest.begin());
    peer_.send(MessageType::kReveal, c.opening);
    Frame reveal = peer_.expect(MessageType::kReveal, timeout_);
    if (!verify_opening(digest, reveal.payload)) {
      fail(ErrorKind::kMacAbort, "commitment opening does not match");
    }
    auto p = opened_payload(reveal.payload);
    return Bytes(p.begin(), p.end());
  }

  ProtocolConfig cfg_;
  int party_;
  Channel& peer_;
  TripleStore& store_;
  ShareArithmetic ops_;
  Millis timeout_;
  Csprng rng_;
  std::uint32_t round_ = 0;
  std::uint64_t opened_count_ = 0;
  std::vector<std::pair<FieldElement, FieldElement>> mac_log_;
  std::optional<std::size_t> fault_index_;
  FieldElement fault_delta_{1};
  std::function<void(std::span<const FieldElement>)> observer_;
};

// a XOR b = a + b - 2ab for shared bits, batched; one triple per pair.
inline std::vector<Share> xor_shared(ProtocolSession& s, std::span<const Share> a,
                                     std::span<const Share> b) {
  std::vector<Share> prod = s.mul(a, b);
  const auto& ops = s.ops();
  FieldElement minus_two = s.field().from_int(-2);
  std::vector<Share> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = ops.add(ops.add(a[i], b[i]), ops.scale(prod[i], minus_two));
  }
  return out;
}

inline Share xor_shared(ProtocolSession& s, const Share& a, const Share& b) {
  return xor_shared(s, std::span(&a, 1), std::span(&b, 1))[0];
}

// Hamming distances between lhs[i] and rhs[i] for every i. All N*n XOR
// products share a single opening round.
inline std::vector<Share> hamming_distances(ProtocolSession& s,
                                            std::span<const SharedBitVector* const> lhs,
                                            std::span<const SharedBitVector* const> rhs) {
  if (lhs.size() != rhs.size()) fail(ErrorKind::kArityError, "hamming: batch sizes differ");
  std::vector<Share> xs, ys;
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    if (lhs[i]->size() != rhs[i]->size()) {
      fail(ErrorKind::kArityError, "hamming: bit vectors of length " +
                                       std::to_string(lhs[i]->size()) + " and " +
                                       std::to_string(rhs[i]->size()));
    }
    xs.insert(xs.end(), lhs[i]->begin(), lhs[i]->end());
    ys.insert(ys.end(), rhs[i]->begin(), rhs[i]->end());
    ends.push_back(xs.size());
  }
  std::vector<Share> x = xor_shared(s, xs, ys);
  std::vector<Share> out(lhs.size());
  std::size_t begin = 0;
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    for (std::size_t j = begin; j < ends[i]; ++j) out[i] = s.ops().add(out[i], x[j]);
    begin = ends[i];
  }
  return out;
}

inline Share hamming_distance(ProtocolSession& s, const SharedBitVector& q,
                              const SharedBitVector& v) {
  const SharedBitVector* l = &q;
  const SharedBitVector* r = &v;
  return hamming_distances(s, std::span(&l, 1), std::span(&r, 1))[0];
}

// [x_i < r_i] for public ell-bit x_i and shared bits r_i (LSB first, item i
// at r_bits[i*ell .. (i+1)*ell)). Prefix-OR of the differing positions from
// the MSB isolates the first difference; 2*ell - 1 triples per item and ell
// rounds in total.
inline std::vector<Share> bit_lt_public(ProtocolSession& s, std::span<const std::uint64_t> xs,
                                        std::span<const Share> r_bits, int ell) {
  const std::size_t n = xs.size();
  const auto l = static_cast<std::size_t>(ell);
  if (ell < 1 || r_bits.size() != n * l) fail(ErrorKind::kArityError, "bit_lt_public arity");
  const auto& ops = s.ops();
  const Field& f = s.field();
  s.store().require({n * (2 * l - 1), 0, 0});

  // d_j = x_j XOR r_j, linear because x_j is public.
  std::vector<Share> d(n * l);
  for (std::size_t i = 0; i < n; ++i) {
    if (ell < 64 && (xs[i] >> ell) != 0) fail(ErrorKind::kConfigError, "x exceeds ell bits");
    for (std::size_t j = 0; j < l; ++j) {
      const Share& r = r_bits[i * l + j];
      d[i * l + j] = ((xs[i] >> j) & 1) ? ops.add_const(ops.scale(r, f.from_int(-1)), f.one()) : r;
    }
  }

  // f_j = f_{j+1} OR d_j, from the MSB down; one layer per round.
  std::vector<Share> pre(n * l);
  for (std::size_t i = 0; i < n; ++i) pre[i * l + l - 1] = d[i * l + l - 1];
  std::vector<Share> a(n), b(n);
  for (std::size_t j = l - 1; j-- > 0;) {
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = pre[i * l + j + 1];
      b[i] = d[i * l + j];
    }
    std::vector<Share> ab = s.mul(a, b);
    for (std::size_t i = 0; i < n; ++i) pre[i * l + j] = ops.sub(ops.add(a[i], b[i]), ab[i]);
  }

  // w_j = f_j - f_{j+1} marks the most significant differing bit.
  std::vector<Share> w(n * l);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < l; ++j) {
      w[i * l + j] = j + 1 == l ? pre[i * l + j] : ops.sub(pre[i * l + j], pre[i * l + j + 1]);
    }
  }
  std::vector<Share> wr = s.mul(w, r_bits);
  std::vector<Share> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < l; ++j) out[i] = ops.add(out[i], wr[i * l + j]);
  }
  return out;
}

// Checks p > 2^(ell + kappa + 2), which keeps every masked opening below p.
inline void check_comparison_params(const ProtocolConfig& cfg, int ell) {
  if (ell < 1 || ell > 62) fail(ErrorKind::kConfigError, "comparison bit-length out of range");
  int need = ell + cfg.kappa + 2;
  if (need >= 127 || cfg.field.bit_length() <= need) {
    fail(ErrorKind::kConfigError, "modulus of " + std::to_string(cfg.field.bit_length()) +
                                      " bits too small for ell=" + std::to_string(ell) +
                                      ", kappa=" + std::to_string(cfg.kappa));
  }
}

// Shares of [h_i < threshold] for shared h_i in [0, 2^ell) and a public
// threshold in [0, 2^ell).
//
// With a = h - threshold + 2^ell, bit ell of a equals [h >= threshold]. The
// parties open z = a + r + 2^ell * r' for random shared bits r (ell bits)
// and r' (kappa bits); z hides a up to statistical distance 2^-kappa. Then
// a mod 2^ell = (z mod 2^ell) - r + 2^ell * [z mod 2^ell < r], and
// [h < threshold] = 1 - (a - a mod 2^ell) / 2^ell.
inline std::vector<Share> lt_public_threshold(ProtocolSession& s, std::span<const Share> h,
                                              std::uint64_t threshold, int ell) {
  const ProtocolConfig& cfg = s.config();
  check_comparison_params(cfg, ell);
  if (threshold >> ell) fail(ErrorKind::kConfigError, "threshold exceeds 2^ell - 1");
  const std::size_t n = h.size();
  if (n == 0) return {};
  const auto l = static_cast<std::size_t>(ell);
  const auto k = static_cast<std::size_t>(cfg.kappa);
  s.store().require({n * (2 * l - 1), n * (l + k), 0});

  const Field& f = s.field();
  const auto& ops = s.ops();
  const u128 two_l = u128{1} << ell;
  std::vector<Share> bits = s.take_bits(n * (l + k));

  std::vector<Share> a(n), r(n), masked(n);
  std::vector<Share> r_low(n * l);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = ops.add_const(h[i], f.reduce(two_l - threshold));
    Share r_sum, r_high;
    for (std::size_t j = 0; j < l; ++j) {
      const Share& b = bits[i * (l + k) + j];
      r_low[i * l + j] = b;
      r_sum = ops.add(r_sum, ops.scale(b, f.reduce(u128{1} << j)));
    }
    for (std::size_t j = 0; j < k; ++j) {
      r_high = ops.add(r_high, ops.scale(bits[i * (l + k) + l + j], f.reduce(u128{1} << j)));
    }
    r[i] = r_sum;
    masked[i] = ops.add(ops.add(a[i], r_sum), ops.scale(r_high, f.reduce(two_l)));
  }

  std::vector<FieldElement> z = s.open(masked);
  std::vector<std::uint64_t> z_low(n);
  for (std::size_t i = 0; i < n; ++i) z_low[i] = static_cast<std::uint64_t>(z[i].value() % two_l);

  std::vector<Share> borrow = bit_lt_public(s, z_low, r_low, ell);

  FieldElement neg_inv = f.neg(f.inv(f.reduce(two_l)));
  std::vector<Share> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Share t = ops.add_const(ops.add(a[i], r[i]), f.neg(FieldElement(z_low[i])));
    out[i] = ops.add(ops.add_const(ops.scale(t, neg_inv), f.one()), borrow[i]);
  }
  return out;
}

inline Share lt_public_threshold(ProtocolSession& s, const Share& h, std::uint64_t threshold,
                                 int ell) {
  return lt_public_threshold(s, std::span(&h, 1), threshold, ell)[0];
}

}  // namespace cdss

#endif  // CDSS_ENGINE_HPP_
