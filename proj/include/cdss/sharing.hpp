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

// Two-party additive secret sharing over Z_p with optional SPDZ-style MACs.

#ifndef CDSS_SHARING_HPP_
#define CDSS_SHARING_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "cdss/error.hpp"
#include "cdss/field.hpp"
#include "cdss/random.hpp"

namespace cdss {

enum class Mode : std::uint8_t { kSemiHonest = 0, kAuthenticated = 1 };

inline std::string mode_name(Mode m) {
  return m == Mode::kAuthenticated ? "authenticated" : "semi-honest";
}

inline constexpr int kNumParties = 2;

// One party's share of a secret. `mac` is meaningful only in authenticated
// mode and stays zero (and is never serialized) in semi-honest mode.
struct Share {
  FieldElement value;
  FieldElement mac;

  friend bool operator==(const Share&, const Share&) = default;
};

using SharePair = std::array<Share, kNumParties>;

// Known in full only to the dealer; each party receives alpha_shares[id].
struct GlobalMacKey {
  std::array<FieldElement, kNumParties> alpha_shares;

  FieldElement alpha(const Field& f) const { return f.add(alpha_shares[0], alpha_shares[1]); }

  static GlobalMacKey generate(const Field& f, Csprng& rng) {
    return {{f.sample(rng), f.sample(rng)}};
  }
};

struct ProtocolConfig {
  Field field = Field(kMersenne61);
  Mode mode = Mode::kSemiHonest;
  int kappa = 40;
  int n_parties = kNumParties;
  int corruption_tolerance = 1;

  void validate() const {
    if (n_parties != kNumParties) {
      fail(ErrorKind::kConfigError, "only two computing parties are supported");
    }
    if (corruption_tolerance < 0 || corruption_tolerance >= n_parties) {
      fail(ErrorKind::kConfigError, "corruption tolerance must satisfy t < n");
    }
    if (kappa < 1) fail(ErrorKind::kConfigError, "kappa must be at least 1");
  }
};

inline std::array<FieldElement, kNumParties> share_secret(const Field& f, FieldElement x,
                                                          Csprng& rng) {
  FieldElement s0 = f.sample(rng);
  return {s0, f.sub(x, s0)};
}

inline FieldElement reconstruct(const Field& f, FieldElement s0, FieldElement s1) {
  return f.add(s0, s1);
}

inline FieldElement reconstruct(const Field& f, const SharePair& pair) {
  return f.add(pair[0].value, pair[1].value);
}

inline FieldElement reconstruct_mac(const Field& f, const SharePair& pair) {
  return f.add(pair[0].mac, pair[1].mac);
}

// Dealer-side only: requires the full MAC key.
inline SharePair share_authenticated(const ProtocolConfig& cfg, FieldElement x,
                                     const GlobalMacKey& key, Csprng& rng) {
  if (cfg.mode != Mode::kAuthenticated) {
    fail(ErrorKind::kModeMismatch, "authenticated sharing requested in semi-honest mode");
  }
  const Field& f = cfg.field;
  auto values = share_secret(f, x, rng);
  auto macs = share_secret(f, f.mul(key.alpha(f), x), rng);
  return {Share{values[0], macs[0]}, Share{values[1], macs[1]}};
}

// Shares for either mode: MACs are produced only when authenticated.
inline SharePair share_for_mode(const ProtocolConfig& cfg, FieldElement x,
                                const GlobalMacKey& key, Csprng& rng) {
  if (cfg.mode == Mode::kAuthenticated) return share_authenticated(cfg, x, key, rng);
  auto values = share_secret(cfg.field, x, rng);
  return {Share{values[0], {}}, Share{values[1], {}}};
}

// Local (communication-free) affine operations on one party's shares.
// Party 0 absorbs public constants into its value share; both parties add
// const * alpha_share to their MAC share.
class ShareArithmetic {
 public:
  ShareArithmetic(const Field& field, int party, Mode mode, FieldElement alpha_share)
      : f_(field), party_(party), authenticated_(mode == Mode::kAuthenticated),
        alpha_share_(alpha_share) {}

  const Field& field() const { return f_; }
  int party() const { return party_; }
  bool authenticated() const { return authenticated_; }
  FieldElement alpha_share() const { return alpha_share_; }

  Share add(const Share& a, const Share& b) const {
    return {f_.add(a.value, b.value), authenticated_ ? f_.add(a.mac, b.mac) : FieldElement{}};
  }

  Share sub(const Share& a, const Share& b) const {
    return {f_.sub(a.value, b.value), authenticated_ ? f_.sub(a.mac, b.mac) : FieldElement{}};
  }

  Share scale(const Share& a, FieldElement c) const {
    return {f_.mul(a.value, c), authenticated_ ? f_.mul(a.mac, c) : FieldElement{}};
  }

  Share add_const(const Share& a, FieldElement c) const {
    Share r = a;
    if (party_ == 0) r.value = f_.add(r.value, c);
    if (authenticated_) r.mac = f_.add(r.mac, f_.mul(c, alpha_share_));
    return r;
  }

  // Share of a public constant.
  Share constant(FieldElement c) const { return add_const(Share{}, c); }

  Share linear_combine(std::span<const Share> shares, std::span<const FieldElement> coeffs,
                       FieldElement constant_term) const {
    if (shares.size() != coeffs.size()) {
      fail(ErrorKind::kArityError, "linear_combine: " + std::to_string(shares.size()) +
                                       " shares vs " + std::to_string(coeffs.size()) +
                                       " coefficients");
    }
    Share acc;
    for (std::size_t j = 0; j < shares.size(); ++j) acc = add(acc, scale(shares[j], coeffs[j]));
    return add_const(acc, constant_term);
  }

 private:
  Field f_;
  int party_;
  bool authenticated_;
  FieldElement alpha_share_;
};

}  // namespace cdss

#endif  // CDSS_SHARING_HPP_
