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

// Hash commitments: SHA-256(nonce || payload) with a 32-byte random nonce.

#ifndef CDSS_COMMITMENT_HPP_
#define CDSS_COMMITMENT_HPP_

#include <openssl/sha.h>

#include <array>
#include <cstdint>
#include <span>

#include "cdss/random.hpp"
#include "cdss/wire.hpp"

namespace cdss {

using Digest = std::array<std::uint8_t, SHA256_DIGEST_LENGTH>;
inline constexpr std::size_t kNonceBytes = 32;

inline Digest sha256(std::span<const std::uint8_t> data) {
  Digest d;
  SHA256(data.data(), data.size(), d.data());
  return d;
}

struct Commitment {
  Digest digest;
  Bytes opening;  // nonce || payload
};

inline Commitment commit(std::span<const std::uint8_t> payload, Csprng& rng) {
  Commitment c;
  c.opening.resize(kNonceBytes);
  rng.fill(c.opening);
  c.opening.insert(c.opening.end(), payload.begin(), payload.end());
  c.digest = sha256(c.opening);
  return c;
}

// True iff `opening` (nonce || payload) hashes to `digest`.
inline bool verify_opening(const Digest& digest, std::span<const std::uint8_t> opening) {
  return opening.size() >= kNonceBytes && sha256(opening) == digest;
}

inline std::span<const std::uint8_t> opened_payload(std::span<const std::uint8_t> opening) {
  return opening.subspan(kNonceBytes);
}

}  // namespace cdss

#endif  // CDSS_COMMITMENT_HPP_
