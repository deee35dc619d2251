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

// Prime field Z_p for any prime p < 2^128.
//
// Elements are always stored fully reduced. Multiplication uses native
// 128-bit remainder when p < 2^64 and two-limb Montgomery multiplication
// otherwise. No constant-time guarantees are made.

#ifndef CDSS_FIELD_HPP_
#define CDSS_FIELD_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "cdss/error.hpp"
#include "cdss/random.hpp"

namespace cdss {

using u128 = unsigned __int128;

inline constexpr u128 kPrime128 = ~u128{0} - 158;  // 2^128 - 159
inline constexpr u128 kMersenne61 = (u128{1} << 61) - 1;
inline constexpr u128 kTinyPrime = 101;

inline constexpr std::size_t kElementBytes = 16;

inline constexpr std::uint64_t lo64(u128 x) { return static_cast<std::uint64_t>(x); }
inline constexpr std::uint64_t hi64(u128 x) { return static_cast<std::uint64_t>(x >> 64); }

inline int bit_length(u128 x) {
  if (x == 0) return 0;
  if (hi64(x) != 0) return 128 - __builtin_clzll(hi64(x));
  return 64 - __builtin_clzll(lo64(x));
}

inline std::string u128_to_string(u128 x) {
  if (x == 0) return "0";
  std::string s;
  while (x != 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(x % 10)));
    x /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

inline u128 parse_u128(std::string_view text) {
  if (text.empty()) fail(ErrorKind::kConfigError, "empty integer");
  u128 v = 0;
  for (char c : text) {
    if (c < '0' || c > '9') {
      fail(ErrorKind::kConfigError, "not a decimal integer: " + std::string(text));
    }
    const auto digit = static_cast<unsigned>(c - '0');
    if (v > (~u128{0} - digit) / 10) {
      fail(ErrorKind::kConfigError, "integer exceeds 128 bits: " + std::string(text));
    }
    v = v * 10 + digit;
  }
  return v;
}

class FieldElement {
 public:
  constexpr FieldElement() = default;
  // Caller guarantees value < p; use Field::reduce otherwise.
  explicit constexpr FieldElement(u128 value) : value_(value) {}

  constexpr u128 value() const { return value_; }
  constexpr bool is_zero() const { return value_ == 0; }

  friend constexpr bool operator==(FieldElement, FieldElement) = default;

 private:
  u128 value_ = 0;
};

class Field {
 public:
  // Verifies primality; throws ConfigError for composite or tiny moduli.
  explicit Field(u128 p) : Field(p, Unchecked{}) {
    if (!is_probable_prime(p)) {
      fail(ErrorKind::kConfigError, "modulus " + u128_to_string(p) + " is not prime");
    }
  }

  // Skips the primality check. Used by the primality test itself.
  static Field unchecked(u128 p) { return Field(p, Unchecked{}); }

  u128 modulus() const { return p_; }
  int bit_length() const { return bits_; }

  FieldElement zero() const { return FieldElement(0); }
  FieldElement one() const { return FieldElement(1); }

  FieldElement reduce(u128 v) const { return FieldElement(v % p_); }

  FieldElement from_int(std::int64_t v) const {
    if (v >= 0) return reduce(static_cast<u128>(v));
    return neg(reduce(static_cast<u128>(-(v + 1)) + 1));
  }

  FieldElement add(FieldElement a, FieldElement b) const {
    u128 s = a.value() + b.value();
    if (s < a.value() || s >= p_) s -= p_;
    return FieldElement(s);
  }

  FieldElement sub(FieldElement a, FieldElement b) const {
    u128 d = a.value() - b.value();
    if (a.value() < b.value()) d += p_;
    return FieldElement(d);
  }

  FieldElement neg(FieldElement a) const {
    return a.is_zero() ? a : FieldElement(p_ - a.value());
  }

  FieldElement mul(FieldElement a, FieldElement b) const {
    if (small_) return FieldElement((a.value() * b.value()) % p_);
    return FieldElement(mont_mul(mont_mul(a.value(), b.value()), r2_));
  }

  FieldElement pow(FieldElement base, u128 exponent) const {
    FieldElement result = one();
    if (p_ == 1) return zero();
    while (exponent != 0) {
      if (exponent & 1) result = mul(result, base);
      base = mul(base, base);
      exponent >>= 1;
    }
    return result;
  }

  FieldElement inv(FieldElement a) const {
    if (a.is_zero()) fail(ErrorKind::kDivisionByZero, "inverse of zero");
    return pow(a, p_ - 2);
  }

  // Uniform on [0, p): rejection sampling over the minimal number of bytes
  // covering p - 1, with the unused top bits masked off.
  FieldElement sample(Csprng& rng) const {
    for (;;) {
      std::array<std::uint8_t, 16> buf{};
      rng.fill(std::span(buf.data(), sample_bytes_));
      u128 v = 0;
      for (std::size_t i = sample_bytes_; i-- > 0;) v = (v << 8) | buf[i];
      v &= sample_mask_;
      if (v < p_) return FieldElement(v);
    }
  }

  void encode(FieldElement a, std::span<std::uint8_t, kElementBytes> out) const {
    u128 v = a.value();
    for (std::size_t i = 0; i < kElementBytes; ++i) {
      out[i] = static_cast<std::uint8_t>(v);
      v >>= 8;
    }
  }

  // Rejects non-canonical encodings (value >= p).
  FieldElement decode(std::span<const std::uint8_t, kElementBytes> in) const {
    u128 v = 0;
    for (std::size_t i = kElementBytes; i-- > 0;) v = (v << 8) | in[i];
    if (v >= p_) fail(ErrorKind::kFrameError, "non-canonical field element");
    return FieldElement(v);
  }

  friend bool operator==(const Field& a, const Field& b) { return a.p_ == b.p_; }

  // Deterministic Miller-Rabin below 2^64; otherwise the same fixed bases
  // followed by 40 random bases.
  static bool is_probable_prime(u128 n) {
    if (n < 2) return false;
    static constexpr std::uint64_t kBases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    for (std::uint64_t b : kBases) {
      if (n == b) return true;
      if (n % b == 0) return false;
    }
    Field f = unchecked(n);
    u128 d = n - 1;
    int s = 0;
    while ((d & 1) == 0) {
      d >>= 1;
      ++s;
    }
    auto witness = [&](u128 a) {
      FieldElement x = f.pow(FieldElement(a % n), d);
      if (x == f.one() || x == FieldElement(n - 1)) return false;
      for (int r = 1; r < s; ++r) {
        x = f.mul(x, x);
        if (x == FieldElement(n - 1)) return false;
      }
      return true;
    };
    for (std::uint64_t b : kBases) {
      if (witness(b)) return false;
    }
    if (hi64(n) == 0) return true;
    Csprng rng;
    for (int round = 0; round < 40; ++round) {
      u128 a = 2 + (f.sample(rng).value() % (n - 3));
      if (witness(a)) return false;
    }
    return true;
  }

 private:
  struct Unchecked {};

  Field(u128 p, Unchecked) : p_(p), bits_(cdss::bit_length(p)) {
    if (p < 2) fail(ErrorKind::kConfigError, "modulus must be at least 2");
    small_ = hi64(p) == 0;
    int sample_bits = cdss::bit_length(p - 1);
    if (sample_bits == 0) sample_bits = 1;
    sample_bytes_ = static_cast<std::size_t>((sample_bits + 7) / 8);
    sample_mask_ = sample_bits == 128 ? ~u128{0} : ((u128{1} << sample_bits) - 1);
    if (!small_) {
      // p is odd here (p >= 2^64). n0inv = -p^{-1} mod 2^64 by Newton iteration.
      std::uint64_t p0 = lo64(p);
      std::uint64_t inv = p0;
      for (int i = 0; i < 6; ++i) inv *= 2 - p0 * inv;
      n0inv_ = ~inv + 1;
      u128 r = (~p_ + 1) % p_;  // 2^128 mod p
      for (int i = 0; i < 128; ++i) r = add(FieldElement(r), FieldElement(r)).value();
      r2_ = r;
    }
  }

  // CIOS Montgomery product a*b*2^-128 mod p for a, b < p.
  u128 mont_mul(u128 a, u128 b) const {
    const std::uint64_t a0 = lo64(a), a1 = hi64(a);
    const std::uint64_t p0 = lo64(p_), p1 = hi64(p_);
    std::uint64_t t0 = 0, t1 = 0, t2 = 0;
    for (std::uint64_t bi : {lo64(b), hi64(b)}) {
      u128 acc = static_cast<u128>(a0) * bi + t0;
      t0 = lo64(acc);
      acc = static_cast<u128>(a1) * bi + t1 + hi64(acc);
      t1 = lo64(acc);
      acc = static_cast<u128>(t2) + hi64(acc);
      t2 = lo64(acc);
      std::uint64_t t3 = hi64(acc);

      std::uint64_t m = t0 * n0inv_;
      acc = static_cast<u128>(m) * p0 + t0;
      acc = static_cast<u128>(m) * p1 + t1 + hi64(acc);
      t0 = lo64(acc);
      acc = static_cast<u128>(t2) + hi64(acc);
      t1 = lo64(acc);
      t2 = t3 + hi64(acc);
    }
    u128 r = (static_cast<u128>(t1) << 64) | t0;
    if (t2 != 0 || r >= p_) r -= p_;
    return r;
  }

  u128 p_;
  int bits_;
  bool small_ = true;
  std::size_t sample_bytes_ = 1;
  u128 sample_mask_ = 0;
  std::uint64_t n0inv_ = 0;
  u128 r2_ = 0;
};

}  // namespace cdss

#endif  // CDSS_FIELD_HPP_
