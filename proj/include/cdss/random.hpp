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

#ifndef CDSS_RANDOM_HPP_
#define CDSS_RANDOM_HPP_

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <memory>
#include <span>
#include <stdexcept>

namespace cdss {

using Seed = std::array<std::uint8_t, 32>;

inline Seed os_random_seed() {
  Seed seed;
  if (RAND_bytes(seed.data(), static_cast<int>(seed.size())) != 1) {
    throw std::runtime_error("RAND_bytes failed");
  }
  return seed;
}

// AES-256-CTR keystream generator. Seeded from the OS by default; an explicit
// seed gives a reproducible stream (tests, public coin expansion).
class Csprng {
 public:
  Csprng() : Csprng(os_random_seed()) {}

  explicit Csprng(const Seed& seed) : ctx_(EVP_CIPHER_CTX_new()) {
    if (!ctx_) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
    std::array<std::uint8_t, 16> iv{};
    if (EVP_EncryptInit_ex(ctx_.get(), EVP_aes_256_ctr(), nullptr, seed.data(),
                           iv.data()) != 1) {
      throw std::runtime_error("EVP_EncryptInit_ex failed");
    }
  }

  Csprng(Csprng&&) noexcept = default;
  Csprng& operator=(Csprng&&) noexcept = default;

  void fill(std::span<std::uint8_t> out) {
    while (!out.empty()) {
      if (pos_ == buffer_.size()) refill();
      std::size_t n = std::min(out.size(), buffer_.size() - pos_);
      std::memcpy(out.data(), buffer_.data() + pos_, n);
      pos_ += n;
      out = out.subspan(n);
    }
  }

  std::uint64_t next_u64() {
    std::uint64_t v;
    fill({reinterpret_cast<std::uint8_t*>(&v), sizeof(v)});
    return v;
  }

  Seed next_seed() {
    Seed s;
    fill(s);
    return s;
  }

 private:
  struct CtxDeleter {
    void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
  };

  void refill() {
    static const std::array<std::uint8_t, 4096> kZeros{};
    int len = 0;
    if (EVP_EncryptUpdate(ctx_.get(), buffer_.data(), &len, kZeros.data(),
                          static_cast<int>(kZeros.size())) != 1) {
      throw std::runtime_error("EVP_EncryptUpdate failed");
    }
    pos_ = 0;
  }

  std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter> ctx_;
  std::array<std::uint8_t, 4096> buffer_{};
  std::size_t pos_ = 4096;
};

}  // namespace cdss

#endif  // CDSS_RANDOM_HPP_
