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

// Deployment configuration shared by the dealer, both parties and clients.
//
// Line-based `key=value`; blank lines and `#` comments are ignored.
//
//   modulus=340282366920938463463374607431768211297
//   n_bits=128
//   n_treatments=16
//   threshold_b=20
//   kappa=40
//   mode=semi-honest            # or authenticated
//   max_queries_per_client=100
//   timeout_secs=30
//   party0=127.0.0.1:7000       # client-facing endpoints
//   party1=127.0.0.1:7001
//   client_id=1
//   mask_file=prep/client.masks # authenticated-mode clients only

#ifndef CDSS_CONFIG_HPP_
#define CDSS_CONFIG_HPP_

#include <chrono>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>

#include "cdss/engine.hpp"
#include "cdss/error.hpp"
#include "cdss/field.hpp"
#include "cdss/preprocessing.hpp"
#include "cdss/sharing.hpp"

namespace cdss {

struct DeploymentConfig {
  ProtocolConfig protocol{Field(kPrime128)};
  std::uint32_t n_bits = 128;
  std::uint32_t n_treatments = 16;
  std::uint64_t threshold_b = 20;
  std::uint64_t max_queries_per_client = 100;
  std::uint32_t timeout_secs = 30;
  std::string party0;
  std::string party1;
  std::uint8_t client_id = 0;
  std::string mask_file;
  int computational_security = 128;  // informational only

  const Field& field() const { return protocol.field; }
  Mode mode() const { return protocol.mode; }
  Millis timeout() const { return std::chrono::seconds(timeout_secs); }
  int ell() const { return comparison_bits(n_bits); }

  PreprocCounts query_budget(std::uint64_t records) const {
    return budget_for_query(records, n_bits, n_treatments, static_cast<std::uint64_t>(ell()),
                            static_cast<std::uint64_t>(protocol.kappa));
  }

  void validate() const {
    protocol.validate();
    if (n_bits < 1 || n_bits > 65535) fail(ErrorKind::kConfigError, "n_bits must be in [1, 65535]");
    if (n_treatments < 1 || n_treatments > 65535) {
      fail(ErrorKind::kConfigError, "n_treatments must be in [1, 65535]");
    }
    if (threshold_b > n_bits) fail(ErrorKind::kConfigError, "threshold_b must not exceed n_bits");
    if (timeout_secs < 1) fail(ErrorKind::kConfigError, "timeout_secs must be positive");
    check_comparison_params(protocol, ell());
  }
};

namespace detail {

inline std::uint64_t parse_uint(const std::string& key, const std::string& v,
                                std::uint64_t max) {
  u128 x = parse_u128(v);
  if (x > max) fail(ErrorKind::kConfigError, key + " out of range: " + v);
  return static_cast<std::uint64_t>(x);
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline Mode parse_mode(const std::string& v) {
  if (v == "semi-honest" || v == "semi_honest" || v == "semihonest") return Mode::kSemiHonest;
  if (v == "authenticated") return Mode::kAuthenticated;
  fail(ErrorKind::kConfigError, "mode must be semi-honest or authenticated, got '" + v + "'");
}

inline DeploymentConfig parse_config(std::istream& in) {
  DeploymentConfig c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kConfigError, "line " + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = detail::trim(line.substr(0, eq));
    std::string v = detail::trim(line.substr(eq + 1));
    try {
      if (key == "modulus") {
        c.protocol.field = Field(parse_u128(v));
      } else if (key == "n_bits") {
        c.n_bits = static_cast<std::uint32_t>(detail::parse_uint(key, v, 65535));
      } else if (key == "n_treatments") {
        c.n_treatments = static_cast<std::uint32_t>(detail::parse_uint(key, v, 65535));
      } else if (key == "threshold_b") {
        c.threshold_b = detail::parse_uint(key, v, 65535);
      } else if (key == "kappa") {
        c.protocol.kappa = static_cast<int>(detail::parse_uint(key, v, 120));
      } else if (key == "mode") {
        c.protocol.mode = parse_mode(v);
      } else if (key == "max_queries_per_client") {
        c.max_queries_per_client = detail::parse_uint(key, v, ~std::uint64_t{0});
      } else if (key == "timeout_secs") {
        c.timeout_secs = static_cast<std::uint32_t>(detail::parse_uint(key, v, 86400));
      } else if (key == "party0") {
        c.party0 = v;
      } else if (key == "party1") {
        c.party1 = v;
      } else if (key == "client_id") {
        c.client_id = static_cast<std::uint8_t>(detail::parse_uint(key, v, 255));
      } else if (key == "mask_file") {
        c.mask_file = v;
      } else if (key == "computational_security") {
        c.computational_security = static_cast<int>(detail::parse_uint(key, v, 1024));
      } else {
        fail(ErrorKind::kConfigError, "unknown key '" + key + "'");
      }
    } catch (const CdssError& e) {
      fail(ErrorKind::kConfigError, "line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  c.validate();
  return c;
}

inline DeploymentConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline DeploymentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kConfigError, "cannot read config file " + path);
  return parse_config(in);
}

}  // namespace cdss

#endif  // CDSS_CONFIG_HPP_
