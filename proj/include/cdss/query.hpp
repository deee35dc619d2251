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

// The similarity query: for a query genotype q and public threshold B,
// per treatment t
//   count_t = |{i : H(q, v_i) < B, tr_i = t}|
//   sum_t   = sum of ttf_i over the same set
// and the average time-to-treatment-failure sum_t / count_t, which exists
// only when count_t > 0.

#ifndef CDSS_QUERY_HPP_
#define CDSS_QUERY_HPP_

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cdss/engine.hpp"
#include "cdss/error.hpp"
#include "cdss/field.hpp"
#include "cdss/preprocessing.hpp"
#include "cdss/sharing.hpp"

namespace cdss {

inline constexpr std::uint32_t kTtfMax = 100'000;

using Genotype = std::vector<std::uint8_t>;  // one 0/1 entry per position

struct PatientRecordPlain {
  Genotype genotype;
  std::uint32_t treatment_id = 0;
  std::int64_t ttf_days = 0;

  friend bool operator==(const PatientRecordPlain&, const PatientRecordPlain&) = default;
};

struct SharedPatientRecord {
  SharedBitVector genotype;
  std::vector<Share> onehot;
  std::vector<Share> ttf_onehot;

  friend bool operator==(const SharedPatientRecord&, const SharedPatientRecord&) = default;
};

inline void validate_record(const PatientRecordPlain& r, std::size_t n_bits,
                            std::size_t n_treatments) {
  if (r.genotype.size() != n_bits) {
    fail(ErrorKind::kValidationError, "genotype has " + std::to_string(r.genotype.size()) +
                                          " bits, expected " + std::to_string(n_bits));
  }
  for (auto b : r.genotype) {
    if (b > 1) fail(ErrorKind::kValidationError, "genotype entries must be 0 or 1");
  }
  if (r.treatment_id >= n_treatments) {
    fail(ErrorKind::kValidationError, "treatment_id " + std::to_string(r.treatment_id) +
                                          " outside [0, " + std::to_string(n_treatments) + ")");
  }
  if (r.ttf_days < 0 || r.ttf_days > kTtfMax) {
    fail(ErrorKind::kValidationError, "ttf_days " + std::to_string(r.ttf_days) +
                                          " outside [0, " + std::to_string(kTtfMax) + "]");
  }
}

inline Genotype parse_genotype(std::string_view bits, std::size_t n_bits) {
  if (bits.size() != n_bits) {
    fail(ErrorKind::kValidationError, "genotype has " + std::to_string(bits.size()) +
                                          " characters, expected " + std::to_string(n_bits));
  }
  Genotype g(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != '0' && bits[i] != '1') {
      fail(ErrorKind::kValidationError, "genotype must consist of '0' and '1'");
    }
    g[i] = bits[i] == '1';
  }
  return g;
}

inline std::string genotype_string(const Genotype& g) {
  std::string s(g.size(), '0');
  for (std::size_t i = 0; i < g.size(); ++i) s[i] = g[i] ? '1' : '0';
  return s;
}

// Bit j is set iff mutation position j is present.
inline Genotype encode_genotype(const std::set<std::int64_t>& positions, std::size_t n_bits) {
  Genotype g(n_bits, 0);
  for (auto p : positions) {
    if (p < 0 || static_cast<std::size_t>(p) >= n_bits) {
      fail(ErrorKind::kValidationError, "mutation position " + std::to_string(p) +
                                            " outside [0, " + std::to_string(n_bits) + ")");
    }
    g[static_cast<std::size_t>(p)] = 1;
  }
  return g;
}

inline std::uint64_t plain_hamming(const Genotype& a, const Genotype& b) {
  std::uint64_t h = 0;
  for (std::size_t i = 0; i < a.size(); ++i) h += a[i] != b[i];
  return h;
}

// The values a client secret-shares for one record, in wire order:
// N genotype bits, T one-hot treatment bits, T one-hot-scaled TTFs.
inline std::vector<FieldElement> expand_record(const Field& f, const PatientRecordPlain& r,
                                               std::size_t n_treatments) {
  std::vector<FieldElement> v;
  v.reserve(r.genotype.size() + 2 * n_treatments);
  for (auto b : r.genotype) v.push_back(FieldElement(b));
  for (std::size_t t = 0; t < n_treatments; ++t) v.push_back(FieldElement(t == r.treatment_id));
  for (std::size_t t = 0; t < n_treatments; ++t) {
    v.push_back(t == r.treatment_id ? f.reduce(static_cast<u128>(r.ttf_days)) : f.zero());
  }
  return v;
}

inline SharedPatientRecord assemble_record(std::span<const Share> flat, std::size_t n_bits,
                                           std::size_t n_treatments) {
  if (flat.size() != n_bits + 2 * n_treatments) {
    fail(ErrorKind::kArityError, "record share vector has wrong length");
  }
  SharedPatientRecord r;
  r.genotype.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n_bits));
  r.onehot.assign(flat.begin() + static_cast<std::ptrdiff_t>(n_bits),
                  flat.begin() + static_cast<std::ptrdiff_t>(n_bits + n_treatments));
  r.ttf_onehot.assign(flat.begin() + static_cast<std::ptrdiff_t>(n_bits + n_treatments),
                      flat.end());
  return r;
}

// Dealer-style sharing of a whole record (used by tests and tooling that
// hold the MAC key; clients use the input-mask path instead).
inline std::array<SharedPatientRecord, kNumParties> share_record(
    const ProtocolConfig& cfg, const PatientRecordPlain& r, std::size_t n_treatments,
    const GlobalMacKey& key, Csprng& rng) {
  std::array<std::vector<Share>, kNumParties> flat;
  for (FieldElement x : expand_record(cfg.field, r, n_treatments)) {
    SharePair p = share_for_mode(cfg, x, key, rng);
    flat[0].push_back(p[0]);
    flat[1].push_back(p[1]);
  }
  return {assemble_record(flat[0], r.genotype.size(), n_treatments),
          assemble_record(flat[1], r.genotype.size(), n_treatments)};
}

inline std::array<SharedBitVector, kNumParties> share_bits(const ProtocolConfig& cfg,
                                                           const Genotype& g,
                                                           const GlobalMacKey& key, Csprng& rng) {
  std::array<SharedBitVector, kNumParties> out;
  for (auto b : g) {
    SharePair p = share_for_mode(cfg, FieldElement(b), key, rng);
    out[0].push_back(p[0]);
    out[1].push_back(p[1]);
  }
  return out;
}

struct QueryShares {
  std::vector<Share> sums;
  std::vector<Share> counts;
};

// Joint evaluation over this party's shares. Per record: Hamming distance to
// the query, a similarity bit [H < B], and the similarity bit multiplied into
// the one-hot and TTF-one-hot vectors. Each layer is one batched round over
// the whole database; only comparison masks and Beaver differences are
// opened. Consumes exactly budget_for_query(D, N, T, ell, kappa), and checks
// the budget before consuming anything.
inline QueryShares evaluate_query(ProtocolSession& s, std::span<const SharedPatientRecord> db,
                                  const SharedBitVector& q, std::uint64_t threshold,
                                  std::size_t n_treatments) {
  const std::size_t n_bits = q.size();
  for (const auto& r : db) {
    if (r.genotype.size() != n_bits || r.onehot.size() != n_treatments ||
        r.ttf_onehot.size() != n_treatments) {
      fail(ErrorKind::kArityError, "record shape does not match query configuration");
    }
  }
  QueryShares out{std::vector<Share>(n_treatments), std::vector<Share>(n_treatments)};
  if (db.empty()) return out;

  const int ell = comparison_bits(n_bits);
  check_comparison_params(s.config(), ell);
  if (threshold > n_bits) fail(ErrorKind::kConfigError, "threshold exceeds genotype length");
  s.store().require(budget_for_query(db.size(), n_bits, n_treatments,
                                     static_cast<std::uint64_t>(ell),
                                     static_cast<std::uint64_t>(s.config().kappa)));

  std::vector<const SharedBitVector*> lhs(db.size(), &q), rhs(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) rhs[i] = &db[i].genotype;
  std::vector<Share> dist = hamming_distances(s, lhs, rhs);
  std::vector<Share> similar = lt_public_threshold(s, dist, threshold, ell);

  const std::size_t per = 2 * n_treatments;
  std::vector<Share> xs(db.size() * per), ys(db.size() * per);
  for (std::size_t i = 0; i < db.size(); ++i) {
    for (std::size_t t = 0; t < n_treatments; ++t) {
      xs[i * per + t] = similar[i];
      ys[i * per + t] = db[i].onehot[t];
      xs[i * per + n_treatments + t] = similar[i];
      ys[i * per + n_treatments + t] = db[i].ttf_onehot[t];
    }
  }
  std::vector<Share> prod = s.mul(xs, ys);
  const auto& ops = s.ops();
  for (std::size_t i = 0; i < db.size(); ++i) {
    for (std::size_t t = 0; t < n_treatments; ++t) {
      out.counts[t] = ops.add(out.counts[t], prod[i * per + t]);
      out.sums[t] = ops.add(out.sums[t], prod[i * per + n_treatments + t]);
    }
  }
  return out;
}

struct TreatmentStat {
  std::uint64_t count = 0;
  std::uint64_t sum_ttf = 0;

  bool has_average() const { return count != 0; }
  std::optional<double> average() const {
    if (count == 0) return std::nullopt;
    return static_cast<double>(sum_ttf) / static_cast<double>(count);
  }

  // Exact sum/count rounded half-up to one decimal place; empty when absent.
  std::string average_text() const {
    if (count == 0) return {};
    u128 tenths = (u128{sum_ttf} * 20 + count) / (u128{count} * 2);
    return u128_to_string(tenths / 10) + "." + u128_to_string(tenths % 10);
  }

  friend bool operator==(const TreatmentStat&, const TreatmentStat&) = default;
};

struct QueryResultPlain {
  std::vector<TreatmentStat> treatments;

  friend bool operator==(const QueryResultPlain&, const QueryResultPlain&) = default;
};

// Plaintext reference for evaluate_query; no cryptography.
inline QueryResultPlain plaintext_oracle(std::span<const PatientRecordPlain> db, const Genotype& q,
                                         std::uint64_t threshold, std::size_t n_treatments) {
  QueryResultPlain out;
  out.treatments.resize(n_treatments);
  for (const auto& r : db) {
    validate_record(r, q.size(), n_treatments);
    if (plain_hamming(q, r.genotype) < threshold) {
      auto& st = out.treatments[r.treatment_id];
      st.count += 1;
      st.sum_ttf += static_cast<std::uint64_t>(r.ttf_days);
    }
  }
  return out;
}

// One party's RESULT_SHARE contents.
struct ResultShare {
  Id128 query_id{};
  std::uint64_t record_count = 0;
  std::vector<FieldElement> sums;
  std::vector<FieldElement> counts;

  Bytes encode(const Field& f) const {
    ByteWriter w;
    w.bytes(query_id);
    w.u16(static_cast<std::uint16_t>(sums.size()));
    w.u64(record_count);
    for (std::size_t t = 0; t < sums.size(); ++t) {
      w.element(f, sums[t]);
      w.element(f, counts[t]);
    }
    return w.take();
  }

  static ResultShare decode(const Field& f, std::span<const std::uint8_t> payload) {
    ByteReader r(payload);
    ResultShare s;
    s.query_id = r.fixed<16>();
    std::uint16_t t = r.u16();
    s.record_count = r.u64();
    for (std::uint16_t i = 0; i < t; ++i) {
      s.sums.push_back(r.element(f));
      s.counts.push_back(r.element(f));
    }
    r.expect_done("RESULT_SHARE");
    return s;
  }
};

// Client-side reconstruction with plausibility bounds: count_t <= D and
// sum_t <= D * TTF_MAX, which a correct run always satisfies.
inline QueryResultPlain finalize_result(const Field& f, const ResultShare& a, const ResultShare& b,
                                        const Id128& query_id, std::size_t n_treatments) {
  if (a.query_id != query_id || b.query_id != query_id) {
    fail(ErrorKind::kProtocolError, "result share for a different query");
  }
  if (a.sums.size() != n_treatments || b.sums.size() != n_treatments) {
    fail(ErrorKind::kProtocolError, "result share has wrong treatment count");
  }
  if (a.record_count != b.record_count) {
    fail(ErrorKind::kIntegrityError, "parties disagree on database size");
  }
  const u128 d = a.record_count;
  QueryResultPlain out;
  out.treatments.resize(n_treatments);
  for (std::size_t t = 0; t < n_treatments; ++t) {
    u128 count = f.add(a.counts[t], b.counts[t]).value();
    u128 sum = f.add(a.sums[t], b.sums[t]).value();
    if (count > d || sum > d * kTtfMax) {
      fail(ErrorKind::kIntegrityError, "treatment " + std::to_string(t) +
                                           " reconstructs outside plausible bounds");
    }
    out.treatments[t] = {static_cast<std::uint64_t>(count), static_cast<std::uint64_t>(sum)};
  }
  return out;
}

// Longest average first; treatments without data last; ties by id.
inline std::vector<std::uint32_t> rank_treatments(const QueryResultPlain& r) {
  std::vector<std::uint32_t> ids(r.treatments.size());
  for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
  std::stable_sort(ids.begin(), ids.end(), [&](std::uint32_t x, std::uint32_t y) {
    const auto& a = r.treatments[x];
    const auto& b = r.treatments[y];
    if (a.has_average() != b.has_average()) return a.has_average();
    if (!a.has_average()) return x < y;
    // Compare sum_a/count_a > sum_b/count_b exactly.
    u128 lhs = u128{a.sum_ttf} * b.count, rhs = u128{b.sum_ttf} * a.count;
    if (lhs != rhs) return lhs > rhs;
    return x < y;
  });
  return ids;
}

inline std::string render_table(const QueryResultPlain& r) {
  std::ostringstream os;
  os << "treatment_id  count  avg_ttf_days\n";
  for (std::uint32_t t : rank_treatments(r)) {
    const auto& st = r.treatments[t];
    std::string id = std::to_string(t), count = std::to_string(st.count);
    std::string avg = st.has_average() ? st.average_text() : "no data";
    os << id << std::string(14 - std::min<std::size_t>(13, id.size()), ' ') << count
       << std::string(7 - std::min<std::size_t>(6, count.size()), ' ') << avg << '\n';
  }
  return os.str();
}

inline std::string render_csv(const QueryResultPlain& r) {
  std::ostringstream os;
  os << "treatment_id,count,sum_ttf,avg_ttf\n";
  for (std::uint32_t t : rank_treatments(r)) {
    const auto& st = r.treatments[t];
    os << t << ',' << st.count << ',' << st.sum_ttf << ',' << st.average_text() << '\n';
  }
  return os.str();
}

// PatientRecordFile: CSV with header `genotype,treatment_id,ttf_days`.
// Every row is validated before anything is returned; errors name the line.
inline std::vector<PatientRecordPlain> parse_record_csv(std::istream& in, std::size_t n_bits,
                                                        std::size_t n_treatments) {
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    return s;
  };
  if (!std::getline(in, line) || trim(line) != "genotype,treatment_id,ttf_days") {
    fail(ErrorKind::kValidationError, "line 1: expected header genotype,treatment_id,ttf_days");
  }
  ++line_no;
  std::vector<PatientRecordPlain> out;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    try {
      std::vector<std::string> cols;
      std::stringstream ss(line);
      std::string c;
      while (std::getline(ss, c, ',')) cols.push_back(trim(c));
      if (cols.size() != 3) fail(ErrorKind::kValidationError, "expected 3 columns");
      PatientRecordPlain r;
      r.genotype = parse_genotype(cols[0], n_bits);
      std::size_t pos = 0;
      long long tr = std::stoll(cols[1], &pos);
      if (pos != cols[1].size() || tr < 0 || tr > 65535) {
        fail(ErrorKind::kValidationError, "bad treatment_id '" + cols[1] + "'");
      }
      r.treatment_id = static_cast<std::uint32_t>(tr);
      long long ttf = std::stoll(cols[2], &pos);
      if (pos != cols[2].size()) fail(ErrorKind::kValidationError, "bad ttf_days");
      r.ttf_days = ttf;
      validate_record(r, n_bits, n_treatments);
      out.push_back(std::move(r));
    } catch (const CdssError& e) {
      fail(ErrorKind::kValidationError, "line " + std::to_string(line_no) + ": " + e.detail());
    } catch (const std::logic_error&) {
      fail(ErrorKind::kValidationError, "line " + std::to_string(line_no) + ": not a number");
    }
  }
  return out;
}

inline std::string records_to_csv(std::span<const PatientRecordPlain> records) {
  std::ostringstream os;
  os << "genotype,treatment_id,ttf_days\n";
  for (const auto& r : records) {
    os << genotype_string(r.genotype) << ',' << r.treatment_id << ',' << r.ttf_days << '\n';
  }
  return os.str();
}

}  // namespace cdss

#endif  // CDSS_QUERY_HPP_
