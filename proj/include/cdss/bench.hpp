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

// Synthetic workloads and the query-latency sweep.
//
// Each database size in a sweep runs with its own dealing, two in-process
// parties on the loopback network and one client. Ingest is not timed.

#ifndef CDSS_BENCH_HPP_
#define CDSS_BENCH_HPP_

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "cdss/client.hpp"
#include "cdss/config.hpp"
#include "cdss/database.hpp"
#include "cdss/party.hpp"
#include "cdss/preprocessing.hpp"
#include "cdss/query.hpp"
#include "cdss/transport.hpp"

namespace cdss {

inline constexpr double kSyntheticBitDensity = 0.1;
inline constexpr std::int64_t kSyntheticTtfMin = 30;
inline constexpr std::int64_t kSyntheticTtfMax = 3650;

inline std::vector<PatientRecordPlain> gen_synthetic_db(std::size_t records, std::size_t n_bits,
                                                        std::size_t n_treatments,
                                                        std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::bernoulli_distribution bit(kSyntheticBitDensity);
  std::uniform_int_distribution<std::uint32_t> treatment(0,
                                                         static_cast<std::uint32_t>(n_treatments - 1));
  std::uniform_int_distribution<std::int64_t> ttf(kSyntheticTtfMin, kSyntheticTtfMax);
  std::vector<PatientRecordPlain> db(records);
  for (auto& r : db) {
    r.genotype.resize(n_bits);
    for (auto& b : r.genotype) b = bit(gen) ? 1 : 0;
    r.treatment_id = treatment(gen);
    r.ttf_days = ttf(gen);
  }
  return db;
}

struct BenchRow {
  std::uint64_t db_size = 0;
  std::uint32_t rep = 0;
  double wall_millis = 0;
  std::uint64_t triples = 0;
  std::uint64_t bytes = 0;
};

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    fail(ErrorKind::kBenchInvalid, "linear fit needs at least two points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) fail(ErrorKind::kBenchInvalid, "linear fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy == 0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

inline LinearFit fit_rows(const std::vector<BenchRow>& rows) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    x.push_back(static_cast<double>(r.db_size));
    y.push_back(r.wall_millis);
  }
  return linear_fit(x, y);
}

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "db_size,rep,wall_millis,triples,bytes\n";
  for (const auto& r : rows) {
    out << r.db_size << ',' << r.rep << ',' << r.wall_millis << ',' << r.triples << ','
        << r.bytes << '\n';
  }
}

// Two parties and their dealing, all in this process on a loopback network.
class LocalDeployment {
 public:
  LocalDeployment(DeploymentConfig cfg, const PreprocCounts& counts, std::filesystem::path dir,
                  spdlog::level::level_enum log_level = spdlog::level::warn,
                  spdlog::sink_ptr sink = nullptr)
      : cfg_(std::move(cfg)), dir_(std::move(dir)) {
    cfg_.party0 = "local-party0";
    cfg_.party1 = "local-party1";
    Csprng rng;
    deal_to_directory(counts, cfg_.protocol, rng, dir_);
    for (int i = 0; i < kNumParties; ++i) {
      std::string store = store_path(dir_, i);
      TripleStore ts = TripleStore::open_file(store, cfg_.protocol);
      FieldElement alpha{};
      if (cfg_.mode() == Mode::kAuthenticated) {
        alpha = load_mac_key_share(cfg_.field(), mac_key_path(store), ts.session_id(), i);
      }
      auto log = make_party_logger(i, sink);
      log->set_level(log_level);
      parties_[static_cast<std::size_t>(i)] = std::make_unique<PartyService>(
          cfg_, i, net_, i == 0 ? cfg_.party0 : cfg_.party1, cfg_.party0,
          ShareDatabase(cfg_.protocol, cfg_.n_bits, cfg_.n_treatments), std::move(ts), alpha,
          log);
    }
    for (auto& p : parties_) p->start();
    if (cfg_.mode() == Mode::kAuthenticated) {
      masks_ = ClientMasks::open_file(client_mask_path(dir_), cfg_.protocol);
    }
  }

  ~LocalDeployment() {
    stop();
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }

  void stop() {
    for (auto& p : parties_) {
      if (p) p->stop();
    }
  }

  // A client for `client_id`; all clients share the one mask file.
  ClinicianClient client(std::uint8_t client_id = 1) {
    DeploymentConfig c = cfg_;
    c.client_id = client_id;
    return ClinicianClient(c, net_, masks_ ? &*masks_ : nullptr);
  }

  PartyService& party(int i) { return *parties_[static_cast<std::size_t>(i)]; }
  ClientMasks* masks() { return masks_ ? &*masks_ : nullptr; }
  LoopbackNetwork& network() { return net_; }
  const DeploymentConfig& config() const { return cfg_; }

 private:
  DeploymentConfig cfg_;
  std::filesystem::path dir_;
  LoopbackNetwork net_;
  std::array<std::unique_ptr<PartyService>, kNumParties> parties_;
  std::optional<ClientMasks> masks_;
};

// Preprocessing for `records` records and `queries` queries against them.
inline PreprocCounts deployment_budget(const DeploymentConfig& cfg, std::uint64_t records,
                                       std::uint64_t queries) {
  PreprocCounts need = cfg.query_budget(records);
  need.triples *= queries;
  need.bits *= queries;
  need.masks = 0;
  if (cfg.mode() == Mode::kAuthenticated) {
    need.masks = masks_for_ingest(records, cfg.n_bits, cfg.n_treatments) +
                 queries * masks_for_query(cfg.n_bits);
  }
  return need;
}

inline std::filesystem::path fresh_temp_dir(const std::string& prefix) {
  Csprng rng;
  return std::filesystem::temp_directory_path() / (prefix + hex(random_id(rng)));
}

struct SweepOptions {
  std::vector<std::uint64_t> sizes;
  std::uint32_t reps = 3;
  std::uint32_t warmup = 1;  // untimed queries per size before the timed reps
  std::uint64_t seed = 1;
  std::filesystem::path work_dir;  // empty: fresh directory under the temp dir
  std::function<void(const BenchRow&)> on_row;
};

inline std::vector<BenchRow> run_sweep(const DeploymentConfig& base, const SweepOptions& opt) {
  if (opt.sizes.empty() || opt.reps == 0) fail(ErrorKind::kBenchInvalid, "nothing to run");
  const std::filesystem::path root =
      opt.work_dir.empty() ? fresh_temp_dir("cdss-bench-") : opt.work_dir;
  std::vector<BenchRow> rows;
  for (std::uint64_t d : opt.sizes) {
    DeploymentConfig cfg = base;
    const std::uint32_t total = opt.warmup + opt.reps;
    cfg.max_queries_per_client = total;
    LocalDeployment dep(cfg, deployment_budget(cfg, d, total), root / ("d" + std::to_string(d)));
    ClinicianClient client = dep.client();
    auto db = gen_synthetic_db(d, cfg.n_bits, cfg.n_treatments, opt.seed + d);
    client.ingest(db);

    std::mt19937_64 qgen(opt.seed ^ (d * 0x9e3779b97f4a7c15ULL));
    for (std::uint32_t w = 0; w < opt.warmup; ++w) {
      client.query(gen_synthetic_db(1, cfg.n_bits, cfg.n_treatments, qgen())[0].genotype);
    }
    for (std::uint32_t rep = 0; rep < opt.reps; ++rep) {
      Genotype q = gen_synthetic_db(1, cfg.n_bits, cfg.n_treatments, qgen())[0].genotype;
      auto t0 = std::chrono::steady_clock::now();
      QueryResultPlain got = client.query(q);
      auto t1 = std::chrono::steady_clock::now();
      if (got != plaintext_oracle(db, q, cfg.threshold_b, cfg.n_treatments)) {
        fail(ErrorKind::kBenchInvalid,
             "secure result differs from plaintext at D=" + std::to_string(d));
      }
      QueryStats st = dep.party(0).last_query_stats();
      if (st.consumed.triples != cfg.query_budget(d).triples) {
        fail(ErrorKind::kBenchInvalid, "triple consumption differs from budget");
      }
      BenchRow row;
      row.db_size = d;
      row.rep = rep;
      row.wall_millis = std::chrono::duration<double, std::milli>(t1 - t0).count();
      row.triples = st.consumed.triples;
      row.bytes = st.peer_bytes;
      if (opt.on_row) opt.on_row(row);
      rows.push_back(row);
    }
    client.close();
  }
  std::error_code ec;
  if (opt.work_dir.empty()) std::filesystem::remove_all(root, ec);
  return rows;
}

}  // namespace cdss

#endif  // CDSS_BENCH_HPP_
