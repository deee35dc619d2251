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

// Query-latency sweep over synthetic databases, or synthetic database export.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "cdss/bench.hpp"
#include "cdss/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"MPC-CDSS scaling benchmark"};
  std::vector<std::uint64_t> sizes;
  std::uint32_t reps = 3;
  std::string config_path, out;
  std::uint64_t seed = 1, gen_db = 0;
  app.add_option("--sizes", sizes, "Database sizes")->delimiter(',');
  app.add_option("--reps", reps, "Queries per size")->check(CLI::PositiveNumber);
  std::uint32_t warmup = 1;
  app.add_option("--warmup", warmup, "Untimed queries per size before the timed ones");
  app.add_option("--config", config_path, "Deployment configuration")->required();
  app.add_option("--out", out, "Output CSV")->required();
  app.add_option("--seed", seed, "Synthetic data seed");
  app.add_option("--gen-db", gen_db, "Only write a synthetic record CSV of this many rows");
  CLI11_PARSE(app, argc, argv);

  try {
    cdss::DeploymentConfig cfg = cdss::load_config(config_path);
    std::ofstream file(out);
    if (!file) cdss::fail(cdss::ErrorKind::kConfigError, "cannot write " + out);

    if (gen_db > 0) {
      auto db = cdss::gen_synthetic_db(gen_db, cfg.n_bits, cfg.n_treatments, seed);
      file << cdss::records_to_csv(db);
      return 0;
    }
    if (sizes.empty()) sizes = {100, 500, 1000, 2000, 5000};

    cdss::SweepOptions opt;
    opt.sizes = sizes;
    opt.reps = reps;
    opt.warmup = warmup;
    opt.seed = seed;
    opt.on_row = [](const cdss::BenchRow& r) {
      std::cerr << "D=" << r.db_size << " rep " << r.rep << ": " << std::fixed
                << std::setprecision(1) << r.wall_millis << " ms, " << r.triples << " triples, "
                << r.bytes << " bytes\n";
    };
    auto rows = cdss::run_sweep(cfg, opt);
    cdss::write_bench_csv(file, rows);

    cdss::LinearFit fit = cdss::fit_rows(rows);
    std::cout << std::fixed << std::setprecision(4) << "wall_millis = " << fit.slope << " * D + "
              << fit.intercept << "   R^2 = " << fit.r_squared << "\n";
    std::map<std::uint64_t, double> mean;
    for (const auto& r : rows) mean[r.db_size] += r.wall_millis / reps;
    for (const auto& [d, ms] : mean) {
      if (mean.count(2 * d)) {
        std::cout << "D " << d << " -> " << 2 * d << ": time ratio " << mean[2 * d] / ms << "\n";
      }
    }
    return 0;
  } catch (const cdss::CdssError& e) {
    std::cerr << "bench: " << e.what() << "\n";
    return cdss::exit_code_for(e.kind());
  }
}
