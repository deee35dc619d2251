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

// Clinician tool: upload patient records, or query by genotype.

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cdss/client.hpp"
#include "cdss/config.hpp"
#include "cdss/preprocessing.hpp"
#include "cdss/query.hpp"
#include "cdss/transport.hpp"

namespace {

std::set<std::int64_t> parse_positions(const std::string& list) {
  std::set<std::int64_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::logic_error&) {
      pos = 0;
    }
    if (pos != item.size()) {
      cdss::fail(cdss::ErrorKind::kValidationError, "bad mutation position '" + item + "'");
    }
    out.insert(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MPC-CDSS clinician client"};
  app.require_subcommand(1);
  std::string config_path, file, genotype, mutations;
  bool csv = false;

  auto* ingest = app.add_subcommand("ingest", "Secret-share and upload a patient record CSV");
  ingest->add_option("--file", file, "CSV with header genotype,treatment_id,ttf_days")
      ->required();
  ingest->add_option("--config", config_path, "Deployment configuration")->required();

  auto* query = app.add_subcommand("query", "Rank treatments for a genotype");
  auto* g = query->add_option("--genotype", genotype, "Bit string of length n_bits");
  auto* m = query->add_option("--mutations", mutations, "Comma-separated mutation positions");
  g->excludes(m);
  query->add_flag("--csv", csv, "Machine-readable output");
  query->add_option("--config", config_path, "Deployment configuration")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    cdss::DeploymentConfig cfg = cdss::load_config(config_path);
    std::optional<cdss::ClientMasks> masks;
    if (cfg.mode() == cdss::Mode::kAuthenticated) {
      if (cfg.mask_file.empty()) {
        cdss::fail(cdss::ErrorKind::kConfigError, "mask_file is required in authenticated mode");
      }
      masks = cdss::ClientMasks::open_file(cfg.mask_file, cfg.protocol);
    }
    cdss::TcpNetwork net;

    if (*ingest) {
      std::ifstream in(file);
      if (!in) cdss::fail(cdss::ErrorKind::kValidationError, "cannot read " + file);
      auto records = cdss::parse_record_csv(in, cfg.n_bits, cfg.n_treatments);
      cdss::ClinicianClient client(cfg, net, masks ? &*masks : nullptr);
      std::uint64_t total = client.ingest(records);
      std::cout << "uploaded " << records.size() << " records; database now holds " << total
                << "\n";
      return 0;
    }

    cdss::Genotype q;
    if (!genotype.empty()) {
      q = cdss::parse_genotype(genotype, cfg.n_bits);
    } else if (*m) {
      q = cdss::encode_genotype(parse_positions(mutations), cfg.n_bits);
    } else {
      cdss::fail(cdss::ErrorKind::kValidationError, "give --genotype or --mutations");
    }
    cdss::ClinicianClient client(cfg, net, masks ? &*masks : nullptr);
    cdss::QueryResultPlain r = client.query(q);
    std::cout << (csv ? cdss::render_csv(r) : cdss::render_table(r));
    return 0;
  } catch (const cdss::CdssError& e) {
    std::cerr << "clinician: " << e.what() << "\n";
    return cdss::exit_code_for(e.kind());
  }
}
