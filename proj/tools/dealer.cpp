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

// Trusted dealer: writes both parties' preprocessing stores, their MAC key
// shares and the client's input-mask file for one session.

#include <iostream>

#include "CLI11.hpp"
#include "cdss/client.hpp"
#include "cdss/config.hpp"
#include "cdss/preprocessing.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deal preprocessing material for a two-party session"};
  std::string out_dir, config_path;
  std::uint64_t triples = 0, bits = 0, masks = 0, queries = 0, records = 0;
  app.add_option("--out-dir", out_dir, "Directory for party0.preproc, party1.preproc, client.masks")
      ->required();
  app.add_option("--config", config_path, "Deployment configuration")->required();
  app.add_option("--triples", triples, "Beaver triples");
  app.add_option("--bits", bits, "Shared random bits");
  app.add_option("--masks", masks, "Client input masks");
  app.add_option("--queries", queries, "Add the budget for this many queries ...");
  app.add_option("--records", records, "... over a database of this many records");
  CLI11_PARSE(app, argc, argv);

  try {
    cdss::DeploymentConfig cfg = cdss::load_config(config_path);
    cdss::PreprocCounts counts{triples, bits, masks};
    if (queries > 0) {
      cdss::PreprocCounts q = cfg.query_budget(records);
      counts.triples += q.triples * queries;
      counts.bits += q.bits * queries;
      if (cfg.mode() == cdss::Mode::kAuthenticated) {
        counts.masks += queries * cdss::masks_for_query(cfg.n_bits) +
                        cdss::masks_for_ingest(records, cfg.n_bits, cfg.n_treatments);
      }
    }
    cdss::Csprng rng;
    cdss::DealtSession s = cdss::deal_to_directory(counts, cfg.protocol, rng, out_dir);
    std::cout << "session " << cdss::hex(s.session_id) << ": " << counts.triples << " triples, "
              << counts.bits << " bits, " << counts.masks << " masks (" << cdss::mode_name(cfg.mode())
              << ") in " << out_dir << "\n";
    return 0;
  } catch (const cdss::CdssError& e) {
    std::cerr << "dealer: " << e.what() << "\n";
    return cdss::exit_code_for(e.kind());
  }
}
