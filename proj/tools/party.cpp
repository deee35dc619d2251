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

// Computing-party daemon. Runs until SIGINT/SIGTERM or a protocol failure.

#include <csignal>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "cdss/client.hpp"
#include "cdss/config.hpp"
#include "cdss/database.hpp"
#include "cdss/party.hpp"
#include "cdss/preprocessing.hpp"
#include "cdss/transport.hpp"

int main(int argc, char** argv) {
  CLI::App app{"MPC-CDSS computing party"};
  int id = -1;
  std::string config_path, listen, peer, db_path, preproc;
  app.add_option("--id", id, "Party index")->required()->check(CLI::Range(0, 1));
  app.add_option("--config", config_path, "Deployment configuration")->required();
  app.add_option("--listen", listen, "host:port for clients (and, on party 0, for party 1)")
      ->required();
  app.add_option("--peer", peer, "Party 0's listen address (used by party 1)")->required();
  app.add_option("--db", db_path, "Share database file (created if missing)")->required();
  app.add_option("--preproc", preproc, "This party's preprocessing store")->required();
  CLI11_PARSE(app, argc, argv);

  // Handle termination signals on a dedicated thread.
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGINT);
  sigaddset(&sigs, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

  auto log = cdss::make_party_logger(id);
  try {
    cdss::DeploymentConfig cfg = cdss::load_config(config_path);
    cdss::TripleStore store = cdss::TripleStore::open_file(preproc, cfg.protocol);
    cdss::FieldElement alpha{};
    if (cfg.mode() == cdss::Mode::kAuthenticated) {
      alpha = cdss::load_mac_key_share(cfg.field(), cdss::mac_key_path(preproc), store.session_id(),
                                       id);
    }
    cdss::ShareDatabase db =
        cdss::ShareDatabase::open(db_path, cfg.protocol, cfg.n_bits, cfg.n_treatments);
    cdss::TcpNetwork net;
    cdss::PartyService service(cfg, id, net, listen, peer, std::move(db), std::move(store), alpha,
                               log);
    service.start();
    std::thread([&service, sigs, log] {
      int sig = 0;
      sigwait(&sigs, &sig);
      log->info("signal {}, shutting down", sig);
      service.stop();
    }).detach();
    service.wait();
    return 0;
  } catch (const cdss::CdssError& e) {
    log->error("{}", e.what());
    return cdss::exit_code_for(e.kind());
  }
}
