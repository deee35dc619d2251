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

// The computing-party daemon.
//
// Party 1 dials party 0; both accept clients on their own listen address.
// Clients send every request to both parties. Party 0 leads: it takes
// requests in arrival order and announces each one to party 1 with SYNC.
// Party 1 answers with its own verdict for the same request, and the
// operation runs only if both accept. This keeps preprocessing consumption
// and database contents in lockstep.
//
// Logs name operations by id and report sizes; they never contain share
// values or anything reconstructed from them.

#ifndef CDSS_PARTY_HPP_
#define CDSS_PARTY_HPP_

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cdss/config.hpp"
#include "cdss/database.hpp"
#include "cdss/engine.hpp"
#include "cdss/messages.hpp"
#include "cdss/preprocessing.hpp"
#include "cdss/query.hpp"
#include "cdss/transport.hpp"

namespace cdss {

inline std::shared_ptr<spdlog::logger> make_party_logger(int id, spdlog::sink_ptr sink = nullptr) {
  if (!sink) sink = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
  auto log = std::make_shared<spdlog::logger>("party" + std::to_string(id), sink);
  log->set_pattern("%Y-%m-%d %H:%M:%S.%e %^%l%$ %n: %v");
  log->flush_on(spdlog::level::info);
  return log;
}

inline std::string short_id(const Id128& id) { return hex(std::span(id).first(6)); }

struct QueryStats {
  PreprocCounts consumed;
  std::uint64_t opened = 0;
  std::uint64_t peer_bytes = 0;
  std::uint32_t rounds = 0;
};

class PartyService {
 public:
  PartyService(DeploymentConfig cfg, int id, Network& net, std::string listen, std::string peer,
               ShareDatabase db, TripleStore store, FieldElement alpha_share,
               std::shared_ptr<spdlog::logger> log = nullptr)
      : cfg_(std::move(cfg)),
        id_(id),
        net_(net),
        listen_addr_(std::move(listen)),
        peer_addr_(std::move(peer)),
        db_(std::move(db)),
        store_(std::move(store)),
        alpha_share_(alpha_share),
        log_(log ? std::move(log) : make_party_logger(id)) {
    cfg_.validate();
    if (id != 0 && id != 1) fail(ErrorKind::kConfigError, "party id must be 0 or 1");
    if (db_.n_bits() != cfg_.n_bits || db_.n_treatments() != cfg_.n_treatments) {
      fail(ErrorKind::kConfigError, "database shape does not match configuration");
    }
  }

  ~PartyService() {
    stop();
    join();
  }

  PartyService(const PartyService&) = delete;
  PartyService& operator=(const PartyService&) = delete;

  // Binds the listen address and starts serving in background threads.
  void start() {
    listener_ = net_.listen(listen_addr_);
    log_->info("listening on {} (N={}, T={}, B={}, mode={}, {} records)", listen_addr_,
               cfg_.n_bits, cfg_.n_treatments, cfg_.threshold_b, mode_name(cfg_.mode()),
               db_.size());
    acceptor_ = std::thread([this] { accept_loop(); });
    worker_ = std::thread([this] { guarded_worker(); });
  }

  void stop() {
    if (stopping_.exchange(true)) return;
    if (listener_) listener_->close();
    {
      std::lock_guard lock(mu_);
      if (peer_) peer_->close();
      for (auto& c : clients_) c->close();
    }
    cv_.notify_all();
  }

  // Blocks until the service stops; rethrows the error that stopped it.
  void wait() {
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_.load(); });
    }
    join();
    if (error_) std::rethrow_exception(error_);
  }

  std::size_t record_count() const {
    std::lock_guard lock(state_mu_);
    return db_.size();
  }

  QueryStats last_query_stats() const {
    std::lock_guard lock(state_mu_);
    return last_stats_;
  }

  PreprocCounts consumed() const {
    std::lock_guard lock(state_mu_);
    return store_.consumed();
  }

 private:
  struct Job {
    OpKind kind = OpKind::kIngest;
    Id128 id{};
    std::uint8_t client = 0;
    std::shared_ptr<Channel> channel;
    std::optional<IngestBatch> ingest;
    std::optional<QuerySubmit> query;
  };

  using JobKey = std::pair<std::uint8_t, Id128>;

  void join() {
    if (acceptor_.joinable()) acceptor_.join();
    if (worker_.joinable()) worker_.join();
    std::vector<std::thread> handlers;
    {
      std::lock_guard lock(mu_);
      handlers.swap(handlers_);
    }
    for (auto& t : handlers) t.join();
  }

  void fatal(std::exception_ptr err, const std::string& what) {
    log_->error("stopping: {}", what);
    {
      std::lock_guard lock(mu_);
      if (!error_) error_ = err;
    }
    stop();
  }

  Hello my_hello() const {
    Hello h;
    h.session_id = store_.session_id();
    h.role = Role::kParty;
    h.id = static_cast<std::uint8_t>(id_);
    h.modulus = cfg_.field().modulus();
    h.n_bits = static_cast<std::uint16_t>(cfg_.n_bits);
    h.n_treatments = static_cast<std::uint16_t>(cfg_.n_treatments);
    h.mode = cfg_.mode();
    return h;
  }

  // -- connections ---------------------------------------------------------

  void accept_loop() {
    while (!stopping_) {
      std::unique_ptr<Channel> c = listener_->accept(Millis(200));
      if (!c) continue;
      std::shared_ptr<Channel> ch(std::move(c));
      std::lock_guard lock(mu_);
      if (stopping_) {
        ch->close();
        break;
      }
      clients_.push_back(ch);
      handlers_.emplace_back([this, ch] { handle_connection(ch); });
    }
  }

  void handle_connection(std::shared_ptr<Channel> ch) {
    Hello theirs;
    try {
      theirs = answer_hello(*ch, [&](const Hello&) { return my_hello(); }, cfg_.timeout());
    } catch (const CdssError& e) {
      log_->warn("rejected connection: {}", e.what());
      ch->close();
      return;
    }
    if (theirs.role == Role::kParty) {
      std::lock_guard lock(mu_);
      if (id_ != 0 || theirs.id != 1 || peer_) {
        log_->warn("unexpected party connection (id {})", theirs.id);
        ch->send_abort("unexpected party connection");
        ch->close();
        return;
      }
      peer_ = ch;
      log_->info("peer party 1 connected");
      cv_.notify_all();
      return;
    }
    const std::uint8_t client = theirs.id;
    log_->info("client {} connected", client);
    while (!stopping_) {
      Frame f;
      try {
        if (!ch->wait_readable(Millis(200))) continue;
        f = ch->recv(cfg_.timeout());
      } catch (const CdssError&) {
        break;
      }
      Job job;
      job.client = client;
      job.channel = ch;
      try {
        if (f.type == MessageType::kIngestBatch) {
          job.kind = OpKind::kIngest;
          job.ingest = IngestBatch::decode(cfg_.field(), f.payload);
          job.id = job.ingest->batch_id;
        } else if (f.type == MessageType::kQuerySubmit) {
          job.kind = OpKind::kQuery;
          job.query = QuerySubmit::decode(cfg_.field(), f.payload);
          job.id = job.query->query_id;
        } else {
          log_->warn("client {} sent unexpected {}", client, message_type_name(f.type));
          ch->send_abort("protocol");
          break;
        }
      } catch (const CdssError& e) {
        log_->warn("client {} sent a malformed request: {}", client, e.what());
        ch->send_abort("validation");
        continue;
      }
      enqueue(std::move(job));
    }
    log_->info("client {} disconnected", client);
  }

  void enqueue(Job job) {
    std::lock_guard lock(mu_);
    if (id_ == 0) {
      queue_.push_back(std::move(job));
    } else {
      pending_[JobKey{static_cast<std::uint8_t>(job.kind), job.id}] = std::move(job);
    }
    cv_.notify_all();
  }

  // -- protocol lane -------------------------------------------------------

  void guarded_worker() {
    try {
      if (id_ == 0) {
        leader_loop();
      } else {
        follower_loop();
      }
    } catch (const std::exception& e) {
      if (!stopping_) fatal(std::current_exception(), e.what());
    }
  }

  void leader_loop() {
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || peer_; });
    }
    while (!stopping_) {
      Job job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (stopping_) return;
        job = std::move(queue_.front());
        queue_.pop_front();
      }
      SyncStatus mine = precheck(job);
      peer_->send(MessageType::kSync, SyncMessage{job.kind, job.id, mine}.encode());
      // Party 1 may wait up to one timeout for its copy of the request.
      Frame f = peer_->expect(MessageType::kSync, 2 * cfg_.timeout());
      SyncMessage theirs = SyncMessage::decode(f.payload);
      if (theirs.kind != job.kind || theirs.id != job.id) {
        fail(ErrorKind::kDesyncAbort, "peer answered SYNC for a different operation");
      }
      run(job, mine, theirs.status);
    }
  }

  void follower_loop() {
    std::unique_ptr<Channel> dialed;
    const auto deadline = std::chrono::steady_clock::now() + cfg_.timeout();
    while (!dialed) {
      if (stopping_) return;
      try {
        dialed = net_.dial(peer_addr_, Millis(200));
      } catch (const CdssError& e) {
        if (e.kind() != ErrorKind::kConnectError || std::chrono::steady_clock::now() >= deadline) {
          throw;
        }
      }
    }
    exchange_hello(*dialed, my_hello(), cfg_.timeout());
    {
      std::lock_guard lock(mu_);
      peer_ = std::shared_ptr<Channel>(std::move(dialed));
      if (stopping_) return;
    }
    log_->info("connected to peer party 0 at {}", peer_addr_);
    while (!stopping_) {
      if (!peer_->wait_readable(Millis(200))) continue;
      Frame f;
      try {
        f = peer_->recv(cfg_.timeout());
      } catch (const CdssError& e) {
        // Between operations this is party 0 shutting down.
        if (e.kind() != ErrorKind::kConnectionLost || stopping_) throw;
        log_->warn("peer party 0 closed the connection; stopping");
        stop();
        return;
      }
      if (f.type == MessageType::kAbort) {
        ByteReader r(f.payload);
        fail(ErrorKind::kProtocolError, "peer aborted: " + r.str());
      }
      if (f.type != MessageType::kSync) {
        fail(ErrorKind::kDesyncAbort, "expected SYNC, got " +
                                          std::string(message_type_name(f.type)));
      }
      SyncMessage lead = SyncMessage::decode(f.payload);
      Job job;
      job.kind = lead.kind;
      job.id = lead.id;
      bool found = false;
      {
        std::unique_lock lock(mu_);
        JobKey key{static_cast<std::uint8_t>(lead.kind), lead.id};
        cv_.wait_for(lock, cfg_.timeout(), [&] { return stopping_ || pending_.count(key) != 0; });
        if (auto it = pending_.find(key); it != pending_.end()) {
          job = std::move(it->second);
          pending_.erase(it);
          found = true;
        }
      }
      SyncStatus mine = found ? precheck(job) : SyncStatus::kMissing;
      peer_->send(MessageType::kSync, SyncMessage{job.kind, job.id, mine}.encode());
      run(job, lead.status, mine);
    }
  }

  // Local verdict on a request, before anything is consumed.
  SyncStatus precheck(const Job& job) {
    std::lock_guard lock(state_mu_);
    const std::uint64_t masks_used = store_.consumed().masks;
    auto masks_ok = [&](std::uint64_t first, std::uint64_t n) {
      return first >= masks_used && first - masks_used + n <= store_.remaining().masks;
    };
    const InputMode expected_input = input_mode_for(cfg_.mode());
    if (job.kind == OpKind::kIngest) {
      const IngestBatch& b = *job.ingest;
      if (db_.has_batch(b.batch_id)) return SyncStatus::kDuplicate;
      if (b.n_bits != cfg_.n_bits || b.n_treatments != cfg_.n_treatments ||
          b.input != expected_input) {
        return SyncStatus::kInvalid;
      }
      if (b.input == InputMode::kMasked) {
        if (b.first_mask_id < masks_used) return SyncStatus::kInvalid;  // would reuse masks
        if (!masks_ok(b.first_mask_id, b.values.size())) return SyncStatus::kPreproc;
      }
      return SyncStatus::kOk;
    }
    const QuerySubmit& q = *job.query;
    if (q.n_bits != cfg_.n_bits || q.input != expected_input) return SyncStatus::kInvalid;
    if (queries_[job.client] >= cfg_.max_queries_per_client) return SyncStatus::kQuota;
    if (q.input == InputMode::kMasked) {
      if (q.first_mask_id < masks_used) return SyncStatus::kInvalid;
      if (!masks_ok(q.first_mask_id, q.values.size())) return SyncStatus::kPreproc;
    }
    PreprocCounts need = cfg_.query_budget(db_.size());
    PreprocCounts have = store_.remaining();
    if (need.triples > have.triples || need.bits > have.bits) return SyncStatus::kPreproc;
    return SyncStatus::kOk;
  }

  void run(const Job& job, SyncStatus lead, SyncStatus follow) {
    const char* what = job.kind == OpKind::kIngest ? "ingest batch" : "query";
    if (lead == SyncStatus::kOk && follow == SyncStatus::kOk) {
      if (job.kind == OpKind::kIngest) {
        run_ingest(job);
      } else {
        run_query(job);
      }
      return;
    }
    if (lead == SyncStatus::kDuplicate && follow == SyncStatus::kDuplicate) {
      log_->info("{} {} from client {} already applied", what, short_id(job.id), job.client);
      reply(job, MessageType::kIngestAck, IngestAck{job.id, record_count()}.encode());
      return;
    }
    SyncStatus reason = lead != SyncStatus::kOk && lead != SyncStatus::kDuplicate ? lead : follow;
    if (reason == SyncStatus::kOk || reason == SyncStatus::kDuplicate) reason = SyncStatus::kMissing;
    log_->warn("ABORT {} {} from client {}: {}", what, short_id(job.id), job.client,
               sync_reason(reason));
    if (job.channel) job.channel->send_abort(sync_reason(reason));
  }

  // Turns client input into this party's shares, consuming input masks.
  std::vector<Share> input_shares(InputMode input, std::uint64_t first_mask_id,
                                  const std::vector<FieldElement>& values) {
    std::vector<Share> out(values.size());
    if (input == InputMode::kDirect) {
      for (std::size_t i = 0; i < values.size(); ++i) out[i] = Share{values[i], {}};
      return out;
    }
    std::uint64_t used = store_.consumed().masks;
    if (first_mask_id > used) store_.consume_masks(first_mask_id - used);  // skipped masks stay burnt
    std::vector<Share> r = store_.consume_masks(values.size());
    ShareArithmetic ops(cfg_.field(), id_, cfg_.mode(), alpha_share_);
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = ops.add_const(r[i], values[i]);
    return out;
  }

  void run_ingest(const Job& job) {
    const IngestBatch& b = *job.ingest;
    std::size_t total = 0;
    {
      std::lock_guard lock(state_mu_);
      std::vector<Share> flat = input_shares(b.input, b.first_mask_id, b.values);
      std::vector<SharedPatientRecord> recs;
      recs.reserve(b.count);
      for (std::uint32_t i = 0; i < b.count; ++i) {
        recs.push_back(assemble_record(std::span(flat).subspan(i * b.width(), b.width()),
                                       cfg_.n_bits, cfg_.n_treatments));
      }
      db_.append(std::move(recs), b.batch_id);
      total = db_.size();
    }
    log_->info("ingest batch {} from client {}: {} records, database now {}", short_id(b.batch_id),
               job.client, b.count, total);
    reply(job, MessageType::kIngestAck, IngestAck{b.batch_id, total}.encode());
  }

  void run_query(const Job& job) {
    const QuerySubmit& q = *job.query;
    ResultShare result;
    result.query_id = q.query_id;
    QueryStats stats;
    try {
      std::lock_guard lock(state_mu_);
      ++queries_[job.client];
      SharedBitVector genotype = input_shares(q.input, q.first_mask_id, q.values);
      const PreprocCounts before = store_.consumed();
      const std::uint64_t bytes_before = peer_->bytes_sent() + peer_->bytes_received();
      ProtocolSession s(cfg_.protocol, id_, *peer_, store_, alpha_share_, cfg_.timeout());
      QueryShares shares =
          evaluate_query(s, db_.records(), genotype, cfg_.threshold_b, cfg_.n_treatments);
      s.mac_check();
      result.record_count = db_.size();
      for (std::size_t t = 0; t < cfg_.n_treatments; ++t) {
        result.sums.push_back(shares.sums[t].value);
        result.counts.push_back(shares.counts[t].value);
      }
      const PreprocCounts after = store_.consumed();
      stats.consumed = {after.triples - before.triples, after.bits - before.bits,
                        after.masks - before.masks};
      stats.opened = s.opened_count();
      stats.rounds = s.rounds();
      stats.peer_bytes = peer_->bytes_sent() + peer_->bytes_received() - bytes_before;
      last_stats_ = stats;
    } catch (const CdssError& e) {
      std::string_view reason = "protocol";
      if (e.kind() == ErrorKind::kDesyncAbort) reason = "desync";
      if (e.kind() == ErrorKind::kMacAbort) reason = "mac";
      if (e.kind() == ErrorKind::kOutOfPreprocessing) reason = "preproc";
      log_->error("ABORT query {} from client {}: {}", short_id(q.query_id), job.client, reason);
      if (job.channel) job.channel->send_abort(reason);
      throw;  // the peer session can no longer be trusted to be in step
    }
    log_->info("query {} from client {} answered: D={}, {} triples, {} rounds",
               short_id(q.query_id), job.client, result.record_count, stats.consumed.triples,
               stats.rounds);
    reply(job, MessageType::kResultShare, result.encode(cfg_.field()));
  }

  void reply(const Job& job, MessageType type, const Bytes& payload) {
    if (!job.channel) return;
    try {
      job.channel->send(type, payload);
    } catch (const CdssError& e) {
      log_->warn("could not reply to client {}: {}", job.client, e.what());
    }
  }

  DeploymentConfig cfg_;
  int id_;
  Network& net_;
  std::string listen_addr_;
  std::string peer_addr_;
  ShareDatabase db_;
  TripleStore store_;
  FieldElement alpha_share_;
  std::shared_ptr<spdlog::logger> log_;

  mutable std::mutex mu_;        // connections and job queues
  mutable std::mutex state_mu_;  // database, store, quotas
  std::condition_variable cv_;
  std::atomic<bool> stopping_{false};
  std::exception_ptr error_;
  std::unique_ptr<Listener> listener_;
  std::shared_ptr<Channel> peer_;
  std::vector<std::shared_ptr<Channel>> clients_;
  std::deque<Job> queue_;
  std::map<JobKey, Job> pending_;
  std::map<std::uint8_t, std::uint64_t> queries_;
  QueryStats last_stats_;
  std::thread acceptor_;
  std::thread worker_;
  std::vector<std::thread> handlers_;
};

}  // namespace cdss

#endif  // CDSS_PARTY_HPP_
