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

// One party's half of the patient database.
//
// File layout (integers big-endian, field elements 16-byte LE):
//   "MPCCDSS-SHAREDB\0" | u16 version | u8 mode | 16B modulus |
//   u16 N | u16 T | u64 record count | records
// Each record is N + 2T shares in wire order (genotype, onehot, ttf-onehot).
// The file only grows; the header count is rewritten after each append.

#ifndef CDSS_DATABASE_HPP_
#define CDSS_DATABASE_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "cdss/error.hpp"
#include "cdss/field.hpp"
#include "cdss/preprocessing.hpp"
#include "cdss/query.hpp"
#include "cdss/sharing.hpp"
#include "cdss/wire.hpp"

namespace cdss {

inline constexpr char kShareDbMagic[16] = "MPCCDSS-SHAREDB";
inline constexpr std::uint16_t kShareDbVersion = 1;
inline constexpr std::size_t kShareDbHeaderBytes = 16 + 2 + 1 + 16 + 2 + 2 + 8;
inline constexpr std::size_t kCountOffset = kShareDbHeaderBytes - 8;

class ShareDatabase {
 public:
  ShareDatabase(const ProtocolConfig& cfg, std::size_t n_bits, std::size_t n_treatments)
      : cfg_(cfg), n_bits_(n_bits), n_treatments_(n_treatments) {}

  // Opens `path`, creating a header-only file when it does not exist.
  static ShareDatabase open(const std::string& path, const ProtocolConfig& cfg,
                            std::size_t n_bits, std::size_t n_treatments) {
    ShareDatabase db(cfg, n_bits, n_treatments);
    if (!std::filesystem::exists(path)) {
      db.persist(path);
    } else {
      std::ifstream in(path, std::ios::binary);
      Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      db = decode(bytes, cfg, n_bits, n_treatments);
      std::ifstream ids(batch_path(path), std::ios::binary);
      Id128 id;
      while (ids.read(reinterpret_cast<char*>(id.data()), id.size())) db.batches_.insert(id);
    }
    db.path_ = path;
    return db;
  }

  static ShareDatabase decode(std::span<const std::uint8_t> bytes, const ProtocolConfig& cfg,
                              std::size_t n_bits, std::size_t n_treatments) {
    if (bytes.size() < kShareDbHeaderBytes) fail(ErrorKind::kCorruptDatabase, "header truncated");
    ByteReader r(bytes);
    auto magic = r.bytes(16);
    if (!std::equal(magic.begin(), magic.end(),
                    reinterpret_cast<const std::uint8_t*>(kShareDbMagic))) {
      fail(ErrorKind::kCorruptDatabase, "bad magic");
    }
    if (r.u16() != kShareDbVersion) fail(ErrorKind::kCorruptDatabase, "unsupported version");
    std::uint8_t mode = r.u8();
    if (mode != static_cast<std::uint8_t>(cfg.mode)) {
      fail(ErrorKind::kCorruptDatabase, "database mode does not match configuration");
    }
    if (detail::read_u128_le(r) != cfg.field.modulus()) {
      fail(ErrorKind::kCorruptDatabase, "database modulus does not match configuration");
    }
    if (r.u16() != n_bits || r.u16() != n_treatments) {
      fail(ErrorKind::kCorruptDatabase, "database N/T do not match configuration");
    }
    std::uint64_t count = r.u64();
    ShareDatabase db(cfg, n_bits, n_treatments);
    const std::size_t width = db.record_bytes();
    if (count > r.remaining() / width || r.remaining() != count * width) {
      fail(ErrorKind::kCorruptDatabase, "record count does not match file length");
    }
    db.records_.reserve(count);
    std::vector<Share> flat(n_bits + 2 * n_treatments);
    try {
      for (std::uint64_t i = 0; i < count; ++i) {
        for (auto& s : flat) s = r.share(cfg.field, cfg.mode);
        db.records_.push_back(assemble_record(flat, n_bits, n_treatments));
      }
    } catch (const CdssError& e) {
      fail(ErrorKind::kCorruptDatabase, e.detail());
    }
    return db;
  }

  Bytes encode() const {
    ByteWriter w;
    w.reserve(kShareDbHeaderBytes + records_.size() * record_bytes());
    write_header(w);
    for (const auto& r : records_) write_record(w, r);
    return w.take();
  }

  // Writes the whole database to `path` (and the applied batch ids beside it).
  void persist(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kCorruptDatabase, "cannot write " + path);
    detail::write_bytes(out, encode());
    std::ofstream ids(batch_path(path), std::ios::binary | std::ios::trunc);
    for (const auto& id : batches_) {
      ids.write(reinterpret_cast<const char*>(id.data()), static_cast<std::streamsize>(id.size()));
    }
  }

  // Appends records; file-backed databases write through before returning.
  void append(std::vector<SharedPatientRecord> recs, const Id128& batch_id) {
    for (const auto& r : recs) {
      if (r.genotype.size() != n_bits_ || r.onehot.size() != n_treatments_ ||
          r.ttf_onehot.size() != n_treatments_) {
        fail(ErrorKind::kValidationError, "record arity does not match database");
      }
    }
    if (!path_.empty()) {
      ByteWriter w;
      for (const auto& r : recs) write_record(w, r);
      std::fstream f(path_, std::ios::binary | std::ios::in | std::ios::out);
      if (!f) fail(ErrorKind::kCorruptDatabase, "cannot reopen " + path_);
      f.seekp(0, std::ios::end);
      detail::write_bytes(f, w.data());
      ByteWriter count;
      count.u64(records_.size() + recs.size());
      f.seekp(static_cast<std::streamoff>(kCountOffset));
      detail::write_bytes(f, count.data());
      f.flush();
      std::ofstream ids(batch_path(path_), std::ios::binary | std::ios::app);
      ids.write(reinterpret_cast<const char*>(batch_id.data()),
                static_cast<std::streamsize>(batch_id.size()));
    }
    records_.insert(records_.end(), std::make_move_iterator(recs.begin()),
                    std::make_move_iterator(recs.end()));
    batches_.insert(batch_id);
  }

  bool has_batch(const Id128& id) const { return batches_.count(id) != 0; }

  const std::vector<SharedPatientRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t n_bits() const { return n_bits_; }
  std::size_t n_treatments() const { return n_treatments_; }
  std::size_t record_bytes() const {
    return (n_bits_ + 2 * n_treatments_) * share_bytes(cfg_.mode);
  }

 private:
  static std::string batch_path(const std::string& path) { return path + ".batches"; }

  void write_header(ByteWriter& w) const {
    w.bytes({reinterpret_cast<const std::uint8_t*>(kShareDbMagic), 16});
    w.u16(kShareDbVersion);
    w.u8(static_cast<std::uint8_t>(cfg_.mode));
    detail::write_u128_le(w, cfg_.field.modulus());
    w.u16(static_cast<std::uint16_t>(n_bits_));
    w.u16(static_cast<std::uint16_t>(n_treatments_));
    w.u64(records_.size());
  }

  void write_record(ByteWriter& w, const SharedPatientRecord& r) const {
    const Field& f = cfg_.field;
    for (const auto& s : r.genotype) w.share(f, cfg_.mode, s);
    for (const auto& s : r.onehot) w.share(f, cfg_.mode, s);
    for (const auto& s : r.ttf_onehot) w.share(f, cfg_.mode, s);
  }

  ProtocolConfig cfg_;
  std::size_t n_bits_;
  std::size_t n_treatments_;
  std::vector<SharedPatientRecord> records_;
  std::set<Id128> batches_;
  std::string path_;
};

}  // namespace cdss

#endif  // CDSS_DATABASE_HPP_
