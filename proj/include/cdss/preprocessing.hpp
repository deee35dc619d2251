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

// Trusted-dealer preprocessing: Beaver triples, shared random bits and input
// masks, written to per-party store files and consumed in order online.
//
// WARNING: the dealer is a trusted principal that sees every secret it
// deals. It stands in for a cryptographic offline phase and provides no
// security against a dishonest dealer.
//
// Store file layout (integers big-endian, field elements 16-byte LE):
//   "MPCCDSS-PREPROC\0" | u16 version | 16B session id | u8 mode |
//   16B modulus | u64 triples | u64 bits | u64 masks |
//   triples (a|b|c shares) | bits (share) | masks (share)

#ifndef CDSS_PREPROCESSING_HPP_
#define CDSS_PREPROCESSING_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cdss/error.hpp"
#include "cdss/field.hpp"
#include "cdss/sharing.hpp"
#include "cdss/wire.hpp"

namespace cdss {

inline constexpr char kStoreMagic[16] = "MPCCDSS-PREPROC";
inline constexpr char kClientMaskMagic[16] = "MPCCDSS-CLMASKS";
inline constexpr char kMacKeyMagic[16] = "MPCCDSS-MACKEY\0";
inline constexpr std::uint16_t kStoreVersion = 1;
inline constexpr std::size_t kStoreHeaderBytes = 16 + 2 + 16 + 1 + 16 + 3 * 8;

struct PreprocCounts {
  std::uint64_t triples = 0;
  std::uint64_t bits = 0;
  std::uint64_t masks = 0;

  friend bool operator==(const PreprocCounts&, const PreprocCounts&) = default;
};

enum class Category { kTriple = 0, kBit = 1, kMask = 2 };

struct BeaverTriple {
  Share a, b, c;
};

// ceil(log2(n + 1)): the bit-length needed for values in [0, n].
inline int comparison_bits(std::uint64_t n) {
  int l = 0;
  while (l < 64 && (std::uint64_t{1} << l) <= n) ++l;
  return l;
}

// Exact preprocessing consumed by one query (see evaluate_query):
// per record N XOR products, 2l-1 comparison products, 2T aggregation
// products, and l+kappa random bits for the comparison mask.
inline PreprocCounts budget_for_query(std::uint64_t records, std::uint64_t n_bits,
                                      std::uint64_t n_treatments, std::uint64_t ell,
                                      std::uint64_t kappa) {
  if (records == 0) return {};
  return {records * (n_bits + (2 * ell - 1) + 2 * n_treatments), records * (ell + kappa), 0};
}

// Input masks consumed in authenticated mode.
inline std::uint64_t masks_for_query(std::uint64_t n_bits) { return n_bits; }
inline std::uint64_t masks_for_ingest(std::uint64_t records, std::uint64_t n_bits,
                                      std::uint64_t n_treatments) {
  return records * (n_bits + 2 * n_treatments);
}

struct StoreHeader {
  Id128 session_id{};
  Mode mode = Mode::kSemiHonest;
  u128 modulus = 0;
  PreprocCounts counts;
};

namespace detail {

inline void write_u128_le(ByteWriter& w, u128 v) {
  for (int i = 0; i < 16; ++i) w.u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline u128 read_u128_le(ByteReader& r) {
  auto b = r.bytes(16);
  u128 v = 0;
  for (int i = 15; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

inline void write_bytes(std::ostream& out, const Bytes& b) {
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) fail(ErrorKind::kDealError, "write failed");
}

}  // namespace detail

inline Bytes encode_store_header(const StoreHeader& h) {
  ByteWriter w;
  w.bytes({reinterpret_cast<const std::uint8_t*>(kStoreMagic), 16});
  w.u16(kStoreVersion);
  w.bytes(h.session_id);
  w.u8(static_cast<std::uint8_t>(h.mode));
  detail::write_u128_le(w, h.modulus);
  w.u64(h.counts.triples);
  w.u64(h.counts.bits);
  w.u64(h.counts.masks);
  return w.take();
}

inline StoreHeader decode_store_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kStoreHeaderBytes) fail(ErrorKind::kDealError, "store header truncated");
  ByteReader r(bytes.first(kStoreHeaderBytes));
  auto magic = r.bytes(16);
  if (!std::equal(magic.begin(), magic.end(), reinterpret_cast<const std::uint8_t*>(kStoreMagic))) {
    fail(ErrorKind::kDealError, "bad store magic");
  }
  if (r.u16() != kStoreVersion) fail(ErrorKind::kDealError, "unsupported store version");
  StoreHeader h;
  h.session_id = r.fixed<16>();
  std::uint8_t mode = r.u8();
  if (mode > 1) fail(ErrorKind::kDealError, "bad mode byte");
  h.mode = static_cast<Mode>(mode);
  h.modulus = detail::read_u128_le(r);
  h.counts.triples = r.u64();
  h.counts.bits = r.u64();
  h.counts.masks = r.u64();
  return h;
}

struct DealtSession {
  Id128 session_id{};
  GlobalMacKey mac_key;
};

// Streams both parties' stores and the client's mask values. Element order
// is triples, bits, masks; party streams stay index-aligned.
inline DealtSession deal_preprocessing(const PreprocCounts& counts, const ProtocolConfig& cfg,
                                       Csprng& rng, std::ostream& party0, std::ostream& party1,
                                       std::ostream& client_masks) {
  cfg.validate();
  const Field& f = cfg.field;
  DealtSession session;
  session.session_id = random_id(rng);
  session.mac_key = cfg.mode == Mode::kAuthenticated ? GlobalMacKey::generate(f, rng)
                                                     : GlobalMacKey{};

  StoreHeader h{session.session_id, cfg.mode, f.modulus(), counts};
  Bytes header = encode_store_header(h);
  detail::write_bytes(party0, header);
  detail::write_bytes(party1, header);

  constexpr std::uint64_t kChunk = 4096;
  std::array<ByteWriter, kNumParties> out;
  auto flush = [&](bool force) {
    if (!force && out[0].size() < (1u << 20)) return;
    detail::write_bytes(party0, out[0].data());
    detail::write_bytes(party1, out[1].data());
    out[0].data().clear();
    out[1].data().clear();
  };
  auto emit = [&](const SharePair& p) {
    for (int i = 0; i < kNumParties; ++i) out[i].share(f, cfg.mode, p[i]);
  };

  for (std::uint64_t i = 0; i < counts.triples; ++i) {
    FieldElement a = f.sample(rng), b = f.sample(rng);
    emit(share_for_mode(cfg, a, session.mac_key, rng));
    emit(share_for_mode(cfg, b, session.mac_key, rng));
    emit(share_for_mode(cfg, f.mul(a, b), session.mac_key, rng));
    if (i % kChunk == 0) flush(false);
  }
  std::uint8_t bitbuf[64];
  for (std::uint64_t i = 0; i < counts.bits; ++i) {
    if (i % 512 == 0) rng.fill(bitbuf);
    std::uint64_t bit = (bitbuf[(i % 512) / 8] >> (i % 8)) & 1;
    emit(share_for_mode(cfg, FieldElement(bit), session.mac_key, rng));
    if (i % kChunk == 0) flush(false);
  }

  ByteWriter cm;
  cm.bytes({reinterpret_cast<const std::uint8_t*>(kClientMaskMagic), 16});
  cm.u16(kStoreVersion);
  cm.bytes(session.session_id);
  cm.u8(static_cast<std::uint8_t>(cfg.mode));
  detail::write_u128_le(cm, f.modulus());
  cm.u64(counts.masks);
  for (std::uint64_t i = 0; i < counts.masks; ++i) {
    FieldElement r = f.sample(rng);
    cm.element(f, r);
    emit(share_for_mode(cfg, r, session.mac_key, rng));
    if (i % kChunk == 0) flush(false);
  }
  flush(true);
  detail::write_bytes(client_masks, cm.data());
  return session;
}

inline std::string store_path(const std::filesystem::path& dir, int party) {
  return (dir / ("party" + std::to_string(party) + ".preproc")).string();
}
inline std::string mac_key_path(const std::string& store) { return store + ".mackey"; }
inline std::string client_mask_path(const std::filesystem::path& dir) {
  return (dir / "client.masks").string();
}

inline Bytes encode_mac_key_share(const Field& f, const Id128& session, int party,
                                  FieldElement alpha_share) {
  ByteWriter w;
  w.bytes({reinterpret_cast<const std::uint8_t*>(kMacKeyMagic), 16});
  w.bytes(session);
  w.u8(static_cast<std::uint8_t>(party));
  w.element(f, alpha_share);
  return w.take();
}

// Writes party0.preproc, party1.preproc, client.masks and, in authenticated
// mode, each party's MAC key share next to its store.
inline DealtSession deal_to_directory(const PreprocCounts& counts, const ProtocolConfig& cfg,
                                      Csprng& rng, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream p0(store_path(dir, 0), std::ios::binary | std::ios::trunc);
  std::ofstream p1(store_path(dir, 1), std::ios::binary | std::ios::trunc);
  std::ofstream cm(client_mask_path(dir), std::ios::binary | std::ios::trunc);
  if (!p0 || !p1 || !cm) fail(ErrorKind::kDealError, "cannot create files in " + dir.string());
  DealtSession s = deal_preprocessing(counts, cfg, rng, p0, p1, cm);
  for (int i = 0; i < kNumParties; ++i) {
    std::filesystem::remove(store_path(dir, i) + ".cursor", ec);
    std::ofstream k(mac_key_path(store_path(dir, i)), std::ios::binary | std::ios::trunc);
    if (!k) fail(ErrorKind::kDealError, "cannot write MAC key share");
    detail::write_bytes(k, encode_mac_key_share(cfg.field, s.session_id, i,
                                                s.mac_key.alpha_shares[static_cast<std::size_t>(i)]));
  }
  return s;
}

inline FieldElement load_mac_key_share(const Field& f, const std::string& path,
                                       const Id128& session, int party) {
  std::ifstream in(path, std::ios::binary);
  Bytes b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (b.size() != 16 + 16 + 1 + kElementBytes) fail(ErrorKind::kDealError, "bad MAC key file");
  ByteReader r(b);
  auto magic = r.bytes(16);
  if (!std::equal(magic.begin(), magic.end(), reinterpret_cast<const std::uint8_t*>(kMacKeyMagic))) {
    fail(ErrorKind::kDealError, "bad MAC key magic");
  }
  if (r.fixed<16>() != session) fail(ErrorKind::kDealError, "MAC key session mismatch");
  if (r.u8() != party) fail(ErrorKind::kDealError, "MAC key belongs to another party");
  return r.element(f);
}

// One party's preprocessing, read lazily from a stream. Each category has a
// strictly monotone cursor; a file-backed store persists cursors to a
// sidecar so material is never reused across restarts.
class TripleStore {
 public:
  static TripleStore open_file(const std::string& path, const ProtocolConfig& cfg) {
    auto in = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*in) fail(ErrorKind::kDealError, "cannot open preprocessing store " + path);
    TripleStore s(std::move(in), cfg);
    s.cursor_path_ = path + ".cursor";
    std::ifstream cur(s.cursor_path_);
    if (cur) {
      PreprocCounts c;
      if (cur >> c.triples >> c.bits >> c.masks) s.consumed_ = c;
      if (c.triples > s.header_.counts.triples || c.bits > s.header_.counts.bits ||
          c.masks > s.header_.counts.masks) {
        fail(ErrorKind::kDealError, "cursor file exceeds store contents");
      }
    }
    return s;
  }

  static TripleStore from_bytes(std::string bytes, const ProtocolConfig& cfg) {
    return TripleStore(std::make_unique<std::istringstream>(std::move(bytes)), cfg);
  }

  TripleStore(TripleStore&&) = default;
  TripleStore& operator=(TripleStore&&) = default;

  const StoreHeader& header() const { return header_; }
  const Id128& session_id() const { return header_.session_id; }
  const PreprocCounts& consumed() const { return consumed_; }

  PreprocCounts remaining() const {
    return {header_.counts.triples - consumed_.triples, header_.counts.bits - consumed_.bits,
            header_.counts.masks - consumed_.masks};
  }

  std::vector<BeaverTriple> consume_triples(std::uint64_t k) {
    std::vector<Share> raw = read(Category::kTriple, k);
    std::vector<BeaverTriple> out(k);
    for (std::uint64_t i = 0; i < k; ++i) out[i] = {raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]};
    return out;
  }

  std::vector<Share> consume_bits(std::uint64_t k) { return read(Category::kBit, k); }
  std::vector<Share> consume_masks(std::uint64_t k) { return read(Category::kMask, k); }

  // Fails fast, before anything is consumed, when a planned step would run dry.
  void require(const PreprocCounts& need) const {
    PreprocCounts have = remaining();
    if (need.triples > have.triples || need.bits > have.bits || need.masks > have.masks) {
      fail(ErrorKind::kOutOfPreprocessing,
           "need " + std::to_string(need.triples) + " triples/" + std::to_string(need.bits) +
               " bits/" + std::to_string(need.masks) + " masks, have " +
               std::to_string(have.triples) + "/" + std::to_string(have.bits) + "/" +
               std::to_string(have.masks));
    }
  }

 private:
  TripleStore(std::unique_ptr<std::istream> in, const ProtocolConfig& cfg)
      : in_(std::move(in)), field_(cfg.field) {
    Bytes head(kStoreHeaderBytes);
    in_->read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
    if (!*in_) fail(ErrorKind::kDealError, "store header truncated");
    header_ = decode_store_header(head);
    if (header_.modulus != cfg.field.modulus()) fail(ErrorKind::kDealError, "store modulus mismatch");
    if (header_.mode != cfg.mode) fail(ErrorKind::kDealError, "store mode mismatch");
    share_size_ = share_bytes(header_.mode);
    in_->seekg(0, std::ios::end);
    auto size = static_cast<std::uint64_t>(in_->tellg());
    std::uint64_t expect = kStoreHeaderBytes + share_size_ * (3 * header_.counts.triples +
                                                              header_.counts.bits +
                                                              header_.counts.masks);
    if (size != expect) fail(ErrorKind::kDealError, "store length does not match header counts");
  }

  std::vector<Share> read(Category cat, std::uint64_t k) {
    std::uint64_t* cursor = nullptr;
    std::uint64_t total = 0, per = 1, base = kStoreHeaderBytes;
    switch (cat) {
      case Category::kTriple:
        cursor = &consumed_.triples;
        total = header_.counts.triples;
        per = 3;
        break;
      case Category::kBit:
        cursor = &consumed_.bits;
        total = header_.counts.bits;
        base += 3 * header_.counts.triples * share_size_;
        break;
      case Category::kMask:
        cursor = &consumed_.masks;
        total = header_.counts.masks;
        base += (3 * header_.counts.triples + header_.counts.bits) * share_size_;
        break;
    }
    if (k > total - *cursor) {
      fail(ErrorKind::kOutOfPreprocessing,
           "requested " + std::to_string(k) + ", " + std::to_string(total - *cursor) + " left");
    }
    std::vector<Share> out(k * per);
    if (k == 0) return out;
    Bytes buf(k * per * share_size_);
    in_->clear();
    in_->seekg(static_cast<std::streamoff>(base + *cursor * per * share_size_));
    in_->read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!*in_) fail(ErrorKind::kDealError, "store read failed");
    ByteReader r(buf);
    for (auto& s : out) s = r.share(field_, header_.mode);
    *cursor += k;
    persist_cursor();
    return out;
  }

  void persist_cursor() {
    if (cursor_path_.empty()) return;
    std::ofstream out(cursor_path_, std::ios::trunc);
    out << consumed_.triples << ' ' << consumed_.bits << ' ' << consumed_.masks << '\n';
  }

  std::unique_ptr<std::istream> in_;
  Field field_;
  StoreHeader header_;
  std::size_t share_size_ = kElementBytes;
  PreprocCounts consumed_;
  std::string cursor_path_;
};

// The client's side of the input masks: plaintext r values in order.
class ClientMasks {
 public:
  static ClientMasks open_file(const std::string& path, const ProtocolConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::kDealError, "cannot open client mask file " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ClientMasks m = from_bytes(bytes, cfg);
    m.cursor_path_ = path + ".cursor";
    std::ifstream cur(m.cursor_path_);
    std::uint64_t used = 0;
    if (cur >> used) m.next_ = std::min<std::uint64_t>(used, m.values_.size());
    return m;
  }

  static ClientMasks from_bytes(const std::string& bytes, const ProtocolConfig& cfg) {
    ByteReader r({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
    auto magic = r.bytes(16);
    if (!std::equal(magic.begin(), magic.end(),
                    reinterpret_cast<const std::uint8_t*>(kClientMaskMagic))) {
      fail(ErrorKind::kDealError, "bad client mask magic");
    }
    if (r.u16() != kStoreVersion) fail(ErrorKind::kDealError, "unsupported mask file version");
    ClientMasks m;
    m.session_id_ = r.fixed<16>();
    if (r.u8() != static_cast<std::uint8_t>(cfg.mode)) fail(ErrorKind::kDealError, "mode mismatch");
    if (detail::read_u128_le(r) != cfg.field.modulus()) {
      fail(ErrorKind::kDealError, "mask file modulus mismatch");
    }
    std::uint64_t n = r.u64();
    m.values_.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) m.values_.push_back(r.element(cfg.field));
    return m;
  }

  const Id128& session_id() const { return session_id_; }
  std::uint64_t next_id() const { return next_; }
  std::uint64_t remaining() const { return values_.size() - next_; }

  // Returns the first mask id and the k mask values taken.
  std::pair<std::uint64_t, std::vector<FieldElement>> take(std::uint64_t k) {
    if (k > remaining()) fail(ErrorKind::kOutOfPreprocessing, "client input masks exhausted");
    std::uint64_t first = next_;
    std::vector<FieldElement> out(values_.begin() + static_cast<std::ptrdiff_t>(first),
                                  values_.begin() + static_cast<std::ptrdiff_t>(first + k));
    next_ += k;
    if (!cursor_path_.empty()) {
      std::ofstream c(cursor_path_, std::ios::trunc);
      c << next_ << '\n';
    }
    return {first, std::move(out)};
  }

 private:
  Id128 session_id_{};
  std::vector<FieldElement> values_;
  std::uint64_t next_ = 0;
  std::string cursor_path_;
};

}  // namespace cdss

#endif  // CDSS_PREPROCESSING_HPP_
