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

#include "cdss/wire.hpp"

#include <thread>

#include "cdss/engine.hpp"
#include "cdss/transport.hpp"
#include "gtest/gtest.h"
#include "test_support.hpp"

namespace cdss {
namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const CdssError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kBenchInvalid;
}

TEST(FrameTest, Examples) {
  EXPECT_EQ(encode_frame(MessageType::kSync, {}), (Bytes{0, 0, 0, 1, 7}));
  Field f(kMersenne61);
  ByteWriter w;
  w.element(f, FieldElement(5));
  Bytes b = encode_frame(MessageType::kOpenBatch, w.data());
  EXPECT_EQ(read_frame_length(std::span(b).first<4>()), 17u);
  EXPECT_EQ(b[4], 6);
  EXPECT_EQ(b.size(), 21u);
}

TEST(FrameTest, RandomRoundTrips) {
  Csprng rng(Seed{9});
  for (int i = 0; i < 10000; ++i) {
    Frame in;
    in.type = static_cast<MessageType>(1 + rng.next_u64() % 10);
    in.payload.resize(rng.next_u64() % 300);
    rng.fill(in.payload);
    Bytes b = encode_frame(in);
    std::size_t used = 0;
    ASSERT_EQ(decode_frame(b, &used), in);
    ASSERT_EQ(used, b.size());
  }
}

TEST(FrameTest, DecodesConcatenatedFrames) {
  Bytes a = encode_frame(MessageType::kHello, Bytes{1, 2, 3});
  Bytes b = encode_frame(MessageType::kAbort, Bytes{});
  a.insert(a.end(), b.begin(), b.end());
  std::size_t used = 0;
  EXPECT_EQ(decode_frame(a, &used).type, MessageType::kHello);
  EXPECT_EQ(decode_frame(std::span(a).subspan(used)).type, MessageType::kAbort);
}

TEST(FrameTest, TruncationNeedsMoreBytes) {
  Bytes b = encode_frame(MessageType::kQuerySubmit, Bytes(40, 0xab));
  for (std::size_t cut = 0; cut < b.size(); ++cut) {
    EXPECT_EQ(kind_of([&] { decode_frame(std::span(b).first(cut)); }),
              ErrorKind::kNeedMoreBytes)
        << cut;
  }
}

TEST(FrameTest, OversizeAndGarbage) {
  Bytes huge{0x04, 0x00, 0x00, 0x01, 7};  // 64 MiB + 1
  EXPECT_EQ(kind_of([&] { decode_frame(huge); }), ErrorKind::kFrameError);
  Bytes zero{0, 0, 0, 0};
  EXPECT_EQ(kind_of([&] { decode_frame(zero); }), ErrorKind::kFrameError);
  Bytes payload(kMaxPayload + 1);
  EXPECT_EQ(kind_of([&] { encode_frame(MessageType::kSync, payload); }), ErrorKind::kFrameError);
  Bytes unknown{0, 0, 0, 1, 11};
  EXPECT_EQ(kind_of([&] { decode_frame(unknown); }), ErrorKind::kProtocolError);
  Bytes max_ok(kMaxPayload);
  EXPECT_EQ(encode_frame(MessageType::kSync, max_ok).size(), kMaxFrameLength + 4);
}

TEST(ByteCodecTest, BigEndianIntegers) {
  ByteWriter w;
  w.u16(0x0102);
  w.u32(0x03040506);
  w.u64(0x0708090a0b0c0d0eULL);
  w.str("hi");
  EXPECT_EQ(w.data(), (Bytes{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 0, 0, 0, 2, 'h', 'i'}));
  ByteReader r(w.data());
  EXPECT_EQ(r.u16(), 0x0102);
  EXPECT_EQ(r.u32(), 0x03040506u);
  EXPECT_EQ(r.u64(), 0x0708090a0b0c0d0eULL);
  EXPECT_EQ(r.str(), "hi");
  EXPECT_TRUE(r.done());
  EXPECT_EQ(kind_of([&] { r.u8(); }), ErrorKind::kProtocolError);
}

Hello party_hello(std::uint8_t id) {
  Hello h;
  h.session_id = Id128{1, 2, 3};
  h.id = id;
  h.modulus = kPrime128;
  h.n_bits = 128;
  h.n_treatments = 16;
  h.mode = Mode::kAuthenticated;
  return h;
}

TEST(HelloTest, LayoutAndRoundTrip) {
  Hello h = party_hello(1);
  Bytes b = h.encode();
  ASSERT_EQ(b.size(), 2u + 16 + 1 + 1 + 16 + 2 + 2 + 1);
  EXPECT_EQ(b[0], 0);
  EXPECT_EQ(b[1], 1);
  EXPECT_EQ(b[19], 1);                      // id
  EXPECT_EQ(b[20], 0x61);                   // 2^128 - 159, low byte first
  EXPECT_EQ(b[36], 0);
  EXPECT_EQ(b[37], 128);                    // N
  EXPECT_EQ(b[39], 16);                     // T
  EXPECT_EQ(b[40], 1);                      // mode
  Hello d = Hello::decode(b);
  EXPECT_EQ(d.modulus, kPrime128);
  EXPECT_EQ(d.session_id, h.session_id);
  EXPECT_EQ(d.n_treatments, 16);
}

std::array<std::exception_ptr, 2> run_handshake(const Hello& a, const Hello& b) {
  auto [c0, c1] = make_loopback_pair();
  std::array<std::exception_ptr, 2> err;
  std::thread t([&, ch = c1.get()] {
    try {
      exchange_hello(*ch, b, std::chrono::seconds(5));
    } catch (...) {
      err[1] = std::current_exception();
    }
  });
  try {
    exchange_hello(*c0, a, std::chrono::seconds(5));
  } catch (...) {
    err[0] = std::current_exception();
  }
  t.join();
  return err;
}

TEST(HelloTest, IdenticalConfigurationSucceeds) {
  auto err = run_handshake(party_hello(0), party_hello(1));
  EXPECT_FALSE(err[0]);
  EXPECT_FALSE(err[1]);
}

TEST(HelloTest, ModulusMismatchNamesField) {
  Hello other = party_hello(1);
  other.modulus = kMersenne61;
  auto err = run_handshake(party_hello(0), other);
  for (auto& e : err) {
    ASSERT_TRUE(e);
    try {
      std::rethrow_exception(e);
    } catch (const CdssError& ce) {
      EXPECT_EQ(ce.kind(), ErrorKind::kHandshakeError);
      EXPECT_NE(std::string(ce.what()).find("modulus"), std::string::npos) << ce.what();
    }
  }
}

TEST(HelloTest, SessionComparedForPartiesAndAuthenticatedClients) {
  Hello a = party_hello(0), b = party_hello(1);
  b.session_id[0] = 9;
  EXPECT_EQ(hello_mismatch(a, b), "session");
  b.role = Role::kClient;
  EXPECT_EQ(hello_mismatch(a, b), "session");
  a.mode = b.mode = Mode::kSemiHonest;
  EXPECT_EQ(hello_mismatch(a, b), "");
  b.n_bits = 64;
  EXPECT_EQ(hello_mismatch(a, b), "N");
}

// Connects a pair of TCP channels over localhost.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> tcp_pair() {
  TcpListener l("127.0.0.1:0");
  TcpNetwork net;
  auto dialer = net.dial("127.0.0.1:" + std::to_string(l.port()), std::chrono::seconds(5));
  auto accepted = l.accept(std::chrono::seconds(5));
  return {std::move(accepted), std::move(dialer)};
}

TEST(TransportTest, TcpCarriesFramesInOrder) {
  auto [a, b] = tcp_pair();
  for (std::uint8_t i = 0; i < 50; ++i) a->send(MessageType::kSync, Bytes(i, i));
  for (std::uint8_t i = 0; i < 50; ++i) {
    Frame f = b->recv(std::chrono::seconds(5));
    ASSERT_EQ(f.payload, Bytes(i, i));
  }
  EXPECT_EQ(a->frames_sent(), 50u);
  EXPECT_EQ(b->frames_received(), 50u);
}

TEST(TransportTest, ClosedPeerIsConnectionLost) {
  auto [a, b] = tcp_pair();
  a.reset();
  EXPECT_EQ(kind_of([&] { b->recv(std::chrono::seconds(5)); }), ErrorKind::kConnectionLost);
  auto [c, d] = make_loopback_pair();
  c->close();
  EXPECT_EQ(kind_of([&] { d->recv(std::chrono::seconds(5)); }), ErrorKind::kConnectionLost);
}

TEST(TransportTest, UnreachableIsConnectError) {
  TcpNetwork net;
  EXPECT_EQ(kind_of([&] { net.dial("127.0.0.1:1", std::chrono::milliseconds(200)); }),
            ErrorKind::kConnectError);
  LoopbackNetwork lo;
  EXPECT_EQ(kind_of([&] { lo.dial("nowhere", std::chrono::milliseconds(50)); }),
            ErrorKind::kConnectError);
}

TEST(TransportTest, LoopbackNetworkListenDial) {
  LoopbackNetwork net;
  auto l = net.listen("p0");
  auto c = net.dial("p0", std::chrono::seconds(1));
  auto s = l->accept(std::chrono::seconds(1));
  ASSERT_TRUE(s);
  c->send(MessageType::kHello, Bytes{1});
  EXPECT_EQ(s->recv(std::chrono::seconds(1)).payload, Bytes{1});
  EXPECT_EQ(l->accept(std::chrono::milliseconds(10)), nullptr);
}

// The same multiplication workload yields the same results and the same
// frame transcript over TCP and over loopback.
TEST(TransportTest, TcpAndLoopbackAreSubstitutable) {
  ProtocolConfig cfg = testing::make_config(kPrime128, Mode::kAuthenticated);
  const Field& f = cfg.field;
  Csprng rng;
  const std::size_t n = 300;
  auto dealt = testing::deal_in_memory({n, 0, 0}, cfg, rng);
  std::vector<FieldElement> xs;
  std::array<std::vector<Share>, 2> sh;
  for (std::size_t i = 0; i < n; ++i) {
    xs.push_back(f.sample(rng));
    SharePair p = share_for_mode(cfg, xs.back(), dealt.session.mac_key, rng);
    sh[0].push_back(p[0]);
    sh[1].push_back(p[1]);
  }
  auto run = [&](std::unique_ptr<Channel> c0, std::unique_ptr<Channel> c1) {
    std::array<std::unique_ptr<Channel>, 2> ch{std::move(c0), std::move(c1)};
    std::array<std::vector<FieldElement>, 2> out;
    auto body = [&](int p) {
      auto i = static_cast<std::size_t>(p);
      ch[i]->set_recording(true);
      TripleStore store = dealt.store(p, cfg);
      ProtocolSession s(cfg, p, *ch[i], store, dealt.alpha_share(p), std::chrono::seconds(10));
      out[i] = s.open(s.mul(sh[i], sh[i]));
      s.mac_check();
    };
    std::thread t(body, 1);
    body(0);
    t.join();
    std::vector<TranscriptEntry> tr = ch[0]->transcript();
    return std::make_pair(out[0], tr);
  };
  auto [lp0, lp1] = make_loopback_pair();
  auto [loop_out, loop_tr] = run(std::move(lp0), std::move(lp1));
  auto [tc0, tc1] = tcp_pair();
  auto [tcp_out, tcp_tr] = run(std::move(tc0), std::move(tc1));
  for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(loop_out[i], f.mul(xs[i], xs[i]));
  EXPECT_EQ(loop_out, tcp_out);
  // Outgoing entries are deterministic; incoming interleave with them.
  auto outgoing = [](const std::vector<TranscriptEntry>& t) {
    std::vector<TranscriptEntry> o;
    for (const auto& e : t) {
      if (e.outgoing) o.push_back(e);
    }
    return o;
  };
  EXPECT_EQ(outgoing(loop_tr), outgoing(tcp_tr));
  EXPECT_EQ(loop_tr.size(), tcp_tr.size());
}

}  // namespace
}  // namespace cdss
