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

#include "cdss/field.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/miller_rabin.hpp>

#include <array>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "test_support.hpp"

namespace cdss {
namespace {

using boost::multiprecision::cpp_int;

cpp_int to_big(u128 v) {
  cpp_int r = static_cast<std::uint64_t>(v >> 64);
  r <<= 64;
  r += static_cast<std::uint64_t>(v);
  return r;
}

FieldElement el(u128 v) { return FieldElement(v); }

TEST(FieldTest, SmallPrimeExamples) {
  Field f(101);
  EXPECT_EQ(f.add(el(70), el(50)), el(19));
  EXPECT_EQ(f.add(el(0), el(40)), el(40));
  EXPECT_EQ(f.add(el(60), el(41)), el(0));
  EXPECT_EQ(f.mul(el(10), el(21)), el(8));
  EXPECT_EQ(f.mul(el(1), el(77)), el(77));
  EXPECT_EQ(f.inv(el(2)), el(51));
  EXPECT_EQ(f.inv(el(1)), el(1));
  EXPECT_EQ(f.sub(el(3), el(5)), el(99));
  EXPECT_EQ(f.neg(el(1)), el(100));
  EXPECT_EQ(f.from_int(-1), el(100));
}

TEST(FieldTest, InverseOfZeroIsDivisionByZero) {
  Field f(101);
  try {
    f.inv(f.zero());
    FAIL() << "expected DivisionByZero";
  } catch (const CdssError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDivisionByZero);
  }
}

TEST(FieldTest, MersenneDoubling) {
  Field f(kMersenne61);
  FieldElement r = f.mul(el(u128{1} << 60), el(2));
  EXPECT_EQ(r, el(1));
  EXPECT_EQ(to_big(r.value()), (cpp_int(1) << 61) % to_big(kMersenne61));
}

TEST(FieldTest, FermatIdentityExhaustiveAt101) {
  Field f(101);
  for (u128 a = 1; a < 101; ++a) {
    EXPECT_EQ(f.mul(el(a), f.pow(el(a), 99)), f.one()) << static_cast<int>(a);
  }
}

class FieldPropertyTest : public ::testing::TestWithParam<u128> {};

TEST_P(FieldPropertyTest, RingAxiomsAndBigIntOracle) {
  Field f(GetParam());
  const cpp_int p = to_big(f.modulus());
  Csprng rng(Seed{1, 2, 3});
  for (int i = 0; i < 10000; ++i) {
    FieldElement a = f.sample(rng), b = f.sample(rng), c = f.sample(rng);
    EXPECT_EQ(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
    EXPECT_EQ(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
    ASSERT_EQ(to_big(f.mul(a, b).value()), (to_big(a.value()) * to_big(b.value())) % p);
    ASSERT_EQ(to_big(f.add(a, b).value()), (to_big(a.value()) + to_big(b.value())) % p);
    ASSERT_EQ(to_big(f.sub(a, b).value()), (to_big(a.value()) + p - to_big(b.value())) % p);
    if (!a.is_zero()) {
      ASSERT_EQ(f.mul(a, f.inv(a)), f.one());
    }
  }
  // Extremes exercise the carry paths.
  FieldElement top(f.modulus() - 1);
  EXPECT_EQ(f.add(top, top), FieldElement(f.modulus() - 2));
  EXPECT_EQ(f.mul(top, top), f.one());
}

TEST_P(FieldPropertyTest, EncodingRoundTripAndLayout) {
  Field f(GetParam());
  Csprng rng;
  std::array<std::uint8_t, kElementBytes> buf;
  for (int i = 0; i < 10000; ++i) {
    FieldElement a = f.sample(rng);
    f.encode(a, buf);
    ASSERT_EQ(f.decode(buf), a);
  }
  f.encode(el(0x0102), buf);
  EXPECT_EQ(buf[0], 0x02);
  EXPECT_EQ(buf[1], 0x01);
  for (std::size_t i = 2; i < kElementBytes; ++i) EXPECT_EQ(buf[i], 0);
}

INSTANTIATE_TEST_SUITE_P(Moduli, FieldPropertyTest,
                         ::testing::Values(kTinyPrime, kMersenne61, kPrime128));

TEST(FieldTest, DecodeRejectsNonCanonical) {
  Field f(101);
  std::array<std::uint8_t, kElementBytes> buf{};
  buf[0] = 101;
  EXPECT_THROW(f.decode(buf), CdssError);
}

TEST(FieldTest, SampleIsUniformAt101) {
  Field f(101);
  Csprng rng;
  std::vector<std::uint64_t> bins(101);
  for (int i = 0; i < 100000; ++i) {
    FieldElement x = f.sample(rng);
    ASSERT_LT(x.value(), 101u);
    ++bins[static_cast<std::size_t>(x.value())];
  }
  EXPECT_GT(testing::chi_square_uniform_pvalue(bins), 0.001);
}

TEST(FieldTest, SampleMeanAtTwo) {
  Field f(2);
  Csprng rng;
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(f.sample(rng).value());
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(FieldTest, SampleStaysInRangeFor128BitPrime) {
  Field f(kPrime128);
  Csprng rng;
  for (int i = 0; i < 10000; ++i) ASSERT_LT(f.sample(rng).value(), kPrime128);
}

TEST(PrimalityTest, AgreesWithSieveBelow100000) {
  const std::size_t n = 100000;
  std::vector<bool> composite(n, false);
  composite[0] = composite[1] = true;
  for (std::size_t i = 2; i * i < n; ++i) {
    if (!composite[i]) {
      for (std::size_t j = i * i; j < n; j += i) composite[j] = true;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    ASSERT_EQ(Field::is_probable_prime(i), !composite[i]) << i;
  }
}

TEST(PrimalityTest, ConfiguredModuli) {
  EXPECT_TRUE(Field::is_probable_prime(kPrime128));
  EXPECT_TRUE(Field::is_probable_prime(kMersenne61));
  // 2^128 - 159 is the largest prime below 2^128.
  for (u128 c = kPrime128 + 1; c != 0; ++c) EXPECT_FALSE(Field::is_probable_prime(c));
  // Carmichael number and a 128-bit semiprime.
  EXPECT_FALSE(Field::is_probable_prime(561));
  EXPECT_FALSE(Field::is_probable_prime(u128{kMersenne61} * 2305843009213693951ull));
  EXPECT_THROW(Field(100), CdssError);
}

TEST(PrimalityTest, AgreesWithBoostMillerRabin) {
  namespace mp = boost::multiprecision;
  std::mt19937_64 gen(17);
  auto big = [](u128 v) -> mp::cpp_int {
    mp::cpp_int x = static_cast<std::uint64_t>(v >> 64);
    return (x << 64) | static_cast<std::uint64_t>(v);
  };
  EXPECT_TRUE(mp::miller_rabin_test(big(kPrime128), 64, gen));
  EXPECT_TRUE(mp::miller_rabin_test(big(kMersenne61), 64, gen));
  for (u128 c = kPrime128 - 2000; c < kPrime128; ++c) {
    ASSERT_EQ(Field::is_probable_prime(c), mp::miller_rabin_test(big(c), 64, gen));
  }
}

TEST(DecimalTest, RoundTrip) {
  EXPECT_EQ(u128_to_string(kPrime128), "340282366920938463463374607431768211297");
  EXPECT_EQ(parse_u128("340282366920938463463374607431768211297"), kPrime128);
  EXPECT_EQ(parse_u128("0"), 0u);
  EXPECT_THROW(parse_u128("12a"), CdssError);
  EXPECT_THROW(parse_u128("340282366920938463463374607431768211456"), CdssError);
}

}  // namespace
}  // namespace cdss
