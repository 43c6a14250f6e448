#include <baw/nat.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracle_bits.hpp"

using baw::Nat;

TEST_CASE("length of small values") {
  CHECK(baw::len(0) == 0);
  CHECK(baw::len(1) == 1);
  CHECK(baw::len(2) == 2);
  CHECK(baw::len(3) == 2);
  CHECK(baw::len(8) == 4);
  CHECK(baw::len(255) == 8);
  CHECK(baw::len(256) == 9);
}

TEST_CASE("shift-style operations on fixed values") {
  CHECK(baw::msp(13, 2) == 3);   // 1101 -> 11
  CHECK(baw::lsp(13, 2) == 1);   // 1101 -> 01
  CHECK(baw::pad(3, 5) == 24);   // 11 followed by len(5)=3 zeros
  CHECK(baw::smash(3, 5) == 64); // 2^(2*3)
  CHECK(baw::bit(0, 5) == 1);
  CHECK(baw::bit(1, 5) == 0);
  CHECK(baw::bit(2, 5) == 1);
  CHECK(baw::bhat(3, 0, 53) == 5);  // 110101 low block
  CHECK(baw::bhat(3, 1, 53) == 6);  // 110101 high block
  CHECK(baw::bhat(0, 7, 99) == 0);  // width zero extracts nothing
}

TEST_CASE("monus and comparisons") {
  CHECK(baw::monus(7, 3) == 4);
  CHECK(baw::monus(3, 7) == 0);
  CHECK(baw::monus(3, 3) == 0);
  CHECK(baw::knot(0) == 1);
  CHECK(baw::knot(1) == 0);
  CHECK(baw::knot(9) == 0);
  // kleq(x, y) is the truth value of y <= x.
  CHECK(baw::kleq(5, 3) == 1);
  CHECK(baw::kleq(3, 5) == 0);
  CHECK(baw::kleq(4, 4) == 1);
  CHECK(baw::nat_max(3, 9) == 9);
  CHECK(baw::nat_min(3, 9) == 3);
  CHECK(baw::cond(0, 10, 20) == 10);
  CHECK(baw::cond(7, 10, 20) == 20);
}

TEST_CASE("pair code fixed values") {
  CHECK(baw::pair_code(0, 0) == 3);
  CHECK(baw::pair_code(1, 2) == 53);  // 110101
  CHECK(baw::pair_left(53) == 1);
  CHECK(baw::pair_right(53) == 2);
  CHECK(baw::is_pair(53));
  CHECK(baw::is_pair(3));
  CHECK_FALSE(baw::is_pair(0));
  CHECK_FALSE(baw::is_pair(1));
  CHECK_FALSE(baw::is_pair(5));
}

TEST_CASE("pair round trip over a grid") {
  for (unsigned x = 0; x < 64; ++x) {
    for (unsigned y = 0; y < 64; ++y) {
      Nat w = baw::pair_code(x, y);
      REQUIRE(baw::pair_left(w) == x);
      REQUIRE(baw::pair_right(w) == y);
      REQUIRE(baw::is_pair(w));
    }
  }
}

TEST_CASE("tuple projection with declared arity") {
  std::vector<Nat> parts = {4, 0, 9};
  Nat w = baw::tuple_code(parts);
  CHECK(baw::proj(w, 1, 3) == 4);
  CHECK(baw::proj(w, 2, 3) == 0);
  CHECK(baw::proj(w, 3, 3) == 9);
  // The same code read at arity 2 exposes the right spine whole.
  CHECK(baw::proj(w, 1, 2) == 4);
  CHECK(baw::proj(w, 2, 2) == baw::pair_code(0, 9));
}

TEST_CASE("epsilon literals parse and print") {
  auto e = baw::EpsilonSpec::parse("0.1b");
  CHECK(e == baw::EpsilonSpec::half());
  CHECK(e.to_string() == "0.1b");
  auto u = baw::EpsilonSpec::parse("1.0b");
  CHECK(u.unit);
  CHECK(u.to_string() == "1.0b");
  CHECK_THROWS(baw::EpsilonSpec::parse("0.b"));
  CHECK_THROWS(baw::EpsilonSpec::parse("0.0b"));
  CHECK_THROWS(baw::EpsilonSpec::parse("2.0b"));
}

TEST_CASE("growth function closed forms") {
  auto h = baw::EpsilonSpec::half();
  CHECK(baw::ell_eps(h, 0) == 1);
  CHECK(baw::ell_eps(h, 1) == 2);
  CHECK(baw::ell_eps(h, 255) == 4);   // lenlen = 4, ceil(4/2) = 2
  auto u = baw::EpsilonSpec::one();
  CHECK(baw::ell_eps(u, 255) == 16);  // 2^lenlen
  CHECK(baw::ell_eps(u, 0) == 1);
  // closed form 2^ceil(lenlen/2) across a range
  for (std::uint64_t x = 0; x < 65536; ++x) {
    Nat n2 = baw::lenlen(x);
    Nat expect = baw::pow2((n2 + 1) / 2);
    REQUIRE(baw::ell_eps(h, x) == expect);
  }
}

TEST_CASE("growth function bounds for other epsilons") {
  auto q = baw::EpsilonSpec::parse("0.01b");   // 1/4
  auto t = baw::EpsilonSpec::parse("0.11b");   // 3/4
  for (std::uint64_t x : {0ull, 1ull, 7ull, 255ull, 65535ull, 0xffffffffffull}) {
    Nat n2 = baw::lenlen(x);
    // ell_eps over-approximates 2^(eps * lenlen) and never exceeds 2^lenlen.
    REQUIRE(baw::ell_eps(q, x) >= baw::pow2((n2 + 3) / 4));
    REQUIRE(baw::ell_eps(q, x) <= baw::pow2(n2));
    REQUIRE(baw::ell_eps(t, x) >= baw::pow2((3 * n2 + 3) / 4));
    REQUIRE(baw::ell_eps(t, x) <= baw::pow2(n2));
  }
}

TEST_CASE("base and derived functions agree with the bit-string model") {
  std::mt19937_64 rng(20240817);
  auto draw = [&]() -> std::uint64_t {
    // Mix magnitudes so short and long operands both occur.
    switch (rng() % 4) {
      case 0: return rng() % 16;
      case 1: return rng() % 4096;
      case 2: return rng() & 0xffffffffull;
      default: return rng();
    }
  };
  for (int iter = 0; iter < 10000; ++iter) {
    std::uint64_t a = draw(), b = draw();
    Nat na = a, nb = b;
    oracle::Bits oa = oracle::from_u64(a), ob = oracle::from_u64(b);

    REQUIRE(Nat(na + nb) == oracle::to_nat(oracle::add(oa, ob)));
    REQUIRE(baw::monus(na, nb) == oracle::to_nat(oracle::sub(oa, ob)));
    REQUIRE(Nat(na * nb) == oracle::to_nat(oracle::mul(oa, ob)));
    REQUIRE(baw::half(na) == oracle::to_nat(oracle::half(oa)));
    REQUIRE(baw::len(na) == oracle::length(oa));
    REQUIRE((na <= nb) == (oracle::cmp(oa, ob) <= 0));

    REQUIRE(baw::pad(na, nb) == oracle::to_nat(oracle::pad(oa, ob)));
    std::size_t i = static_cast<std::size_t>(rng() % 72);
    REQUIRE(baw::msp(na, i) == oracle::to_nat(oracle::msp(oa, i)));
    REQUIRE(baw::lsp(na, i) == oracle::to_nat(oracle::lsp(oa, i)));
    std::size_t width = static_cast<std::size_t>(rng() % 9);
    std::size_t index = static_cast<std::size_t>(rng() % 9);
    REQUIRE(baw::bhat(width, index, na) ==
            oracle::to_nat(oracle::block(width, index, oa)));
    REQUIRE(baw::pair_code(na, nb) == oracle::to_nat(oracle::pair(oa, ob)));
    if (a < (1ull << 16) && b < (1ull << 16)) {
      REQUIRE(baw::smash(na, nb) == oracle::to_nat(oracle::smash(oa, ob)));
    }
  }
}

TEST_CASE("desk-scale width guard trips instead of allocating") {
  Nat big = baw::pow2(64);  // len = 65
  CHECK_THROWS_AS(baw::pow2(big), baw::resource_error);
}
