#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "mvlab/rng.hpp"

using namespace mvlab;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("same key gives identical draws, prefixes agree") {
  StreamKey key{42, lane_id("test"), 3, 7, 11};
  const auto a = normal_draws(key, 64);
  const auto b = normal_draws(key, 64);
  CHECK(a == b);
  const auto prefix = normal_draws(key, 13);
  for (std::size_t i = 0; i < prefix.size(); ++i) CHECK(prefix[i] == a[i]);
  CHECK(normal_draws(key, 0).empty());
}

TEST_CASE("normal moments over 1e6 draws") {
  const std::size_t n = 1'000'000;
  const auto z = normal_draws(StreamKey{1, 2, 3, 4, 5}, n);
  double s = 0, s2 = 0;
  for (double v : z) {
    s += v;
    s2 += v * v;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
  // Var of the sample variance of N(0,1) is 2/n.
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("independent lanes are uncorrelated") {
  const std::size_t n = 100'000;
  StreamKey base{9, lane_id("corr"), 0, 0, 0};
  const auto a = normal_draws(base.with_particle(0), n);
  const auto b = normal_draws(base.with_particle(1), n);
  const auto c = normal_draws(base.with_step(1), n);
  auto corr = [n](const std::vector<double>& x, const std::vector<double>& y) {
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sxy += x[i] * y[i];
      sxx += x[i] * x[i];
      syy += y[i] * y[i];
    }
    return sxy / std::sqrt(sxx * syy);
  };
  CHECK(std::abs(corr(a, b)) < 0.01);
  CHECK(std::abs(corr(a, c)) < 0.01);
}

TEST_CASE("derive_seed separates children") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(5, 5) == derive_seed(5, 5));
}

TEST_CASE("shipped test vectors reproduce") {
  std::ifstream in(MVLAB_TEST_DATA_DIR "/rng_vectors.json");
  REQUIRE(in.good());
  const auto doc = nlohmann::json::parse(in);
  REQUIRE(doc.at("vectors").size() > 0);
  for (const auto& entry : doc.at("vectors")) {
    StreamKey key{entry.at("master_seed").get<std::uint64_t>(), entry.at("experiment").get<std::uint64_t>(),
                  entry.at("replicate").get<std::uint64_t>(), entry.at("particle").get<std::uint64_t>(),
                  entry.at("step").get<std::uint64_t>()};
    const auto draws = normal_draws(key, 8);
    const auto& expected = entry.at("normals");
    const auto& raw = entry.at("u32");
    CounterStream stream(key);
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(stream.next_u32() == raw[i].get<std::uint32_t>());
    for (std::size_t i = 0; i < 8; ++i) CHECK(draws[i] == doctest::Approx(expected[i].get<double>()).epsilon(1e-14));
  }
}
