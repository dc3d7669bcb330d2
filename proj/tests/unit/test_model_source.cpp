// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "fedhlm/model_source.hpp"
#include "unit/oracles.hpp"

using namespace fedhlm;

namespace {

double sum(const TokenDistribution &d) {
  return std::accumulate(d.probs().begin(), d.probs().end(), 0.0);
}

}  // namespace

TEST_CASE("argmax picks the largest entry, lowest index on ties") {
  CHECK(argmax_token(TokenDistribution::from_probs({0, 0, 1, 0})) == 2);
  CHECK(argmax_token(TokenDistribution::from_probs({0.5, 0.5})) == 0);
  CHECK(argmax_token(TokenDistribution::from_probs({0.1, 0.2, 0.7})) == 2);
}

TEST_CASE("argmax is invariant under positive rescaling") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    auto d = sample_peaked(32, static_cast<TokenId>(i % 32), 2.0, rng);
    std::vector<double> w(d.probs().begin(), d.probs().end());
    for (double &x : w) x *= 7.25;
    CHECK(argmax_token(TokenDistribution::normalized(w)) == argmax_token(d));
  }
}

TEST_CASE("distribution construction enforces the probability invariants") {
  CHECK_THROWS_AS(TokenDistribution::from_probs({0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(TokenDistribution::from_probs({-0.1, 1.1}), std::invalid_argument);
  CHECK_THROWS_AS(TokenDistribution::normalized({0.0, 0.0}), std::invalid_argument);
  auto c = TokenDistribution::from_probs({1.0, 0.0}).clamped();
  CHECK(c[1] > 0.0);
  CHECK(sum(c) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("agreement = 1 keeps argmax equal on every draw") {
  ModelProfile p;
  p.agreement = 1.0;
  p.vocab.size = 64;
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    auto pair = gen_distribution_pair(p, rng);
    REQUIRE(argmax_token(pair.slm) == argmax_token(pair.llm));
    CHECK(std::abs(sum(pair.slm) - 1.0) <= 1e-9);
    CHECK(std::abs(sum(pair.llm) - 1.0) <= 1e-9);
  }
}

TEST_CASE("argmax match rate converges to the agreement knob") {
  ModelProfile p;
  p.agreement = 0.7;
  p.vocab.size = 16;
  Rng rng(2024);
  const int n = 100000;
  int match = 0;
  for (int i = 0; i < n; ++i) {
    auto pair = gen_distribution_pair(p, rng);
    match += argmax_token(pair.slm) == argmax_token(pair.llm);
  }
  double rate = static_cast<double>(match) / n;
  CHECK(rate >= 0.69);
  CHECK(rate <= 0.71);
}

TEST_CASE("generation is a pure function of profile and seed") {
  ModelProfile p;
  p.vocab.size = 128;
  Rng a(77), b(77);
  for (int i = 0; i < 50; ++i) {
    auto x = gen_distribution_pair(p, a);
    auto y = gen_distribution_pair(p, b);
    CHECK(x.slm == y.slm);
    CHECK(x.llm == y.llm);
  }
}

TEST_CASE("restricted alternatives keep the LLM mode inside the range") {
  ModelProfile p;
  p.vocab.size = 64;
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    auto pair = gen_distribution_pair_at(p, 20, 4.0, 0.0, rng, TokenRange{16, 32});
    auto m = argmax_token(pair.llm);
    CHECK(m >= 16);
    CHECK(m < 32);
    CHECK(m != 20);
  }
  CHECK_THROWS(gen_distribution_pair_at(p, 40, 4.0, 0.5, rng, TokenRange{16, 32}));
}

TEST_CASE("sample_peaked puts the strict argmax on the mode") {
  Rng rng(9);
  for (double sharp : {0.05, 0.5, 5.0, 50.0}) {
    for (int i = 0; i < 100; ++i) {
      auto d = sample_peaked(100, 42, sharp, rng);
      CHECK(argmax_token(d) == 42);
      CHECK(std::abs(sum(d) - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("logit trace round trip") {
  VocabSpec vocab{6};
  ModelProfile p;
  p.vocab = vocab;
  Rng rng(1);
  std::vector<TraceRow> rows;
  for (TokenId t = 0; t < 3; ++t) rows.push_back({gen_distribution_pair(p, rng), t + 1});
  auto path = oracle::scratch_dir("trace") / "roundtrip.csv";
  write_logit_trace(path, rows, vocab);
  auto back = load_logit_trace(path, vocab);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].reference_token == rows[i].reference_token);
    CHECK(back[i].pair.slm == rows[i].pair.slm);
    CHECK(back[i].pair.llm == rows[i].pair.llm);
  }
}

TEST_CASE("malformed trace rows are rejected") {
  auto dir = oracle::scratch_dir("trace");
  auto write = [&](const std::string &name, const std::string &body) {
    auto path = dir / name;
    std::ofstream(path) << body;
    return path;
  };
  VocabSpec v4{4};

  auto expect = [&](const std::filesystem::path &path, TraceError::Kind kind) {
    try {
      load_logit_trace(path, v4);
      FAIL("expected TraceError");
    } catch (const TraceError &e) {
      CHECK(e.kind() == kind);
    }
  };

  expect(write("negative.csv",
               "# vocab=4\n0,0.5,0.5,-0.1,0.1,0.25,0.25,0.25,0.25\n"),
         TraceError::Kind::MalformedRow);
  expect(write("wide.csv",
               "# vocab=4\n0,0.2,0.2,0.2,0.2,0.2,0.2,0.2,0.2,0.2,0.2\n"),
         TraceError::Kind::VocabMismatch);
  expect(write("odd.csv", "# vocab=4\n0,0.25,0.25,0.25,0.25,1\n"),
         TraceError::Kind::MalformedRow);
  expect(write("unnormalized.csv",
               "# vocab=4\n0,0.3,0.3,0.3,0.3,0.25,0.25,0.25,0.25\n"),
         TraceError::Kind::MalformedRow);
  expect(write("garbage.csv",
               "# vocab=4\n0,abc,0.5,0.25,0.25,0.25,0.25,0.25,0.25\n"),
         TraceError::Kind::MalformedRow);
  expect(write("header.csv",
               "# vocab=5\n0,0.25,0.25,0.25,0.25,0.25,0.25,0.25,0.25\n"),
         TraceError::Kind::VocabMismatch);
  expect(dir / "does_not_exist.csv", TraceError::Kind::Io);
}
