// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fedhlm/threshold_learner.hpp"
#include "unit/oracles.hpp"

using namespace fedhlm;

namespace {

std::vector<RejectionFeedback> one(double u, double beta) { return {{beta, 0, u}}; }

}  // namespace

TEST_CASE("rejection probability examples") {
  auto slm = TokenDistribution::from_probs({0.5, 0.3, 0.2});
  auto llm = TokenDistribution::from_probs({0.25, 0.5, 0.25});
  CHECK(rejection_probability(slm, llm, 0) == doctest::Approx(0.5));
  CHECK(rejection_probability(slm, llm, 1) == 0.0);
  auto s2 = TokenDistribution::from_probs({0.8, 0.2});
  auto l2 = TokenDistribution::from_probs({0.1, 0.9});
  CHECK(rejection_probability(s2, l2, 0) == doctest::Approx(0.875));
  // zero SLM mass is floored instead of dividing by zero
  auto s3 = TokenDistribution::from_probs({1.0, 0.0});
  CHECK(rejection_probability(s3, l2, 1) == 0.0);
  CHECK_THROWS_AS(rejection_probability(s2, l2, 5), std::out_of_range);
}

TEST_CASE("local loss examples") {
  LearnerConfig c;
  c.lambda = 0.0;
  CHECK(local_loss(one(0.5, 0.2), 0.5, c) == doctest::Approx(0.32));
  LearnerConfig d;  // lambda 0.01
  CHECK(local_loss(one(1.0, 0.2), 0.0, LearnerConfig{1000.0, 0.01}) ==
        doctest::Approx(0.65));
  CHECK(local_loss({}, 0.3, d) == 0.0);
}

TEST_CASE("gradient examples") {
  LearnerConfig c;
  c.lambda = 0.0;
  CHECK(loss_gradient(one(0.5, 0.2), 0.5, c) == doctest::Approx(-1.6));
  CHECK(loss_gradient({}, 0.5, c) == 0.0);
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(31337);
  std::uniform_int_distribution<int> size(1, 50);
  for (double gamma : {1.0, 10.0, 50.0}) {
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<RejectionFeedback> recs;
      std::vector<oracle::Record> ref;
      int n = size(rng);
      for (int i = 0; i < n; ++i) {
        double u = uniform01(rng), b = uniform01(rng);
        recs.push_back({b, 0, u});
        ref.push_back({u, b});
      }
      double th = uniform01(rng);
      LearnerConfig cfg{gamma, 0.01};
      double g = loss_gradient(recs, th, cfg);
      double fd = oracle::fd_gradient(ref, th, gamma, 0.01);
      CHECK(std::abs(g - fd) <= 1e-6 * std::max(std::abs(fd), 1e-12) + 1e-12);
      CHECK(local_loss(recs, th, cfg) ==
            doctest::Approx(oracle::loss(ref, th, gamma, 0.01)).epsilon(1e-12));
    }
  }
}

TEST_CASE("gradient is never positive and the loss never increases in u_th") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RejectionFeedback> recs;
    for (int i = 0; i < 10; ++i) recs.push_back({uniform01(rng), 0, uniform01(rng)});
    LearnerConfig cfg{1.0 + 49.0 * uniform01(rng), uniform01(rng) * 0.1};
    double th = uniform01(rng);
    CHECK(loss_gradient(recs, th, cfg) <= 0.0);
    CHECK(local_loss(recs, th + 0.01, cfg) <= local_loss(recs, th, cfg));
  }
}

TEST_CASE("sgd step examples") {
  Threshold th{0.5, 0};
  auto n = sgd_step(th, -1.6, 0.01);
  CHECK(n.value == doctest::Approx(0.516));
  CHECK(n.round_updated == 1);
  CHECK(sgd_step({0.99, 3}, -5.0, 0.01).value == 1.0);
  CHECK(sgd_step({0.42, 0}, 0.0, 0.3).value == 0.42);
  CHECK(sgd_step({0.1, 0}, 100.0, 0.5).value == 0.0);
  CHECK_THROWS_AS(sgd_step(th, -1.0, 0.0), std::invalid_argument);
}

TEST_CASE("threshold stays in [0,1] over random update sequences") {
  Rng rng(19);
  Threshold th;
  for (int i = 0; i < 2000; ++i) {
    double g = (uniform01(rng) - 0.5) * 100.0;
    th = sgd_step(th, g, lr_schedule(0.5, i % 40));
    REQUIRE(th.value >= 0.0);
    REQUIRE(th.value <= 1.0);
  }
}

TEST_CASE("learning rate schedule") {
  CHECK(lr_schedule(0.05, 0) == 0.05);
  CHECK(lr_schedule(0.1, 1) == doctest::Approx(0.05));
  double s = 0.0, s2 = 0.0;
  const double eta0 = 0.2;
  const double bound = eta0 * eta0 * M_PI * M_PI / 6.0;
  for (int r = 0; r < 100000; ++r) {
    double e = lr_schedule(eta0, r);
    s += e;
    s2 += e * e;
    if (r == 999) CHECK(s > eta0 * 7.0);  // ~ eta0 (ln N + 0.577)
  }
  CHECK(s > eta0 * 12.0);
  CHECK(s2 <= bound);
  CHECK_THROWS(lr_schedule(0.0, 1));
  CHECK_THROWS(lr_schedule(0.1, -1));
}
