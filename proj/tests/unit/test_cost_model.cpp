// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fedhlm/cost_model.hpp"

using namespace fedhlm;

TEST_CASE("expected cost examples") {
  CostModel m{1.0, 4.0};
  CHECK(expected_cost(1.0, m) == 1.0);
  CHECK(expected_cost(0.0, m) == 5.0);
  CHECK(expected_cost(0.5, m) == doctest::Approx(3.0));
  CHECK_THROWS(expected_cost(1.5, m));
}

TEST_CASE("expected cost is linear and strictly decreasing in p_hit") {
  CostModel m{2.0, 7.0};
  double prev = expected_cost(0.0, m);
  for (int i = 1; i <= 20; ++i) {
    double c = expected_cost(i / 20.0, m);
    CHECK(c < prev);
    CHECK(prev - c == doctest::Approx(m.c_llm / 20.0));
    prev = c;
  }
}

TEST_CASE("opportunistic rule") {
  CostModel m{1.0, 4.0};
  CHECK(should_attempt_p2p(0.3, m));
  CHECK_FALSE(should_attempt_p2p(0.2, m));
  CHECK(should_attempt_p2p(0.25, m));
  CHECK(opportunistic_cost(0.2, m) == 4.0);
  CHECK(opportunistic_cost(0.3, m) == doctest::Approx(expected_cost(0.3, m)));
}

TEST_CASE("cache hit curve") {
  CHECK(cache_hit_curve(0, 0.3) == 0.0);
  CHECK(cache_hit_curve(1, std::log(2.0)) == doctest::Approx(0.5));
  double prev = -1;
  for (std::size_t s = 0; s <= 3000; s += 50) {  // alpha S <= 30 stays below 1 in double
    double h = cache_hit_curve(s, 0.01);
    CHECK(h >= prev);
    CHECK(h < 1.0);
    prev = h;
  }
  CHECK_THROWS(cache_hit_curve(3, 0.0));
}

TEST_CASE("cache alpha fit recovers a known curve") {
  std::vector<double> sizes, hits;
  for (double s = 8; s <= 512; s *= 2) {
    sizes.push_back(s);
    hits.push_back(1.0 - std::exp(-0.013 * s));
  }
  auto fit = fit_cache_alpha(sizes, hits);
  CHECK(fit.alpha == doctest::Approx(0.013).epsilon(1e-6));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("p_hit estimate") {
  PHitEstimator empty(10);
  CHECK(empty.estimate() == 0.5);

  PHitEstimator e(10);
  for (int i = 0; i < 10; ++i) e.record(i < 7);
  CHECK(e.estimate() == doctest::Approx(0.7));
  for (int i = 0; i < 10; ++i) e.record(false);
  CHECK(e.estimate() == 0.0);

  PHitEstimator partial(10, 0.5);
  for (int i = 0; i < 9; ++i) partial.record(true);
  CHECK(partial.estimate() == 0.5);  // prior until the window fills
  partial.record(true);
  CHECK(partial.estimate() == 1.0);
  CHECK(partial.observed() == 10);
}
