// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <span>

namespace fedhlm {

/// Per-token communication costs. The latency fields and c_uplink are
/// carried through to reports and never feed a routing decision.
struct CostModel {
  double c_p2p = 1.0;
  double c_llm = 10.0;
  double c_uplink = 0.0;
  double tau_slm = 0.0;
  double tau_llm = 0.0;
  double tau_uplink = 0.0;

  void validate() const;
  bool operator==(const CostModel &) const = default;
};

struct CacheModel {
  double alpha_fit = 0.01;
  std::size_t size = 256;
};

/// (1 - p_hit)(C_p2p + C_llm) + p_hit C_p2p
double expected_cost(double p_hit, const CostModel &model);

/// p_hit >= C_p2p / C_llm
bool should_attempt_p2p(double p_hit, const CostModel &model);

/// Expected per-token cost when P2P is attempted only if should_attempt_p2p
/// says so, and the token goes straight to the LLM otherwise.
double opportunistic_cost(double p_hit, const CostModel &model);

/// H(S) = 1 - exp(-alpha S)
double cache_hit_curve(std::size_t size, double alpha);

struct CacheFit {
  double alpha = 0.0;
  double r_squared = 0.0;
};

/// Fits H(S) = 1 - exp(-alpha S) by least squares on log(1 - H) = -alpha S
/// (a line through the origin). r_squared is measured in that log space.
CacheFit fit_cache_alpha(std::span<const double> sizes,
                         std::span<const double> hit_ratios);

/// Sliding-window estimate of the peer/cache success probability.
class PHitEstimator {
 public:
  explicit PHitEstimator(std::size_t window = 50, double prior = 0.5);

  void record(bool success);

  /// Success fraction over the last `window` outcomes, or the prior while
  /// fewer than `window` outcomes have been seen.
  double estimate() const;

  std::size_t observed() const { return history_.size(); }

 private:
  std::size_t window_;
  double prior_;
  std::deque<bool> history_;
  std::size_t successes_ = 0;
};

}  // namespace fedhlm
