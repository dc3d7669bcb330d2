// SPDX-License-Identifier: Apache-2.0

#include "fedhlm/cost_model.hpp"

#include <cmath>
#include <algorithm>
#include <stdexcept>
#include <vector>

namespace fedhlm {

void CostModel::validate() const {
  if (!(c_llm > 0.0)) throw std::invalid_argument("c_llm must be > 0");
  if (!(c_p2p >= 0.0) || !(c_uplink >= 0.0)) {
    throw std::invalid_argument("costs must be >= 0");
  }
  if (!(tau_slm >= 0.0) || !(tau_llm >= 0.0) || !(tau_uplink >= 0.0)) {
    throw std::invalid_argument("latencies must be >= 0");
  }
}

double expected_cost(double p_hit, const CostModel &model) {
  if (!(p_hit >= 0.0 && p_hit <= 1.0)) {
    throw std::invalid_argument("p_hit must lie in [0,1]");
  }
  return (1.0 - p_hit) * (model.c_p2p + model.c_llm) + p_hit * model.c_p2p;
}

bool should_attempt_p2p(double p_hit, const CostModel &model) {
  if (!(model.c_llm > 0.0)) throw std::invalid_argument("c_llm must be > 0");
  // p_hit >= c_p2p / c_llm, compared without the division
  return p_hit * model.c_llm >= model.c_p2p;
}

double opportunistic_cost(double p_hit, const CostModel &model) {
  return should_attempt_p2p(p_hit, model) ? expected_cost(p_hit, model)
                                          : model.c_llm;
}

double cache_hit_curve(std::size_t size, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  return -std::expm1(-alpha * static_cast<double>(size));
}

CacheFit fit_cache_alpha(std::span<const double> sizes,
                         std::span<const double> hit_ratios) {
  if (sizes.size() != hit_ratios.size() || sizes.empty()) {
    throw std::invalid_argument("fit needs matching, non-empty samples");
  }
  const std::size_t n = sizes.size();

  // log(1 - H) = -alpha S is linear through the origin in S.
  std::vector<double> y(n);
  double sy = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double h = hit_ratios[i];
    if (!(h >= 0.0 && h <= 1.0)) throw std::invalid_argument("hit ratio outside [0,1]");
    y[i] = -std::log1p(-std::min(h, 1.0 - 1e-12));
    sy += sizes[i] * y[i];
    ss += sizes[i] * sizes[i];
  }
  if (!(ss > 0.0)) throw std::invalid_argument("fit needs a positive size");

  CacheFit fit;
  fit.alpha = sy / ss;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  double res = 0.0, tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.alpha * sizes[i];
    res += r * r;
    tot += (y[i] - mean) * (y[i] - mean);
  }
  fit.r_squared = tot > 0.0 ? 1.0 - res / tot : (res == 0.0 ? 1.0 : 0.0);
  return fit;
}

PHitEstimator::PHitEstimator(std::size_t window, double prior)
    : window_(window), prior_(prior) {
  if (window == 0) throw std::invalid_argument("window must be >= 1");
  if (!(prior >= 0.0 && prior <= 1.0)) {
    throw std::invalid_argument("prior must lie in [0,1]");
  }
}

void PHitEstimator::record(bool success) {
  history_.push_back(success);
  if (success) ++successes_;
  if (history_.size() > window_) {
    if (history_.front()) --successes_;
    history_.pop_front();
  }
}

double PHitEstimator::estimate() const {
  if (history_.size() < window_) return prior_;
  return static_cast<double>(successes_) / static_cast<double>(window_);
}

}  // namespace fedhlm
