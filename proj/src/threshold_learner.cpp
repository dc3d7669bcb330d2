// SPDX-License-Identifier: Apache-2.0

#include "fedhlm/threshold_learner.hpp"

#include <algorithm>
#include <stdexcept>

#include "fedhlm/uncertainty.hpp"

namespace fedhlm {

void LearnerConfig::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(eta0 > 0.0)) throw std::invalid_argument("eta0 must be > 0");
  if (!(clamp_min <= clamp_max)) {
    throw std::invalid_argument("clamp_min must not exceed clamp_max");
  }
}

double rejection_probability(const TokenDistribution &slm,
                             const TokenDistribution &llm, TokenId token) {
  if (token >= slm.size() || token >= llm.size()) {
    throw std::out_of_range("token outside vocabulary");
  }
  const double denom = std::max(slm[token], kProbFloor);
  return std::clamp(1.0 - llm[token] / denom, 0.0, 1.0);
}

double local_loss(std::span<const RejectionFeedback> records, double u_th,
                  const LearnerConfig &cfg) {
  double loss = 0.0;
  for (const auto &r : records) {
    const double miss = 1.0 - r.beta;
    loss += sigmoid(cfg.gamma * (r.uncertainty - u_th)) *
            (miss * miss + cfg.lambda);
  }
  return loss;
}

double loss_gradient(std::span<const RejectionFeedback> records, double u_th,
                     const LearnerConfig &cfg) {
  double acc = 0.0;
  for (const auto &r : records) {
    // sigma(z) * sigma(-z) keeps precision in the tails where 1 - sigma(z)
    // would round to zero.
    const double z = cfg.gamma * (r.uncertainty - u_th);
    const double miss = 1.0 - r.beta;
    acc += sigmoid(z) * sigmoid(-z) * (miss * miss + cfg.lambda);
  }
  return -cfg.gamma * acc;
}

Threshold sgd_step(const Threshold &th, double grad, double eta,
                   const LearnerConfig &cfg) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  return {std::clamp(th.value - eta * grad, cfg.clamp_min, cfg.clamp_max),
          th.round_updated + 1};
}

double lr_schedule(double eta0, int round) {
  if (!(eta0 > 0.0)) throw std::invalid_argument("eta0 must be > 0");
  if (round < 0) throw std::invalid_argument("round must be >= 0");
  return eta0 / (1.0 + static_cast<double>(round));
}

}  // namespace fedhlm
