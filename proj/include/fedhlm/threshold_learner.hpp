// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedhlm/model_source.hpp"

namespace fedhlm {

/// LLM feedback for one adjudicated token.
struct RejectionFeedback {
  double beta = 0.0;
  TokenId token = 0;
  double uncertainty = 0.0;
};

struct LearnerConfig {
  double gamma = 10.0;   // sigmoid steepness
  double lambda = 0.01;  // communication regularizer
  double eta0 = 0.05;    // base learning rate
  double clamp_min = 0.0;
  double clamp_max = 1.0;

  void validate() const;
  bool operator==(const LearnerConfig &) const = default;
};

struct Threshold {
  double value = 0.5;
  int round_updated = 0;
};

struct ClientRoundStats {
  std::size_t transmitted_count = 0;  // n_k: every non-local outcome
  std::vector<RejectionFeedback> feedback;  // LLM-adjudicated tokens only
};

/// max(1 - llm[token] / slm[token], 0), with the SLM probability floored
/// at kProbFloor.
double rejection_probability(const TokenDistribution &slm,
                             const TokenDistribution &llm, TokenId token);

/// sum_t sigma(gamma (u_t - u_th)) * ((1 - beta_t)^2 + lambda)
double local_loss(std::span<const RejectionFeedback> records, double u_th,
                  const LearnerConfig &cfg);

/// Derivative of local_loss with respect to u_th. Never positive.
double loss_gradient(std::span<const RejectionFeedback> records, double u_th,
                     const LearnerConfig &cfg);

/// One clamped gradient step.
Threshold sgd_step(const Threshold &th, double grad, double eta,
                   const LearnerConfig &cfg = {});

/// eta0 / (1 + round)
double lr_schedule(double eta0, int round);

}  // namespace fedhlm
