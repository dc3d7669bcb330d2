// SPDX-License-Identifier: Apache-2.0

#include "fedhlm/oracle.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "fedhlm/threshold_learner.hpp"

namespace fedhlm {

namespace {

TokenId sample_from(const TokenDistribution &dist, Rng &rng) {
  auto p = dist.probs();
  double r = uniform01(rng);
  double acc = 0.0;
  TokenId last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i];
    last_positive = i;
    if (r < acc) return i;
  }
  return last_positive;
}

}  // namespace

TokenDistribution residual_distribution(const TokenDistribution &slm,
                                        const TokenDistribution &llm) {
  if (slm.size() != llm.size()) {
    throw std::invalid_argument("distribution sizes differ");
  }
  std::vector<double> r(llm.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = std::max(llm[i] - slm[i], 0.0);
    sum += r[i];
  }
  if (!(sum > 0.0)) return llm;
  return TokenDistribution::normalized(std::move(r));
}

AdjudicationResult llm_adjudicate(const TokenDistribution &slm,
                                  const TokenDistribution &llm, TokenId token,
                                  Rng &rng) {
  AdjudicationResult out;
  out.beta = rejection_probability(slm, llm, token);
  if (uniform01(rng) < out.beta) {
    out.decision = Adjudication::RejectResample;
    out.final_token = sample_from(residual_distribution(slm, llm), rng);
  } else {
    out.decision = Adjudication::Accept;
    out.final_token = token;
  }
  return out;
}

}  // namespace fedhlm
