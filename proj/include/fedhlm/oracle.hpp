// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "fedhlm/model_source.hpp"
#include "fedhlm/random.hpp"

namespace fedhlm {

enum class Adjudication { Accept, RejectResample };

struct AdjudicationResult {
  Adjudication decision = Adjudication::Accept;
  TokenId final_token = 0;
  double beta = 0.0;
};

/// Distribution the LLM resamples from after a rejection:
/// norm(max(llm - slm, 0)), or llm itself when that residual is empty.
TokenDistribution residual_distribution(const TokenDistribution &slm,
                                        const TokenDistribution &llm);

/// Cloud-side verdict on an escalated token. Rejects with probability
/// beta = rejection_probability(slm, llm, token) and then resamples from
/// the residual distribution, so accepted-or-resampled tokens follow llm.
AdjudicationResult llm_adjudicate(const TokenDistribution &slm,
                                  const TokenDistribution &llm, TokenId token,
                                  Rng &rng);

}  // namespace fedhlm
