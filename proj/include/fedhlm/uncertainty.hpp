// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>

#include "fedhlm/model_source.hpp"
#include "fedhlm/random.hpp"

namespace fedhlm {

struct SamplerConfig {
  int num_samples = 10;     // K stochastic draws
  double temperature = 2.0;  // T > 1

  void validate() const;
  bool operator==(const SamplerConfig &) const = default;
};

enum class UncertaintyKind { Entropy, McDisagreement };

struct UncertaintyScore {
  double value = 0.0;
  UncertaintyKind kind = UncertaintyKind::McDisagreement;
};

struct RoutingDecision {
  bool transmit = false;
  std::optional<double> soft_value;
};

/// Shannon entropy in nats, with 0 ln 0 taken as 0.
UncertaintyScore entropy_score(const TokenDistribution &dist);

/// Fraction of `samples` that differ from `prediction`.
double disagreement_rate(std::span<const TokenId> samples, TokenId prediction);

/// Draws K tokens from the temperature-softened distribution (p_i^(1/T),
/// renormalized) and returns the fraction that disagree with the argmax.
UncertaintyScore mc_disagreement(const TokenDistribution &dist,
                                 const SamplerConfig &sampler, Rng &rng);

/// Retain locally iff u <= u_th.
RoutingDecision hard_route(const UncertaintyScore &u, double u_th);

/// Sigmoid relaxation of the routing decision, sigma(gamma (u - u_th)).
double soft_route(double u, double u_th, double gamma);

double sigmoid(double z);

}  // namespace fedhlm
