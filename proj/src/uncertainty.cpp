// SPDX-License-Identifier: Apache-2.0

#include "fedhlm/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace fedhlm {

void SamplerConfig::validate() const {
  if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
  if (!(temperature > 1.0)) {
    throw std::invalid_argument("temperature must be > 1");
  }
}

UncertaintyScore entropy_score(const TokenDistribution &dist) {
  double h = 0.0;
  for (double p : dist.probs()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return {std::max(h, 0.0), UncertaintyKind::Entropy};
}

double disagreement_rate(std::span<const TokenId> samples, TokenId prediction) {
  if (samples.empty()) return 0.0;
  auto differing = std::count_if(samples.begin(), samples.end(),
                                 [&](TokenId d) { return d != prediction; });
  return static_cast<double>(differing) / static_cast<double>(samples.size());
}

UncertaintyScore mc_disagreement(const TokenDistribution &dist,
                                 const SamplerConfig &sampler, Rng &rng) {
  const TokenId top = argmax_token(dist);
  const double inv_t = 1.0 / sampler.temperature;
  auto p = dist.probs();

  // Cumulative weights of the softened distribution; zero entries stay zero.
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i] > 0.0 ? std::pow(p[i], inv_t) : 0.0;
    cdf[i] = acc;
  }

  int differing = 0;
  for (int k = 0; k < sampler.num_samples; ++k) {
    double r = uniform01(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
    auto token = static_cast<TokenId>(
        std::min<std::ptrdiff_t>(it - cdf.begin(),
                                 static_cast<std::ptrdiff_t>(cdf.size()) - 1));
    if (token != top) ++differing;
  }
  return {static_cast<double>(differing) / sampler.num_samples,
          UncertaintyKind::McDisagreement};
}

RoutingDecision hard_route(const UncertaintyScore &u, double u_th) {
  return {u.value > u_th, std::nullopt};
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double soft_route(double u, double u_th, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
  return sigmoid(gamma * (u - u_th));
}

}  // namespace fedhlm
