// SPDX-License-Identifier: Apache-2.0

#include "fedhlm/federation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <utility>

namespace fedhlm {

ClusterTopology ClusterTopology::contiguous(std::size_t num_clients,
                                            std::size_t num_clusters) {
  ClusterTopology t;
  t.num_clients = num_clients;
  t.num_clusters = num_clusters;
  t.assignment.resize(num_clients);
  for (std::size_t k = 0; k < num_clients; ++k) {
    t.assignment[k] = (num_clients == 0) ? 0 : k * num_clusters / num_clients;
  }
  return t;
}

std::vector<ClientId> ClusterTopology::members(ClusterId cluster) const {
  std::vector<ClientId> out;
  for (std::size_t k = 0; k < assignment.size(); ++k) {
    if (assignment[k] == cluster) out.push_back(k);
  }
  return out;
}

void ClusterTopology::validate() const {
  if (num_clients == 0) throw std::invalid_argument("num_clients must be >= 1");
  if (num_clusters == 0) {
    throw std::invalid_argument("num_clusters must be >= 1");
  }
  if (num_clusters > num_clients) {
    throw std::invalid_argument("more clusters than clients");
  }
  if (assignment.size() != num_clients) {
    throw std::invalid_argument("assignment size != num_clients");
  }
  std::vector<std::size_t> count(num_clusters, 0);
  for (ClusterId c : assignment) {
    if (c >= num_clusters) throw std::invalid_argument("cluster id out of range");
    ++count[c];
  }
  if (std::find(count.begin(), count.end(), 0) != count.end()) {
    throw std::invalid_argument("empty cluster");
  }
}

void PartitionSpec::validate() const {
  if (!(dirichlet_alpha > 0.0)) {
    throw std::invalid_argument("dirichlet_alpha must be > 0");
  }
  if (num_classes == 0) throw std::invalid_argument("num_classes must be >= 1");
  if (tokens_per_client == 0) {
    throw std::invalid_argument("tokens_per_client must be >= 1");
  }
}

ClassMixtures dirichlet_partition(const PartitionSpec &spec,
                                  const ClusterTopology &topology, Rng &rng) {
  ClassMixtures mixtures(topology.num_clients,
                         std::vector<double>(spec.num_classes));
  std::gamma_distribution<double> gamma(spec.dirichlet_alpha, 1.0);
  for (auto &mix : mixtures) {
    double sum = 0.0;
    for (double &x : mix) {
      x = gamma(rng);
      sum += x;
    }
    if (sum > 0.0) {
      for (double &x : mix) x /= sum;
    } else {
      // every draw underflowed (tiny alpha): put all mass on one class
      std::uniform_int_distribution<std::size_t> pick(0, spec.num_classes - 1);
      std::fill(mix.begin(), mix.end(), 0.0);
      mix[pick(rng)] = 1.0;
    }
  }
  return mixtures;
}

// Both means sum in sorted order so that the result does not depend on the
// order of the inputs, bit for bit.
double cluster_aggregate(std::span<const WeightedThreshold> thresholds) {
  std::vector<std::pair<double, std::size_t>> terms;
  terms.reserve(thresholds.size());
  for (const auto &t : thresholds) terms.emplace_back(t.value, t.weight);
  std::sort(terms.begin(), terms.end());
  double num = 0.0;
  std::size_t den = 0;
  for (const auto &[value, weight] : terms) {
    num += static_cast<double>(weight) * value;
    den += weight;
  }
  if (den == 0) throw AllWeightsZero();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto &[value, weight] : terms) {
    if (weight == 0) continue;
    lo = std::min(lo, value);
    hi = std::max(hi, value);
  }
  return std::clamp(num / static_cast<double>(den), lo, hi);
}

double global_aggregate(std::span<const double> cluster_thresholds) {
  if (cluster_thresholds.empty()) {
    throw std::invalid_argument("global aggregation needs >= 1 cluster");
  }
  std::vector<double> sorted(cluster_thresholds.begin(), cluster_thresholds.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  double mean = sum / static_cast<double>(sorted.size());
  // guard the [min, max] bound against rounding
  return std::clamp(mean, sorted.front(), sorted.back());
}

AggregationReport aggregate_round(const ClusterTopology &topology,
                                  std::span<const double> client_thresholds,
                                  std::span<const std::size_t> transmitted,
                                  std::span<const double> previous_cluster_thresholds,
                                  int round) {
  AggregationReport report;
  report.round = round;
  report.cluster_thresholds.resize(topology.num_clusters);
  for (ClusterId c = 0; c < topology.num_clusters; ++c) {
    std::vector<WeightedThreshold> entries;
    for (ClientId k : topology.members(c)) {
      entries.push_back({client_thresholds[k], transmitted[k]});
    }
    try {
      report.cluster_thresholds[c] = cluster_aggregate(entries);
    } catch (const AllWeightsZero &) {
      report.cluster_thresholds[c] = previous_cluster_thresholds[c];
    }
  }
  report.global_threshold = global_aggregate(report.cluster_thresholds);
  return report;
}

}  // namespace fedhlm
