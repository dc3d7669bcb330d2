// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedhlm/random.hpp"

namespace fedhlm {

using ClientId = std::size_t;
using ClusterId = std::size_t;

/// Static client -> cluster assignment.
struct ClusterTopology {
  std::size_t num_clients = 20;
  std::size_t num_clusters = 4;
  std::vector<ClusterId> assignment;  // indexed by client id

  /// Contiguous blocks: client k goes to cluster floor(k * M / K).
  static ClusterTopology contiguous(std::size_t num_clients,
                                    std::size_t num_clusters);

  std::vector<ClientId> members(ClusterId cluster) const;
  void validate() const;
  bool operator==(const ClusterTopology &) const = default;
};

struct PartitionSpec {
  double dirichlet_alpha = 10.0;
  std::size_t num_classes = 4;
  std::size_t tokens_per_client = 900;

  void validate() const;
  bool operator==(const PartitionSpec &) const = default;
};

/// Per-client class mixture, indexed by client id.
using ClassMixtures = std::vector<std::vector<double>>;

/// Each client draws a class mixture from Dirichlet(alpha * 1).
ClassMixtures dirichlet_partition(const PartitionSpec &spec,
                                  const ClusterTopology &topology, Rng &rng);

struct WeightedThreshold {
  double value = 0.0;
  std::size_t weight = 0;  // n_k
};

class AllWeightsZero : public std::runtime_error {
 public:
  AllWeightsZero()
      : std::runtime_error("cluster aggregation with all weights zero") {}
};

/// Sample-weighted mean sum(n_k u_k) / sum(n_k). Throws AllWeightsZero when
/// no client in the cluster transmitted.
double cluster_aggregate(std::span<const WeightedThreshold> thresholds);

/// Unweighted mean over clusters.
double global_aggregate(std::span<const double> cluster_thresholds);

struct AggregationReport {
  std::vector<double> cluster_thresholds;
  double global_threshold = 0.0;
  int round = 0;
};

/// Runs both aggregation levels for one round. A cluster whose clients all
/// have n_k = 0 keeps its entry from `previous_cluster_thresholds`.
AggregationReport aggregate_round(const ClusterTopology &topology,
                                  std::span<const double> client_thresholds,
                                  std::span<const std::size_t> transmitted,
                                  std::span<const double> previous_cluster_thresholds,
                                  int round);

}  // namespace fedhlm
