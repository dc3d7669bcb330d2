// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedhlm/cost_model.hpp"
#include "fedhlm/federation.hpp"
#include "fedhlm/model_source.hpp"
#include "fedhlm/peer_resolution.hpp"
#include "fedhlm/random.hpp"
#include "fedhlm/threshold_learner.hpp"
#include "fedhlm/uncertainty.hpp"

namespace fedhlm {

enum class Mode { FedHLM, RandHLM, UHLM };
enum class Stage { Local, PeerP2P, Edge, LLM };

const char *to_string(Mode mode);
const char *to_string(Stage stage);

class ConfigInvalid : public std::invalid_argument {
 public:
  ConfigInvalid(std::string key, const std::string &what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
  const std::string &key() const { return key_; }

 private:
  std::string key_;
};

/// How per-token distributions are produced.
///
/// Synthetic workloads give every class a disjoint region of the
/// vocabulary. At each timestep a cluster shares one context token whose
/// class is drawn from the cluster's mean mixture. A client adopts the
/// shared token with probability min(1, pi_k(c) / pibar(c)) and otherwise
/// draws a private class from the residual of its own mixture, so its
/// class marginal is exactly its Dirichlet mixture. Private tokens are
/// predicted with sharpness and LLM agreement scaled by the private_*
/// factors.
struct WorkloadConfig {
  double zipf_exponent = 1.0;
  double private_sharpness_scale = 0.1;
  double private_agreement_scale = 0.1;
  bool cache_local_tokens = false;
  std::string trace_path;  // non-empty: replay a logit trace instead

  void validate() const;
  bool operator==(const WorkloadConfig &) const = default;
};

struct SimulationConfig {
  ClusterTopology topology = ClusterTopology::contiguous(20, 4);
  PartitionSpec partition;
  int rounds = 30;
  int tokens_per_client_per_round = 30;
  ModelProfile profile;
  SamplerConfig sampler;
  UncertaintyKind routing_score = UncertaintyKind::McDisagreement;
  LearnerConfig learner;
  PeerConfig peer;
  CostModel cost;
  std::size_t p_hit_window = 50;
  double p_hit_prior = 0.5;
  Mode mode = Mode::FedHLM;
  double p_offload = 0.7;         // RandHLM
  double static_threshold = 0.1;  // UHLM
  double initial_threshold = 0.5;
  std::uint64_t seed = 42;
  std::uint64_t embedding_seed = kDefaultEmbeddingSeed;
  WorkloadConfig workload;
  unsigned threads = 1;  // execution only, never changes results

  /// Throws ConfigInvalid naming the offending key.
  void validate() const;
  bool operator==(const SimulationConfig &) const = default;

  std::size_t total_tokens() const {
    return topology.num_clients * static_cast<std::size_t>(rounds) *
           static_cast<std::size_t>(tokens_per_client_per_round);
  }
};

struct TokenOutcome {
  Stage stage = Stage::Local;
  TokenId predicted_token = 0;
  TokenId final_token = 0;
  double charged_cost = 0.0;
  double uncertainty = 0.0;
  std::optional<double> beta;  // LLM stage only
  bool correct = false;
  bool p2p_attempted = false;
  bool cache_hit = false;
};

struct TokenEvent {
  int round = 0;
  ClientId client = 0;
  int timestep = 0;
  TokenOutcome outcome;
};

struct StageCounts {
  std::size_t local = 0;
  std::size_t p2p = 0;
  std::size_t edge = 0;
  std::size_t llm = 0;

  std::size_t total() const { return local + p2p + edge + llm; }
  void add(Stage s);
  StageCounts &operator+=(const StageCounts &o);
};

struct RoundReport {
  int round = 0;
  std::vector<ClientRoundStats> per_client;
  StageCounts outcome_counts;
  std::vector<double> local_thresholds;  // after each client's SGD step
  std::vector<double> thresholds_after;  // after broadcast
  std::vector<double> cluster_thresholds;
  double global_threshold = 0.0;
  double total_cost = 0.0;
  double avg_uncertainty = 0.0;
  double rejection_rate = 0.0;  // mean beta over LLM-adjudicated tokens
  std::vector<TokenEvent> events;  // ordered by client, then timestep
};

struct ClientMetrics {
  double token_entropy = 0.0;    // normalized by ln|V|
  double cache_hit_ratio = 0.0;  // cache hits / transmitted tokens
  double reuse_ratio = 0.0;      // (cache + peer) hits / transmitted tokens
  std::size_t llm_token_count = 0;
  double accuracy = 0.0;
  std::size_t transmitted = 0;
};

struct SimulationReport {
  std::vector<RoundReport> rounds;
  std::vector<ClientMetrics> clients;
  ClassMixtures mixtures;

  StageCounts totals() const;
};

/// Per-client mutable state carried across rounds.
struct ClientState {
  ClientId id = 0;
  Threshold threshold;
  TokenCache cache;
  PHitEstimator p_hit;
  std::vector<TokenId> accepted;  // final tokens, in order
  std::size_t cache_hits = 0;
  std::size_t peer_hits = 0;
  std::size_t transmitted = 0;
  std::size_t llm_tokens = 0;
  std::size_t correct = 0;

  ClientState(ClientId id, const SimulationConfig &cfg);
};

/// Everything resolve_token needs besides the client and the token itself.
struct ResolveContext {
  const SimulationConfig &cfg;
  const EmbeddingTable &embeddings;
  std::span<const Embedding> peers;               // same cluster, excluding self
  std::span<const Embedding> neighbor_centroids;  // other clusters
  std::optional<TokenId> reference;               // trace label, if any
};

/// Routes one token through local -> peer/cache -> edge -> LLM for the
/// client's current threshold, updating cache, p_hit history and counters.
/// LLM outcomes append a feedback record to `stats`.
TokenOutcome resolve_token(ClientState &state, const TokenDistribution &slm,
                           const TokenDistribution &llm,
                           const ResolveContext &ctx, ClientRoundStats &stats,
                           Rng &rng);

/// Normalized Shannon entropy of the empirical token frequency.
/// Throws std::invalid_argument (EmptyHistory) on an empty history.
double client_token_entropy(std::span<const TokenId> history,
                            const VocabSpec &vocab);

class Simulator {
 public:
  explicit Simulator(SimulationConfig cfg);

  /// Processes one round for every client, applies local threshold
  /// updates, aggregates and broadcasts.
  RoundReport run_round(int round);

  SimulationReport finish();

  const SimulationConfig &config() const { return cfg_; }
  const ClassMixtures &mixtures() const { return mixtures_; }
  std::span<const ClientState> clients() const { return clients_; }

 private:
  struct Slot {
    DistributionPair pair;
    TokenId predicted = 0;
    std::optional<TokenId> reference;
  };

  void generate_round(int round, std::vector<std::vector<Slot>> &slots) const;
  void process_client(int round, ClientId k,
                      const std::vector<std::vector<Slot>> &slots,
                      const std::vector<std::vector<std::optional<Embedding>>> &centroids,
                      RoundReport &report);

  SimulationConfig cfg_;
  EmbeddingTable embeddings_;
  ClassMixtures mixtures_;
  std::vector<std::vector<double>> cluster_mixtures_;
  std::vector<TraceRow> trace_;
  std::vector<ClientState> clients_;
  std::vector<double> cluster_thresholds_;
  std::vector<RoundReport> rounds_;
};

/// Runs all configured rounds in whichever mode the config names.
SimulationReport run_simulation(const SimulationConfig &cfg);

/// Same as run_simulation but requires a baseline mode.
SimulationReport run_baseline(const SimulationConfig &cfg);

}  // namespace fedhlm
