// SPDX-License-Identifier: Apache-2.0

#include "fedhlm/sim_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "fedhlm/oracle.hpp"

namespace fedhlm {

namespace {

// stream tags for derive_seed
constexpr std::uint64_t kTagPartition = 1;
constexpr std::uint64_t kTagShared = 2;
constexpr std::uint64_t kTagGenerate = 3;
constexpr std::uint64_t kTagResolve = 4;

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn &&fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    const auto workers = std::min<std::size_t>(threads, n);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::size_t sample_index(std::span<const double> weights, Rng &rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double r = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last = i;
    if (r < acc) return i;
  }
  return last;
}

double routing_uncertainty(const TokenDistribution &slm,
                           const SimulationConfig &cfg, Rng &rng) {
  if (cfg.routing_score == UncertaintyKind::Entropy) {
    // scaled into [0,1] so it shares the threshold's range
    return entropy_score(slm).value /
           std::log(static_cast<double>(cfg.profile.vocab.size));
  }
  return mc_disagreement(slm, cfg.sampler, rng).value;
}

void require(bool ok, const char *key, const char *what) {
  if (!ok) throw ConfigInvalid(key, what);
}

template <typename Fn>
void forward(const char *key, Fn &&fn) {
  try {
    fn();
  } catch (const ConfigInvalid &) {
    throw;
  } catch (const std::invalid_argument &e) {
    throw ConfigInvalid(key, e.what());
  }
}

}  // namespace

const char *to_string(Mode mode) {
  switch (mode) {
    case Mode::FedHLM: return "fedhlm";
    case Mode::RandHLM: return "rand";
    case Mode::UHLM: return "uhlm";
  }
  return "?";
}

const char *to_string(Stage stage) {
  switch (stage) {
    case Stage::Local: return "local";
    case Stage::PeerP2P: return "p2p";
    case Stage::Edge: return "edge";
    case Stage::LLM: return "llm";
  }
  return "?";
}

void StageCounts::add(Stage s) {
  switch (s) {
    case Stage::Local: ++local; break;
    case Stage::PeerP2P: ++p2p; break;
    case Stage::Edge: ++edge; break;
    case Stage::LLM: ++llm; break;
  }
}

StageCounts &StageCounts::operator+=(const StageCounts &o) {
  local += o.local;
  p2p += o.p2p;
  edge += o.edge;
  llm += o.llm;
  return *this;
}

StageCounts SimulationReport::totals() const {
  StageCounts c;
  for (const auto &r : rounds) c += r.outcome_counts;
  return c;
}

void WorkloadConfig::validate() const {
  require(zipf_exponent >= 0.0, "workload.zipf_exponent", "must be >= 0");
  require(private_sharpness_scale > 0.0, "workload.private_sharpness_scale",
          "must be > 0");
  require(private_agreement_scale >= 0.0 && private_agreement_scale <= 1.0,
          "workload.private_agreement_scale", "must lie in [0, 1]");
}

void SimulationConfig::validate() const {
  require(topology.num_clients >= 1, "topology.num_clients", "must be >= 1");
  require(topology.num_clusters >= 1, "topology.num_clusters", "must be >= 1");
  require(topology.num_clusters <= topology.num_clients, "topology.num_clusters",
          "must not exceed num_clients");
  forward("topology.assignment", [&] { topology.validate(); });
  require(partition.dirichlet_alpha > 0.0, "partition.dirichlet_alpha",
          "must be > 0");
  require(partition.num_classes >= 1, "partition.num_classes", "must be >= 1");
  require(rounds >= 1, "sim.rounds", "must be >= 1");
  require(tokens_per_client_per_round >= 1, "sim.tokens_per_client_per_round",
          "must be >= 1");
  require(profile.vocab.size >= 2, "profile.vocab_size", "must be >= 2");
  require(profile.agreement >= 0.0 && profile.agreement <= 1.0,
          "profile.agreement", "must lie in [0,1]");
  require(profile.slm_sharpness > 0.0, "profile.slm_sharpness", "must be > 0");
  require(profile.llm_sharpness > 0.0, "profile.llm_sharpness", "must be > 0");
  require(2 * partition.num_classes <= profile.vocab.size, "partition.num_classes",
          "must leave at least two tokens per class");
  require(sampler.num_samples >= 1, "sampler.num_samples", "must be >= 1");
  require(sampler.temperature > 1.0, "sampler.temperature", "must be > 1");
  require(learner.gamma > 0.0, "learner.gamma", "must be > 0");
  require(learner.lambda >= 0.0, "learner.lambda", "must be >= 0");
  require(learner.eta0 > 0.0, "learner.eta0", "must be > 0");
  require(peer.similarity_threshold >= 0.0 && peer.similarity_threshold <= 1.0,
          "peer.similarity_threshold", "must lie in [0,1]");
  require(peer.edge_similarity_threshold >= 0.0 &&
              peer.edge_similarity_threshold <= 1.0,
          "peer.edge_similarity_threshold", "must lie in [0,1]");
  require(peer.embedding_dim >= 1, "peer.embedding_dim", "must be >= 1");
  require(peer.cache_capacity >= 1, "peer.cache_capacity", "must be >= 1");
  require(cost.c_llm > 0.0, "cost.c_llm", "must be > 0");
  require(cost.c_p2p >= 0.0, "cost.c_p2p", "must be >= 0");
  require(cost.c_uplink >= 0.0, "cost.c_uplink", "must be >= 0");
  require(cost.tau_slm >= 0.0, "cost.tau_slm", "must be >= 0");
  require(cost.tau_llm >= 0.0, "cost.tau_llm", "must be >= 0");
  require(cost.tau_uplink >= 0.0, "cost.tau_uplink", "must be >= 0");
  require(p_hit_window >= 1, "cost.p_hit_window", "must be >= 1");
  require(p_hit_prior >= 0.0 && p_hit_prior <= 1.0, "cost.p_hit_prior",
          "must lie in [0,1]");
  require(p_offload >= 0.0 && p_offload <= 1.0, "mode.p_offload",
          "must lie in [0,1]");
  require(static_threshold >= 0.0 && static_threshold <= 1.0,
          "mode.static_threshold", "must lie in [0,1]");
  require(initial_threshold >= 0.0 && initial_threshold <= 1.0,
          "sim.initial_threshold", "must lie in [0,1]");
  workload.validate();
}

ClientState::ClientState(ClientId client, const SimulationConfig &cfg)
    : id(client),
      threshold{cfg.mode == Mode::UHLM ? cfg.static_threshold
                                       : cfg.initial_threshold,
                0},
      cache(cfg.peer.cache_capacity),
      p_hit(cfg.p_hit_window, cfg.p_hit_prior) {}

TokenOutcome resolve_token(ClientState &state, const TokenDistribution &slm,
                           const TokenDistribution &llm,
                           const ResolveContext &ctx, ClientRoundStats &stats,
                           Rng &rng) {
  const SimulationConfig &cfg = ctx.cfg;
  TokenOutcome out;
  out.uncertainty = routing_uncertainty(slm, cfg, rng);
  out.predicted_token = argmax_token(slm);
  const TokenId reference = ctx.reference.value_or(argmax_token(llm));
  const TokenId x = out.predicted_token;

  auto finish = [&](TokenId final_token) {
    out.final_token = final_token;
    out.correct = final_token == reference;
    state.accepted.push_back(final_token);
    if (out.correct) ++state.correct;
    if (out.stage != Stage::Local) {
      ++state.transmitted;
      ++stats.transmitted_count;
    }
    if (out.stage != Stage::Local || cfg.workload.cache_local_tokens) {
      if (!out.cache_hit) {
        state.cache.insert(ctx.embeddings[final_token], final_token);
      }
    }
    return out;
  };

  if (cfg.mode == Mode::RandHLM) {
    if (uniform01(rng) < cfg.p_offload) {
      out.stage = Stage::LLM;
    } else {
      out.stage = Stage::Local;
      return finish(x);
    }
  } else if (!hard_route({out.uncertainty, UncertaintyKind::McDisagreement},
                         state.threshold.value)
                  .transmit) {
    out.stage = Stage::Local;
    return finish(x);
  }

  if (cfg.mode == Mode::FedHLM) {
    const Embedding &own = ctx.embeddings[x];
    out.p2p_attempted = should_attempt_p2p(state.p_hit.estimate(), cfg.cost);
    if (out.p2p_attempted) {
      if (auto hit = state.cache.lookup(own, cfg.peer.similarity_threshold)) {
        out.cache_hit = true;
        ++state.cache_hits;
        state.p_hit.record(true);
        out.stage = Stage::PeerP2P;
        out.charged_cost = cfg.cost.c_p2p;
        return finish(*hit);
      }
      if (peer_consensus(own, ctx.peers, cfg.peer) == PeerVerdict::AcceptLocal) {
        ++state.peer_hits;
        state.p_hit.record(true);
        out.stage = Stage::PeerP2P;
        out.charged_cost = cfg.cost.c_p2p;
        return finish(x);
      }
      state.p_hit.record(false);
    }
    if (edge_validate(own, ctx.neighbor_centroids, cfg.peer) ==
        EdgeVerdict::AcceptEdge) {
      out.stage = Stage::Edge;
      out.charged_cost = cfg.cost.c_p2p;
      return finish(x);
    }
  }

  out.stage = Stage::LLM;
  out.charged_cost =
      out.p2p_attempted ? cfg.cost.c_p2p + cfg.cost.c_llm : cfg.cost.c_llm;
  AdjudicationResult verdict = llm_adjudicate(slm, llm, x, rng);
  out.beta = verdict.beta;
  stats.feedback.push_back({verdict.beta, x, out.uncertainty});
  ++state.llm_tokens;
  return finish(verdict.final_token);
}

double client_token_entropy(std::span<const TokenId> history,
                            const VocabSpec &vocab) {
  if (history.empty()) throw std::invalid_argument("EmptyHistory");
  std::vector<std::size_t> freq(vocab.size, 0);
  for (TokenId t : history) ++freq.at(t);
  const double n = static_cast<double>(history.size());
  double h = 0.0;
  for (std::size_t f : freq) {
    if (f == 0) continue;
    double p = static_cast<double>(f) / n;
    h -= p * std::log(p);
  }
  return std::clamp(h / std::log(static_cast<double>(vocab.size)), 0.0, 1.0);
}

// --- Simulator ----------------------------------------------------------------

namespace {

SimulationConfig validated(SimulationConfig cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

Simulator::Simulator(SimulationConfig cfg)
    : cfg_(validated(std::move(cfg))),
      embeddings_(cfg_.profile.vocab, cfg_.peer.embedding_dim,
                  cfg_.embedding_seed) {
  cfg_.partition.tokens_per_client =
      static_cast<std::size_t>(cfg_.rounds) *
      static_cast<std::size_t>(cfg_.tokens_per_client_per_round);

  Rng part_rng = make_rng(cfg_.seed, {kTagPartition});
  mixtures_ = dirichlet_partition(cfg_.partition, cfg_.topology, part_rng);

  const std::size_t classes = cfg_.partition.num_classes;
  cluster_mixtures_.assign(cfg_.topology.num_clusters,
                           std::vector<double>(classes, 0.0));
  for (ClusterId c = 0; c < cfg_.topology.num_clusters; ++c) {
    auto members = cfg_.topology.members(c);
    for (ClientId k : members) {
      for (std::size_t i = 0; i < classes; ++i) {
        cluster_mixtures_[c][i] += mixtures_[k][i] / static_cast<double>(members.size());
      }
    }
  }

  if (!cfg_.workload.trace_path.empty()) {
    trace_ = load_logit_trace(cfg_.workload.trace_path, cfg_.profile.vocab);
    if (trace_.empty()) {
      throw ConfigInvalid("workload.trace_path", "trace has no rows");
    }
  }

  clients_.reserve(cfg_.topology.num_clients);
  for (ClientId k = 0; k < cfg_.topology.num_clients; ++k) {
    clients_.emplace_back(k, cfg_);
  }
  cluster_thresholds_.assign(cfg_.topology.num_clusters, cfg_.initial_threshold);
}

void Simulator::generate_round(int round,
                               std::vector<std::vector<Slot>> &slots) const {
  const std::size_t num_clients = cfg_.topology.num_clients;
  const auto steps = static_cast<std::size_t>(cfg_.tokens_per_client_per_round);
  slots.assign(num_clients, std::vector<Slot>(steps));

  if (!trace_.empty()) {
    for (ClientId k = 0; k < num_clients; ++k) {
      for (std::size_t t = 0; t < steps; ++t) {
        std::size_t idx = (static_cast<std::size_t>(round) * num_clients + k) * steps + t;
        const TraceRow &row = trace_[idx % trace_.size()];
        Slot &s = slots[k][t];
        s.pair = row.pair;
        s.predicted = argmax_token(row.pair.slm);
        s.reference = row.reference_token;
      }
    }
    return;
  }

  const std::size_t vocab = cfg_.profile.vocab.size;
  const std::size_t classes = cfg_.partition.num_classes;
  const std::size_t region = vocab / classes;
  std::vector<double> zipf(region);
  for (std::size_t i = 0; i < region; ++i) {
    zipf[i] = 1.0 / std::pow(static_cast<double>(i + 1), cfg_.workload.zipf_exponent);
  }

  // shared context per cluster and timestep: (class, token)
  struct Shared {
    std::size_t topic;
    TokenId token;
  };
  std::vector<std::vector<Shared>> shared(cfg_.topology.num_clusters,
                                          std::vector<Shared>(steps));
  for (ClusterId c = 0; c < cfg_.topology.num_clusters; ++c) {
    for (std::size_t t = 0; t < steps; ++t) {
      Rng rng = make_rng(cfg_.seed, {kTagShared, c, static_cast<std::uint64_t>(round), t});
      std::size_t topic = sample_index(cluster_mixtures_[c], rng);
      shared[c][t] = {topic, topic * region + sample_index(zipf, rng)};
    }
  }

  parallel_for(num_clients, cfg_.threads, [&](std::size_t k) {
    Rng rng = make_rng(cfg_.seed, {kTagGenerate, k, static_cast<std::uint64_t>(round)});
    const auto &mix = mixtures_[k];
    const auto &pibar = cluster_mixtures_[cfg_.topology.assignment[k]];
    std::vector<double> residual(classes);
    for (std::size_t i = 0; i < classes; ++i) {
      residual[i] = std::max(mix[i] - pibar[i], 0.0);
    }
    const bool has_residual =
        std::any_of(residual.begin(), residual.end(), [](double r) { return r > 0.0; });

    for (std::size_t t = 0; t < steps; ++t) {
      const Shared &ctx = shared[cfg_.topology.assignment[k]][t];
      const double adopt = pibar[ctx.topic] > 0.0
                               ? std::min(1.0, mix[ctx.topic] / pibar[ctx.topic])
                               : 0.0;
      TokenId mode;
      double sharpness = cfg_.profile.slm_sharpness;
      double agreement = cfg_.profile.agreement;
      if (uniform01(rng) < adopt) {
        mode = ctx.token;
      } else {
        std::size_t cls = has_residual ? sample_index(residual, rng)
                                       : sample_index(mix, rng);
        mode = cls * region + sample_index(zipf, rng);
        sharpness *= cfg_.workload.private_sharpness_scale;
        agreement *= cfg_.workload.private_agreement_scale;
      }
      Slot &s = slots[k][t];
      s.pair = gen_distribution_pair_at(cfg_.profile, mode, sharpness, agreement, rng,
                                        TokenRange{mode / region * region,
                                                   mode / region * region + region});
      s.predicted = argmax_token(s.pair.slm);
    }
  });
}

void Simulator::process_client(
    int round, ClientId k, const std::vector<std::vector<Slot>> &slots,
    const std::vector<std::vector<std::optional<Embedding>>> &centroids,
    RoundReport &report) {
  ClientState &state = clients_[k];
  ClientRoundStats &stats = report.per_client[k];
  Rng rng = make_rng(cfg_.seed, {kTagResolve, k, static_cast<std::uint64_t>(round)});
  const ClusterId cluster = cfg_.topology.assignment[k];
  const auto members = cfg_.topology.members(cluster);
  const bool collaborative = cfg_.mode == Mode::FedHLM;

  std::vector<Embedding> peers;
  std::vector<Embedding> neighbors;
  auto &events = report.events;  // pre-sized; this client owns its block
  const auto steps = static_cast<std::size_t>(cfg_.tokens_per_client_per_round);

  for (std::size_t t = 0; t < steps; ++t) {
    peers.clear();
    neighbors.clear();
    if (collaborative) {
      for (ClientId j : members) {
        if (j != k) peers.push_back(embeddings_[slots[j][t].predicted]);
      }
      for (ClusterId c = 0; c < cfg_.topology.num_clusters; ++c) {
        if (c != cluster && centroids[t][c]) neighbors.push_back(*centroids[t][c]);
      }
    }
    const Slot &slot = slots[k][t];
    ResolveContext ctx{cfg_, embeddings_, peers, neighbors, slot.reference};
    TokenEvent &ev = events[k * steps + t];
    ev.round = round;
    ev.client = k;
    ev.timestep = static_cast<int>(t);
    ev.outcome = resolve_token(state, slot.pair.slm, slot.pair.llm, ctx, stats, rng);
  }

  if (collaborative) {
    double grad = loss_gradient(stats.feedback, state.threshold.value, cfg_.learner);
    state.threshold = sgd_step(state.threshold, grad,
                               lr_schedule(cfg_.learner.eta0, round), cfg_.learner);
  }
  report.local_thresholds[k] = state.threshold.value;
}

RoundReport Simulator::run_round(int round) {
  const std::size_t num_clients = cfg_.topology.num_clients;
  const auto steps = static_cast<std::size_t>(cfg_.tokens_per_client_per_round);

  std::vector<std::vector<Slot>> slots;
  generate_round(round, slots);

  // cluster centroids per timestep, for edge validation
  std::vector<std::vector<std::optional<Embedding>>> centroids(
      steps, std::vector<std::optional<Embedding>>(cfg_.topology.num_clusters));
  if (cfg_.mode == Mode::FedHLM && cfg_.topology.num_clusters > 1) {
    std::vector<std::vector<ClientId>> members(cfg_.topology.num_clusters);
    for (ClusterId c = 0; c < cfg_.topology.num_clusters; ++c) {
      members[c] = cfg_.topology.members(c);
    }
    std::vector<Embedding> group;
    for (std::size_t t = 0; t < steps; ++t) {
      for (ClusterId c = 0; c < cfg_.topology.num_clusters; ++c) {
        group.clear();
        for (ClientId j : members[c]) group.push_back(embeddings_[slots[j][t].predicted]);
        try {
          centroids[t][c] = centroid(group);
        } catch (const std::domain_error &) {
          // members cancel out exactly; no usable centroid
        }
      }
    }
  }

  RoundReport report;
  report.round = round;
  report.per_client.resize(num_clients);
  report.local_thresholds.resize(num_clients);
  report.events.resize(num_clients * steps);

  parallel_for(num_clients, cfg_.threads, [&](std::size_t k) {
    process_client(round, k, slots, centroids, report);
  });

  std::vector<std::size_t> transmitted(num_clients);
  for (ClientId k = 0; k < num_clients; ++k) {
    transmitted[k] = report.per_client[k].transmitted_count;
  }

  switch (cfg_.mode) {
    case Mode::FedHLM: {
      AggregationReport agg = aggregate_round(cfg_.topology, report.local_thresholds,
                                              transmitted, cluster_thresholds_, round);
      cluster_thresholds_ = agg.cluster_thresholds;
      for (auto &c : clients_) c.threshold.value = agg.global_threshold;
      report.cluster_thresholds = std::move(agg.cluster_thresholds);
      report.global_threshold = agg.global_threshold;
      break;
    }
    case Mode::UHLM:
      report.cluster_thresholds.assign(cfg_.topology.num_clusters, cfg_.static_threshold);
      report.global_threshold = cfg_.static_threshold;
      break;
    case Mode::RandHLM:
      report.cluster_thresholds.assign(cfg_.topology.num_clusters,
                                       std::numeric_limits<double>::quiet_NaN());
      report.global_threshold = std::numeric_limits<double>::quiet_NaN();
      break;
  }
  report.thresholds_after.resize(num_clients);
  for (ClientId k = 0; k < num_clients; ++k) {
    report.thresholds_after[k] = clients_[k].threshold.value;
  }

  double u_sum = 0.0;
  double beta_sum = 0.0;
  std::size_t beta_n = 0;
  for (const auto &ev : report.events) {
    report.outcome_counts.add(ev.outcome.stage);
    report.total_cost += ev.outcome.charged_cost;
    u_sum += ev.outcome.uncertainty;
    if (ev.outcome.beta) {
      beta_sum += *ev.outcome.beta;
      ++beta_n;
    }
  }
  report.avg_uncertainty = report.events.empty() ? 0.0 : u_sum / report.events.size();
  report.rejection_rate = beta_n == 0 ? 0.0 : beta_sum / static_cast<double>(beta_n);

  rounds_.push_back(report);
  return report;
}

SimulationReport Simulator::finish() {
  SimulationReport out;
  out.rounds = std::move(rounds_);
  out.mixtures = mixtures_;
  out.clients.reserve(clients_.size());
  for (const auto &c : clients_) {
    ClientMetrics m;
    m.token_entropy =
        c.accepted.empty() ? 0.0 : client_token_entropy(c.accepted, cfg_.profile.vocab);
    m.transmitted = c.transmitted;
    if (c.transmitted > 0) {
      const double n = static_cast<double>(c.transmitted);
      m.cache_hit_ratio = static_cast<double>(c.cache_hits) / n;
      m.reuse_ratio = static_cast<double>(c.cache_hits + c.peer_hits) / n;
    }
    m.llm_token_count = c.llm_tokens;
    m.accuracy = c.accepted.empty()
                     ? 0.0
                     : static_cast<double>(c.correct) / static_cast<double>(c.accepted.size());
    out.clients.push_back(m);
  }
  return out;
}

SimulationReport run_simulation(const SimulationConfig &cfg) {
  Simulator sim(cfg);
  for (int r = 0; r < cfg.rounds; ++r) sim.run_round(r);
  return sim.finish();
}

SimulationReport run_baseline(const SimulationConfig &cfg) {
  if (cfg.mode == Mode::FedHLM) {
    throw ConfigInvalid("mode", "run_baseline needs mode rand or uhlm");
  }
  return run_simulation(cfg);
}

}  // namespace fedhlm
