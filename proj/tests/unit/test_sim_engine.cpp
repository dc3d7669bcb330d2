// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <map>

#include "doctest.h"
#include "fedhlm/report.hpp"
#include "fedhlm/sim_engine.hpp"
#include "unit/oracles.hpp"

using namespace fedhlm;

namespace {

SimulationConfig small_config() {
  SimulationConfig cfg;
  cfg.topology = ClusterTopology::contiguous(8, 2);
  cfg.rounds = 4;
  cfg.tokens_per_client_per_round = 12;
  cfg.profile.vocab.size = 128;
  cfg.seed = 7;
  return cfg;
}

struct Fixture {
  SimulationConfig cfg;
  EmbeddingTable table;
  ClientState state;
  ClientRoundStats stats;

  explicit Fixture(SimulationConfig c)
      : cfg(std::move(c)),
        table(cfg.profile.vocab, cfg.peer.embedding_dim),
        state(0, cfg) {}
};

SimulationConfig resolve_config() {
  SimulationConfig cfg;
  cfg.profile.vocab.size = 64;
  cfg.initial_threshold = 0.5;
  return cfg;
}

}  // namespace

TEST_CASE("confident tokens stay local at no cost") {
  Fixture f(resolve_config());
  auto slm = TokenDistribution::one_hot(64, 3);
  auto llm = TokenDistribution::one_hot(64, 3);
  ResolveContext ctx{f.cfg, f.table, {}, {}, std::nullopt};
  Rng rng(1);
  auto out = resolve_token(f.state, slm, llm, ctx, f.stats, rng);
  CHECK(out.stage == Stage::Local);
  CHECK(out.charged_cost == 0.0);
  CHECK(out.uncertainty == 0.0);
  CHECK(out.final_token == 3);
  CHECK(out.correct);
  CHECK(f.stats.transmitted_count == 0);
  CHECK(f.stats.feedback.empty());
  CHECK(f.state.cache.size() == 0);
}

TEST_CASE("uncertain tokens agreed by peers resolve over P2P") {
  Fixture f(resolve_config());
  auto slm = TokenDistribution::uniform(64);  // argmax 0, u near 1
  auto llm = TokenDistribution::one_hot(64, 5);
  std::vector<Embedding> peers(4, f.table[0]);
  ResolveContext ctx{f.cfg, f.table, peers, {}, std::nullopt};
  Rng rng(2);
  auto out = resolve_token(f.state, slm, llm, ctx, f.stats, rng);
  CHECK(out.uncertainty > 0.5);
  CHECK(out.stage == Stage::PeerP2P);
  CHECK(out.charged_cost == f.cfg.cost.c_p2p);
  CHECK(out.final_token == 0);
  CHECK_FALSE(out.beta.has_value());
  CHECK(f.stats.transmitted_count == 1);
  CHECK(f.stats.feedback.empty());
  // accepted token is cached, so the next identical prediction hits the cache
  auto again = resolve_token(f.state, slm, llm, ResolveContext{f.cfg, f.table, {}, {}, {}},
                             f.stats, rng);
  CHECK(again.stage == Stage::PeerP2P);
  CHECK(again.cache_hit);
}

TEST_CASE("edge validation catches what peers miss") {
  Fixture f(resolve_config());
  auto slm = TokenDistribution::uniform(64);
  auto llm = TokenDistribution::one_hot(64, 0);
  std::vector<Embedding> peers = {f.table[1], f.table[2], f.table[3]};
  std::vector<Embedding> neighbors = {f.table[9], f.table[0]};
  ResolveContext ctx{f.cfg, f.table, peers, neighbors, std::nullopt};
  Rng rng(3);
  auto out = resolve_token(f.state, slm, llm, ctx, f.stats, rng);
  CHECK(out.stage == Stage::Edge);
  CHECK(out.charged_cost == f.cfg.cost.c_p2p);
  CHECK(out.p2p_attempted);
}

TEST_CASE("unmatched uncertain tokens fall through to the LLM") {
  Fixture f(resolve_config());
  auto slm = TokenDistribution::uniform(64);
  auto llm = TokenDistribution::one_hot(64, 5);
  std::vector<Embedding> peers = {f.table[1], f.table[2], f.table[3]};
  ResolveContext ctx{f.cfg, f.table, peers, {}, std::nullopt};
  Rng rng(4);
  auto out = resolve_token(f.state, slm, llm, ctx, f.stats, rng);
  CHECK(out.stage == Stage::LLM);
  REQUIRE(out.beta.has_value());
  CHECK(*out.beta == doctest::Approx(1.0));
  CHECK(out.final_token == 5);
  CHECK(out.correct);
  CHECK(out.charged_cost == f.cfg.cost.c_p2p + f.cfg.cost.c_llm);
  CHECK(f.stats.transmitted_count == 1);
  REQUIRE(f.stats.feedback.size() == 1);
  CHECK(f.stats.feedback[0].uncertainty == out.uncertainty);
}

TEST_CASE("a low p_hit estimate skips P2P and charges only the LLM") {
  auto cfg = resolve_config();
  cfg.p_hit_prior = 0.05;  // below c_p2p / c_llm = 0.1
  Fixture f(cfg);
  auto slm = TokenDistribution::uniform(64);
  auto llm = TokenDistribution::one_hot(64, 0);
  std::vector<Embedding> peers(4, f.table[0]);
  ResolveContext ctx{f.cfg, f.table, peers, {}, std::nullopt};
  Rng rng(5);
  auto out = resolve_token(f.state, slm, llm, ctx, f.stats, rng);
  CHECK_FALSE(out.p2p_attempted);
  CHECK(out.stage == Stage::LLM);
  CHECK(out.charged_cost == f.cfg.cost.c_llm);
}

TEST_CASE("the trace reference decides correctness") {
  Fixture f(resolve_config());
  auto slm = TokenDistribution::one_hot(64, 3);
  ResolveContext ctx{f.cfg, f.table, {}, {}, TokenId{4}};
  Rng rng(6);
  auto out = resolve_token(f.state, slm, slm, ctx, f.stats, rng);
  CHECK_FALSE(out.correct);
}

TEST_CASE("client token entropy") {
  VocabSpec v{16};
  std::vector<TokenId> same(50, 3);
  CHECK(client_token_entropy(same, v) == 0.0);
  std::vector<TokenId> all;
  for (TokenId t = 0; t < 16; ++t) all.push_back(t);
  CHECK(client_token_entropy(all, v) == doctest::Approx(1.0));
  CHECK_THROWS_AS(client_token_entropy(std::vector<TokenId>{}, v), std::invalid_argument);
}

TEST_CASE("every round conserves tokens and broadcasts one threshold") {
  auto cfg = small_config();
  Simulator sim(cfg);
  for (int r = 0; r < cfg.rounds; ++r) {
    auto rep = sim.run_round(r);
    CHECK(rep.outcome_counts.total() == 8u * 12u);
    CHECK(rep.events.size() == 8u * 12u);
    for (double th : rep.thresholds_after) CHECK(th == rep.global_threshold);
    std::vector<double> clusters = rep.cluster_thresholds;
    CHECK(rep.global_threshold == doctest::Approx(oracle::mean(clusters)).epsilon(1e-12));
    for (std::size_t k = 0; k < 8; ++k) {
      CHECK(rep.per_client[k].feedback.size() <= rep.per_client[k].transmitted_count);
    }
  }
}

TEST_CASE("idle clients keep their threshold through the local step") {
  auto cfg = small_config();
  cfg.initial_threshold = 1.0;  // nothing is ever transmitted
  Simulator sim(cfg);
  auto rep = sim.run_round(0);
  CHECK(rep.outcome_counts.local == rep.outcome_counts.total());
  for (double th : rep.local_thresholds) CHECK(th == 1.0);
  CHECK(rep.global_threshold == 1.0);
}

TEST_CASE("thresholds never decrease under learning") {
  auto cfg = small_config();
  cfg.rounds = 8;
  auto rep = run_simulation(cfg);
  double prev = cfg.initial_threshold;
  for (const auto &r : rep.rounds) {
    for (double th : r.local_thresholds) CHECK(th >= prev);
    prev = r.global_threshold;
  }
}

TEST_CASE("cost and stage bookkeeping agree with the events") {
  auto cfg = small_config();
  cfg.rounds = 6;
  auto rep = run_simulation(cfg);
  for (const auto &r : rep.rounds) {
    double total = 0.0, recomputed = 0.0;
    StageCounts c;
    for (const auto &e : r.events) {
      const auto &o = e.outcome;
      total += o.charged_cost;
      c.add(o.stage);
      switch (o.stage) {
        case Stage::Local:
          CHECK(o.charged_cost == 0.0);
          CHECK_FALSE(o.beta.has_value());
          break;
        case Stage::PeerP2P:
          CHECK(o.p2p_attempted);
          recomputed += cfg.cost.c_p2p;
          break;
        case Stage::Edge:
          recomputed += cfg.cost.c_p2p;
          break;
        case Stage::LLM:
          CHECK(o.beta.has_value());
          recomputed += cfg.cost.c_llm + (o.p2p_attempted ? cfg.cost.c_p2p : 0.0);
          break;
      }
    }
    CHECK(total == doctest::Approx(r.total_cost).epsilon(1e-12));
    CHECK(recomputed == doctest::Approx(r.total_cost).epsilon(1e-12));
    CHECK(c.local == r.outcome_counts.local);
    CHECK(c.llm == r.outcome_counts.llm);
  }
}

TEST_CASE("identical configs give identical reports at any thread count") {
  auto cfg = small_config();
  auto a = run_simulation(cfg);
  auto b = run_simulation(cfg);
  cfg.threads = 4;
  auto c = run_simulation(cfg);
  CHECK(format_metrics_csv(a.rounds) == format_metrics_csv(b.rounds));
  CHECK(format_trace(a.rounds) == format_trace(b.rounds));
  CHECK(format_trace(a.rounds) == format_trace(c.rounds));
  CHECK(format_client_metrics_csv(a.clients) == format_client_metrics_csv(c.clients));
  cfg.seed = 8;
  CHECK(format_trace(run_simulation(cfg).rounds) != format_trace(a.rounds));
}

TEST_CASE("U-HLM never uses peers or learning") {
  auto cfg = small_config();
  cfg.mode = Mode::UHLM;
  auto rep = run_baseline(cfg);
  auto t = rep.totals();
  CHECK(t.p2p == 0);
  CHECK(t.edge == 0);
  for (const auto &r : rep.rounds) {
    for (double th : r.thresholds_after) CHECK(th == cfg.static_threshold);
    for (const auto &e : r.events) {
      bool hard = e.outcome.uncertainty > cfg.static_threshold;
      CHECK((e.outcome.stage == Stage::LLM) == hard);
    }
  }
}

TEST_CASE("Rand-HLM offloads at the configured rate") {
  SimulationConfig cfg;  // 20 clients x 30 rounds x 30 tokens
  cfg.mode = Mode::RandHLM;
  cfg.p_offload = 0.7;
  auto t = run_baseline(cfg).totals();
  REQUIRE(t.total() == 18000);
  CHECK(t.p2p == 0);
  CHECK(t.edge == 0);
  CHECK(t.llm >= 12400);
  CHECK(t.llm <= 12800);
}

TEST_CASE("run_baseline refuses the federated mode") {
  CHECK_THROWS_AS(run_baseline(small_config()), ConfigInvalid);
}

TEST_CASE("invalid configs name the offending key") {
  auto cfg = small_config();
  cfg.rounds = 0;
  try {
    Simulator sim(cfg);
    FAIL("expected ConfigInvalid");
  } catch (const ConfigInvalid &e) {
    CHECK(e.key() == "sim.rounds");
  }
  cfg = small_config();
  cfg.partition.dirichlet_alpha = -1;
  try {
    run_simulation(cfg);
    FAIL("expected ConfigInvalid");
  } catch (const ConfigInvalid &e) {
    CHECK(e.key() == "partition.dirichlet_alpha");
  }
}

TEST_CASE("trace replay drives the simulation") {
  VocabSpec v{16};
  ModelProfile p;
  p.vocab = v;
  Rng rng(3);
  std::vector<TraceRow> rows;
  for (int i = 0; i < 40; ++i) {
    auto pair = gen_distribution_pair(p, rng);
    rows.push_back({pair, argmax_token(pair.llm)});
  }
  auto path = oracle::scratch_dir("sim") / "replay.csv";
  write_logit_trace(path, rows, v);

  auto cfg = small_config();
  cfg.profile.vocab = v;
  cfg.partition.num_classes = 2;
  cfg.workload.trace_path = path.string();
  auto a = run_simulation(cfg);
  auto b = run_simulation(cfg);
  CHECK(format_trace(a.rounds) == format_trace(b.rounds));
  CHECK(a.totals().total() == 8u * 12u * 4u);
}

TEST_CASE("client metrics stay within their ranges") {
  auto cfg = small_config();
  auto rep = run_simulation(cfg);
  REQUIRE(rep.clients.size() == 8);
  std::size_t llm = 0;
  for (const auto &m : rep.clients) {
    CHECK(m.token_entropy >= 0.0);
    CHECK(m.token_entropy <= 1.0);
    CHECK(m.cache_hit_ratio >= 0.0);
    CHECK(m.cache_hit_ratio <= m.reuse_ratio);
    CHECK(m.reuse_ratio <= 1.0);
    CHECK(m.accuracy >= 0.0);
    CHECK(m.accuracy <= 1.0);
    llm += m.llm_token_count;
  }
  CHECK(llm == rep.totals().llm);
}
