// SPDX-License-Identifier: Apache-2.0

#include "fedhlm/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fedhlm {

namespace {

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, const std::string &what) {
  throw ConfigError(ConfigError::Kind::InvalidValue, std::string(key),
                    "invalid value for '" + std::string(key) + "': " + what);
}

template <typename T>
T parse_num(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    bad(key, "cannot parse '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(key, "expected true or false");
}

std::string fmt_real(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

template <typename T>
std::string fmt_int(T x) {
  return std::to_string(x);
}

struct Field {
  const char *key;
  std::function<void(SimulationConfig &, std::string_view, std::string_view)> set;
  std::function<std::string(const SimulationConfig &)> get;
};

#define REAL_FIELD(KEY, MEMBER)                                                    \
  Field {                                                                          \
    KEY,                                                                           \
        [](SimulationConfig &c, std::string_view k, std::string_view v) {          \
          c.MEMBER = parse_num<double>(k, v);                                      \
        },                                                                         \
        [](const SimulationConfig &c) { return fmt_real(c.MEMBER); }               \
  }

#define INT_FIELD(KEY, MEMBER, TYPE)                                               \
  Field {                                                                          \
    KEY,                                                                           \
        [](SimulationConfig &c, std::string_view k, std::string_view v) {          \
          c.MEMBER = parse_num<TYPE>(k, v);                                        \
        },                                                                         \
        [](const SimulationConfig &c) { return fmt_int(c.MEMBER); }                \
  }

const std::vector<Field> &fields() {
  static const std::vector<Field> table = {
      Field{"seed",
            [](SimulationConfig &c, std::string_view k, std::string_view v) {
              c.seed = parse_num<std::uint64_t>(k, v);
            },
            [](const SimulationConfig &c) { return fmt_int(c.seed); }},
      Field{"mode",
            [](SimulationConfig &c, std::string_view k, std::string_view v) {
              try {
                c.mode = parse_mode(v);
              } catch (const std::invalid_argument &e) {
                bad(k, e.what());
              }
            },
            [](const SimulationConfig &c) { return std::string(to_string(c.mode)); }},
      REAL_FIELD("mode.p_offload", p_offload),
      REAL_FIELD("mode.static_threshold", static_threshold),
      INT_FIELD("topology.num_clients", topology.num_clients, std::size_t),
      INT_FIELD("topology.num_clusters", topology.num_clusters, std::size_t),
      REAL_FIELD("partition.dirichlet_alpha", partition.dirichlet_alpha),
      INT_FIELD("partition.num_classes", partition.num_classes, std::size_t),
      INT_FIELD("sim.rounds", rounds, int),
      INT_FIELD("sim.tokens_per_client_per_round", tokens_per_client_per_round, int),
      REAL_FIELD("sim.initial_threshold", initial_threshold),
      INT_FIELD("sim.threads", threads, unsigned),
      INT_FIELD("profile.vocab_size", profile.vocab.size, std::size_t),
      REAL_FIELD("profile.agreement", profile.agreement),
      REAL_FIELD("profile.slm_sharpness", profile.slm_sharpness),
      REAL_FIELD("profile.llm_sharpness", profile.llm_sharpness),
      INT_FIELD("sampler.num_samples", sampler.num_samples, int),
      REAL_FIELD("sampler.temperature", sampler.temperature),
      Field{"sampler.score",
            [](SimulationConfig &c, std::string_view k, std::string_view v) {
              if (v == "disagreement") {
                c.routing_score = UncertaintyKind::McDisagreement;
              } else if (v == "entropy") {
                c.routing_score = UncertaintyKind::Entropy;
              } else {
                bad(k, "expected disagreement or entropy");
              }
            },
            [](const SimulationConfig &c) {
              return std::string(c.routing_score == UncertaintyKind::Entropy
                                     ? "entropy"
                                     : "disagreement");
            }},
      REAL_FIELD("learner.gamma", learner.gamma),
      REAL_FIELD("learner.lambda", learner.lambda),
      REAL_FIELD("learner.eta0", learner.eta0),
      REAL_FIELD("peer.similarity_threshold", peer.similarity_threshold),
      REAL_FIELD("peer.edge_similarity_threshold", peer.edge_similarity_threshold),
      INT_FIELD("peer.embedding_dim", peer.embedding_dim, std::size_t),
      INT_FIELD("peer.cache_capacity", peer.cache_capacity, std::size_t),
      INT_FIELD("peer.embedding_seed", embedding_seed, std::uint64_t),
      REAL_FIELD("cost.c_p2p", cost.c_p2p),
      REAL_FIELD("cost.c_llm", cost.c_llm),
      REAL_FIELD("cost.c_uplink", cost.c_uplink),
      REAL_FIELD("cost.tau_slm", cost.tau_slm),
      REAL_FIELD("cost.tau_llm", cost.tau_llm),
      REAL_FIELD("cost.tau_uplink", cost.tau_uplink),
      INT_FIELD("cost.p_hit_window", p_hit_window, std::size_t),
      REAL_FIELD("cost.p_hit_prior", p_hit_prior),
      REAL_FIELD("workload.zipf_exponent", workload.zipf_exponent),
      REAL_FIELD("workload.private_sharpness_scale", workload.private_sharpness_scale),
      REAL_FIELD("workload.private_agreement_scale", workload.private_agreement_scale),
      Field{"workload.cache_local_tokens",
            [](SimulationConfig &c, std::string_view k, std::string_view v) {
              c.workload.cache_local_tokens = parse_bool(k, v);
            },
            [](const SimulationConfig &c) {
              return std::string(c.workload.cache_local_tokens ? "true" : "false");
            }},
      Field{"workload.trace_path",
            [](SimulationConfig &c, std::string_view, std::string_view v) {
              c.workload.trace_path = std::string(v);
            },
            [](const SimulationConfig &c) { return c.workload.trace_path; }},
  };
  return table;
}

#undef REAL_FIELD
#undef INT_FIELD

constexpr std::string_view kAssignmentKey = "topology.assignment";

const Field *find_field(std::string_view key) {
  for (const auto &f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

std::vector<ClusterId> parse_assignment(std::string_view v) {
  std::vector<ClusterId> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    auto pos = v.find(',', start);
    auto cell = trim(v.substr(start, pos == std::string_view::npos ? v.npos : pos - start));
    out.push_back(parse_num<ClusterId>(kAssignmentKey, cell));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

Mode parse_mode(std::string_view name) {
  if (name == "fedhlm") return Mode::FedHLM;
  if (name == "rand" || name == "randhlm") return Mode::RandHLM;
  if (name == "uhlm") return Mode::UHLM;
  throw std::invalid_argument("unknown mode '" + std::string(name) +
                              "' (expected fedhlm, rand or uhlm)");
}

void apply_config_value(SimulationConfig &cfg, std::string_view key,
                        std::string_view value) {
  if (key == kAssignmentKey) {
    cfg.topology.assignment = parse_assignment(value);
    return;
  }
  const Field *f = find_field(key);
  if (!f) bad(key, "unknown key");
  f->set(cfg, key, trim(value));
}

SimulationConfig parse_config_text(std::string_view text) {
  std::map<std::string, std::string, std::less<>> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view l = line;
    if (auto hash = l.find('#'); hash != std::string_view::npos) {
      l = l.substr(0, hash);
    }
    l = trim(l);
    if (l.empty()) continue;
    auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      bad("line " + std::to_string(line_no), "expected 'key = value'");
    }
    std::string key(trim(l.substr(0, eq)));
    std::string value(trim(l.substr(eq + 1)));
    if (key != kAssignmentKey && !find_field(key)) bad(key, "unknown key");
    if (!entries.emplace(key, value).second) bad(key, "duplicate key");
  }

  SimulationConfig cfg;
  for (const auto &f : fields()) {
    if (auto it = entries.find(f.key); it != entries.end()) {
      f.set(cfg, f.key, it->second);
    }
  }
  if (auto it = entries.find(kAssignmentKey); it != entries.end()) {
    cfg.topology.assignment = parse_assignment(it->second);
  } else {
    cfg.topology = ClusterTopology::contiguous(cfg.topology.num_clients,
                                               cfg.topology.num_clusters);
  }
  cfg.partition.tokens_per_client =
      static_cast<std::size_t>(std::max(cfg.rounds, 0)) *
      static_cast<std::size_t>(std::max(cfg.tokens_per_client_per_round, 0));

  try {
    cfg.validate();
  } catch (const ConfigInvalid &e) {
    throw ConfigError(ConfigError::Kind::InvalidValue, e.key(), e.what());
  }
  return cfg;
}

SimulationConfig parse_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(ConfigError::Kind::MissingFile, "",
                      "cannot open config file " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const SimulationConfig &cfg) {
  std::ostringstream out;
  for (const auto &f : fields()) {
    out << f.key << " = " << f.get(cfg) << '\n';
  }
  auto contiguous = ClusterTopology::contiguous(cfg.topology.num_clients,
                                                cfg.topology.num_clusters);
  if (cfg.topology.assignment != contiguous.assignment) {
    out << kAssignmentKey << " = ";
    for (std::size_t i = 0; i < cfg.topology.assignment.size(); ++i) {
      out << (i ? "," : "") << cfg.topology.assignment[i];
    }
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto &f : fields()) keys.emplace_back(f.key);
  keys.emplace_back(kAssignmentKey);
  return keys;
}

}  // namespace fedhlm
