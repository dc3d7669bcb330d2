// SPDX-License-Identifier: Apache-2.0
// Python bindings for the simulator and its analytic building blocks.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "fedhlm/config.hpp"
#include "fedhlm/cost_model.hpp"
#include "fedhlm/federation.hpp"
#include "fedhlm/oracle.hpp"
#include "fedhlm/report.hpp"
#include "fedhlm/sim_engine.hpp"
#include "fedhlm/threshold_learner.hpp"
#include "fedhlm/uncertainty.hpp"

namespace py = pybind11;
using namespace fedhlm;

namespace {

SimulationConfig make_config(const std::string &text, std::optional<std::string> mode,
                             std::optional<std::uint64_t> seed, unsigned threads) {
  auto cfg = parse_config_text(text);
  if (mode) cfg.mode = parse_mode(*mode);
  if (seed) cfg.seed = *seed;
  cfg.threads = threads;
  cfg.validate();
  return cfg;
}

std::vector<RejectionFeedback> records(const std::vector<std::pair<double, double>> &ub) {
  std::vector<RejectionFeedback> out;
  out.reserve(ub.size());
  for (const auto &[u, beta] : ub) out.push_back({beta, 0, u});
  return out;
}

LearnerConfig learner(double gamma, double lambda) {
  LearnerConfig cfg;
  cfg.gamma = gamma;
  cfg.lambda = lambda;
  cfg.validate();
  return cfg;
}

py::dict counts_dict(const StageCounts &c) {
  py::dict d;
  d["local"] = c.local;
  d["p2p"] = c.p2p;
  d["edge"] = c.edge;
  d["llm"] = c.llm;
  return d;
}

py::dict report_dict(const SimulationReport &rep) {
  py::list rounds;
  for (const auto &r : rep.rounds) {
    const auto m = metrics_row(r);
    py::dict row;
    row["round"] = m.round;
    row["global_threshold"] = m.global_threshold;
    row["local_count"] = m.local_count;
    row["p2p_count"] = m.p2p_count;
    row["edge_count"] = m.edge_count;
    row["llm_count"] = m.llm_count;
    row["transmission_rate"] = m.transmission_rate;
    row["avg_uncertainty"] = m.avg_uncertainty;
    row["rejection_rate"] = m.rejection_rate;
    row["total_cost"] = m.total_cost;
    row["trr"] = m.trr;
    rounds.append(row);
  }
  py::list clients;
  for (const auto &c : rep.clients) {
    py::dict d;
    d["token_entropy"] = c.token_entropy;
    d["cache_hit_ratio"] = c.cache_hit_ratio;
    d["reuse_ratio"] = c.reuse_ratio;
    d["llm_token_count"] = c.llm_token_count;
    d["accuracy"] = c.accuracy;
    d["transmitted"] = c.transmitted;
    clients.append(d);
  }
  py::dict out;
  out["totals"] = counts_dict(rep.totals());
  out["trr"] = compute_trr(rep);
  out["rounds"] = rounds;
  out["clients"] = clients;
  out["mixtures"] = rep.mixtures;
  return out;
}

}  // namespace

PYBIND11_MODULE(_fedhlm, m) {
  m.doc() = "Uncertainty-gated hybrid language model routing simulator";

  // ConfigInvalid (validation) and ConfigError (parsing) both surface as
  // fedhlm.ConfigError, a ValueError.
  static py::handle config_error =
      py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError).ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigInvalid &e) {
      PyErr_SetString(config_error.ptr(), e.what());
    }
  });

  // configuration
  m.def("config_keys", &config_keys);
  m.def(
      "normalize_config",
      [](const std::string &text) { return serialize_config(parse_config_text(text)); },
      py::arg("text") = "", "Parse a config and echo it with every key spelled out.");

  // simulation
  m.def(
      "run",
      [](const std::string &text, std::optional<std::string> mode,
         std::optional<std::uint64_t> seed, unsigned threads) {
        auto cfg = make_config(text, mode, seed, threads);
        SimulationReport rep;
        {
          py::gil_scoped_release release;
          rep = run_simulation(cfg);
        }
        return report_dict(rep);
      },
      py::arg("config") = "", py::arg("mode") = py::none(), py::arg("seed") = py::none(),
      py::arg("threads") = 1u,
      "Run a simulation from config text and return metrics as plain Python data.");
  m.def(
      "run_outputs",
      [](const std::string &text, std::optional<std::string> mode,
         std::optional<std::uint64_t> seed, unsigned threads) {
        auto cfg = make_config(text, mode, seed, threads);
        SimulationReport rep;
        {
          py::gil_scoped_release release;
          rep = run_simulation(cfg);
        }
        py::dict out;
        out["metrics_csv"] = format_metrics_csv(rep.rounds);
        out["trace"] = format_trace(rep.rounds);
        out["clients_csv"] = format_client_metrics_csv(rep.clients);
        return out;
      },
      py::arg("config") = "", py::arg("mode") = py::none(), py::arg("seed") = py::none(),
      py::arg("threads") = 1u, "Run and return the CSV and trace files as strings.");

  // threshold learning
  m.def(
      "local_loss",
      [](const std::vector<std::pair<double, double>> &ub, double u_th, double gamma,
         double lambda) { return local_loss(records(ub), u_th, learner(gamma, lambda)); },
      py::arg("records"), py::arg("u_th"), py::arg("gamma") = 10.0, py::arg("lam") = 0.01,
      "records: list of (uncertainty, beta) pairs");
  m.def(
      "loss_gradient",
      [](const std::vector<std::pair<double, double>> &ub, double u_th, double gamma,
         double lambda) { return loss_gradient(records(ub), u_th, learner(gamma, lambda)); },
      py::arg("records"), py::arg("u_th"), py::arg("gamma") = 10.0, py::arg("lam") = 0.01);
  m.def("lr_schedule", &lr_schedule, py::arg("eta0"), py::arg("round"));

  // aggregation
  m.def(
      "cluster_aggregate",
      [](const std::vector<double> &values, const std::vector<std::size_t> &weights) {
        if (values.size() != weights.size()) throw py::value_error("length mismatch");
        std::vector<WeightedThreshold> ws;
        for (std::size_t i = 0; i < values.size(); ++i) ws.push_back({values[i], weights[i]});
        return cluster_aggregate(ws);
      },
      py::arg("values"), py::arg("weights"));
  m.def(
      "global_aggregate",
      [](const std::vector<double> &values) { return global_aggregate(values); },
      py::arg("values"));

  // uncertainty and adjudication
  m.def(
      "entropy_score",
      [](std::vector<double> probs) {
        return entropy_score(TokenDistribution::from_probs(std::move(probs))).value;
      },
      py::arg("probs"));
  m.def(
      "mc_disagreement",
      [](std::vector<double> probs, int samples, double temperature, std::uint64_t seed) {
        SamplerConfig s{samples, temperature};
        Rng rng(seed);
        return mc_disagreement(TokenDistribution::from_probs(std::move(probs)), s, rng).value;
      },
      py::arg("probs"), py::arg("samples") = 10, py::arg("temperature") = 2.0,
      py::arg("seed") = 0);
  m.def(
      "rejection_probability",
      [](std::vector<double> slm, std::vector<double> llm, TokenId token) {
        return rejection_probability(TokenDistribution::from_probs(std::move(slm)),
                                     TokenDistribution::from_probs(std::move(llm)), token);
      },
      py::arg("slm"), py::arg("llm"), py::arg("token"));
  m.def(
      "llm_adjudicate",
      [](std::vector<double> slm, std::vector<double> llm, TokenId token, std::uint64_t seed) {
        Rng rng(seed);
        auto r = llm_adjudicate(TokenDistribution::from_probs(std::move(slm)),
                                TokenDistribution::from_probs(std::move(llm)), token, rng);
        return py::make_tuple(r.decision == Adjudication::Accept, r.final_token, r.beta);
      },
      py::arg("slm"), py::arg("llm"), py::arg("token"), py::arg("seed") = 0,
      "Returns (accepted, final_token, beta).");

  // cost model
  auto model = [](double c_p2p, double c_llm) {
    CostModel cm;
    cm.c_p2p = c_p2p;
    cm.c_llm = c_llm;
    cm.validate();
    return cm;
  };
  m.def(
      "expected_cost",
      [model](double p, double c_p2p, double c_llm) { return expected_cost(p, model(c_p2p, c_llm)); },
      py::arg("p_hit"), py::arg("c_p2p") = 1.0, py::arg("c_llm") = 10.0);
  m.def(
      "should_attempt_p2p",
      [model](double p, double c_p2p, double c_llm) {
        return should_attempt_p2p(p, model(c_p2p, c_llm));
      },
      py::arg("p_hit"), py::arg("c_p2p") = 1.0, py::arg("c_llm") = 10.0);
  m.def("cache_hit_curve", &cache_hit_curve, py::arg("size"), py::arg("alpha"));
  m.def(
      "fit_cache_alpha",
      [](const std::vector<double> &sizes, const std::vector<double> &hits) {
        auto f = fit_cache_alpha(sizes, hits);
        return py::make_tuple(f.alpha, f.r_squared);
      },
      py::arg("sizes"), py::arg("hit_ratios"), "Returns (alpha, r_squared).");
}
