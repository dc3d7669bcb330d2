// SPDX-License-Identifier: Apache-2.0

#include "fedhlm/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include "json.hpp"

namespace fedhlm {

namespace {

std::string fixed6(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

}  // namespace

double compute_trr(const StageCounts &counts) {
  if (counts.total() == 0) {
    throw std::invalid_argument("compute_trr: no tokens in report");
  }
  return 1.0 - static_cast<double>(counts.llm) / static_cast<double>(counts.total());
}

double compute_trr(const RoundReport &report) {
  return compute_trr(report.outcome_counts);
}

double compute_trr(const SimulationReport &report) {
  return compute_trr(report.totals());
}

MetricsRow metrics_row(const RoundReport &r) {
  const auto &c = r.outcome_counts;
  MetricsRow row;
  row.round = r.round;
  row.global_threshold = r.global_threshold;
  row.local_count = c.local;
  row.p2p_count = c.p2p;
  row.edge_count = c.edge;
  row.llm_count = c.llm;
  row.transmission_rate =
      c.total() ? static_cast<double>(c.total() - c.local) / static_cast<double>(c.total())
                : 0.0;
  row.avg_uncertainty = r.avg_uncertainty;
  row.rejection_rate = r.rejection_rate;
  row.total_cost = r.total_cost;
  row.trr = c.total() ? compute_trr(c) : 1.0;
  return row;
}

const std::vector<std::string> &metrics_header() {
  static const std::vector<std::string> h = {
      "round",     "global_threshold",  "local_count",     "p2p_count",
      "edge_count", "llm_count",        "transmission_rate", "avg_uncertainty",
      "rejection_rate", "total_cost",   "trr"};
  return h;
}

std::string format_metrics_csv(std::span<const RoundReport> reports) {
  std::string out;
  const auto &h = metrics_header();
  for (std::size_t i = 0; i < h.size(); ++i) {
    out += (i ? "," : "") + h[i];
  }
  out += '\n';
  for (const auto &r : reports) {
    const MetricsRow m = metrics_row(r);
    out += std::to_string(m.round) + ',' + fixed6(m.global_threshold) + ',' +
           std::to_string(m.local_count) + ',' + std::to_string(m.p2p_count) + ',' +
           std::to_string(m.edge_count) + ',' + std::to_string(m.llm_count) + ',' +
           fixed6(m.transmission_rate) + ',' + fixed6(m.avg_uncertainty) + ',' +
           fixed6(m.rejection_rate) + ',' + fixed6(m.total_cost) + ',' + fixed6(m.trr) +
           '\n';
  }
  return out;
}

void write_text_file(const std::filesystem::path &path, const std::string &text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open " + path.string() + " for writing");
  f << text;
  f.flush();
  if (!f) throw IoFailure("write failed for " + path.string());
}

void emit_metrics_csv(std::span<const RoundReport> reports,
                      const std::filesystem::path &path) {
  write_text_file(path, format_metrics_csv(reports));
}

std::string format_trace(std::span<const RoundReport> reports) {
  std::string out;
  for (const auto &r : reports) {
    for (const auto &e : r.events) {
      nlohmann::ordered_json j;
      j["round"] = e.round;
      j["client"] = e.client;
      j["timestep"] = e.timestep;
      j["stage"] = to_string(e.outcome.stage);
      j["uncertainty"] = e.outcome.uncertainty;
      if (e.outcome.beta) {
        j["beta"] = *e.outcome.beta;
      } else {
        j["beta"] = nullptr;
      }
      j["cost"] = e.outcome.charged_cost;
      j["correct"] = e.outcome.correct;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

void emit_trace(std::span<const RoundReport> reports, const std::filesystem::path &path) {
  write_text_file(path, format_trace(reports));
}

std::string format_client_metrics_csv(std::span<const ClientMetrics> clients) {
  std::string out =
      "client,token_entropy,cache_hit_ratio,reuse_ratio,llm_token_count,accuracy,"
      "transmitted\n";
  for (std::size_t k = 0; k < clients.size(); ++k) {
    const auto &c = clients[k];
    out += std::to_string(k) + ',' + fixed6(c.token_entropy) + ',' +
           fixed6(c.cache_hit_ratio) + ',' + fixed6(c.reuse_ratio) + ',' +
           std::to_string(c.llm_token_count) + ',' + fixed6(c.accuracy) + ',' +
           std::to_string(c.transmitted) + '\n';
  }
  return out;
}

void emit_client_metrics_csv(std::span<const ClientMetrics> clients,
                             const std::filesystem::path &path) {
  write_text_file(path, format_client_metrics_csv(clients));
}

}  // namespace fedhlm
