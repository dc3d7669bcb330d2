// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedhlm/sim_engine.hpp"

namespace fedhlm {

class IoFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MetricsRow {
  int round = 0;
  double global_threshold = 0.0;
  std::size_t local_count = 0;
  std::size_t p2p_count = 0;
  std::size_t edge_count = 0;
  std::size_t llm_count = 0;
  double transmission_rate = 0.0;  // non-Local share of the round's tokens
  double avg_uncertainty = 0.0;
  double rejection_rate = 0.0;
  double total_cost = 0.0;
  double trr = 0.0;
};

/// 1 - llm / total. Throws std::invalid_argument on an empty count.
double compute_trr(const StageCounts &counts);
double compute_trr(const RoundReport &report);
double compute_trr(const SimulationReport &report);

MetricsRow metrics_row(const RoundReport &report);

const std::vector<std::string> &metrics_header();

/// Header line plus one line per round, reals with 6 decimals.
std::string format_metrics_csv(std::span<const RoundReport> reports);
void emit_metrics_csv(std::span<const RoundReport> reports,
                      const std::filesystem::path &path);

/// One JSON object per line, in (round, client, timestep) order.
std::string format_trace(std::span<const RoundReport> reports);
void emit_trace(std::span<const RoundReport> reports,
                const std::filesystem::path &path);

std::string format_client_metrics_csv(std::span<const ClientMetrics> clients);
void emit_client_metrics_csv(std::span<const ClientMetrics> clients,
                             const std::filesystem::path &path);

void write_text_file(const std::filesystem::path &path, const std::string &text);

}  // namespace fedhlm
