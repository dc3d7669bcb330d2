// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <optional>
#include <string>
#include <vector>

#include "fedhlm/random.hpp"

namespace fedhlm {

using TokenId = std::size_t;

/// Probabilities below this floor are clamped before any ratio is taken.
inline constexpr double kProbFloor = 1e-12;

struct VocabSpec {
  std::size_t size = 512;

  void validate() const;
  bool operator==(const VocabSpec &) const = default;
};

/// A softmax output over a vocabulary. Construction enforces the
/// probability-vector invariants (non-negative, sums to 1 within 1e-9).
class TokenDistribution {
 public:
  TokenDistribution() = default;

  /// Takes probabilities that already sum to one within 1e-9.
  static TokenDistribution from_probs(std::vector<double> probs);

  /// Scales non-negative weights with positive sum into a distribution.
  static TokenDistribution normalized(std::vector<double> weights);

  static TokenDistribution uniform(std::size_t size);
  static TokenDistribution one_hot(std::size_t size, TokenId token);

  std::span<const double> probs() const { return probs_; }
  double operator[](TokenId token) const { return probs_[token]; }
  std::size_t size() const { return probs_.size(); }

  /// Copy with every probability floored at kProbFloor and renormalized.
  TokenDistribution clamped() const;

  bool operator==(const TokenDistribution &) const = default;

 private:
  explicit TokenDistribution(std::vector<double> probs)
      : probs_(std::move(probs)) {}

  std::vector<double> probs_;
};

/// Knobs of the synthetic SLM/LLM pair generator.
struct ModelProfile {
  double agreement = 0.9;
  double slm_sharpness = 30.0;
  double llm_sharpness = 30.0;
  VocabSpec vocab;

  void validate() const;
  bool operator==(const ModelProfile &) const = default;
};

struct DistributionPair {
  TokenDistribution slm;
  TokenDistribution llm;
};

/// Index of the largest probability; ties go to the lowest index.
TokenId argmax_token(const TokenDistribution &dist);

/// Draws a distribution concentrated on `mode`: Dirichlet weights with
/// concentration `sharpness` on the mode and a unit total spread over the
/// remaining tokens. The mode is always the strict argmax of the result.
TokenDistribution sample_peaked(std::size_t vocab_size, TokenId mode,
                                double sharpness, Rng &rng);

/// Token id range [begin, end).
struct TokenRange {
  TokenId begin = 0;
  TokenId end = 0;
};

/// Paired draw around a given SLM mode. The LLM keeps that mode with
/// probability `agreement` (default `profile.agreement`), otherwise moves
/// it to a uniformly chosen different token, from `alternatives` when
/// given (it must hold at least one token besides the mode).
DistributionPair gen_distribution_pair_at(const ModelProfile &profile, TokenId slm_mode,
                                          double slm_sharpness, double agreement,
                                          Rng &rng,
                                          std::optional<TokenRange> alternatives = {});
DistributionPair gen_distribution_pair_at(const ModelProfile &profile,
                                          TokenId slm_mode,
                                          double slm_sharpness, Rng &rng);

/// Paired draw with a uniformly random SLM mode.
DistributionPair gen_distribution_pair(const ModelProfile &profile, Rng &rng);

// --- logit traces -----------------------------------------------------------

struct TraceRow {
  DistributionPair pair;
  TokenId reference_token = 0;
};

class TraceError : public std::runtime_error {
 public:
  enum class Kind { MalformedRow, VocabMismatch, Io };

  TraceError(Kind kind, std::size_t line, const std::string &what)
      : std::runtime_error(what), kind_(kind), line_(line) {}

  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

/// Reads `# vocab=<V>` followed by rows of
/// `reference_token,slm_p0..slm_p{V-1},llm_p0..llm_p{V-1}`.
std::vector<TraceRow> load_logit_trace(const std::filesystem::path &path,
                                       const VocabSpec &vocab);

void write_logit_trace(const std::filesystem::path &path,
                       std::span<const TraceRow> rows, const VocabSpec &vocab);

}  // namespace fedhlm
