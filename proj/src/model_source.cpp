// SPDX-License-Identifier: Apache-2.0

#include "fedhlm/model_source.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string_view>

namespace fedhlm {

namespace {

constexpr double kNormTolerance = 1e-9;
constexpr double kTraceNormTolerance = 1e-6;

double checked_sum(const std::vector<double> &v) {
  double sum = 0.0;
  for (double p : v) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("probability must be finite and >= 0");
    }
    sum += p;
  }
  return sum;
}

}  // namespace

void VocabSpec::validate() const {
  if (size < 2) throw std::invalid_argument("vocab size must be >= 2");
}

TokenDistribution TokenDistribution::from_probs(std::vector<double> probs) {
  if (probs.empty()) throw std::invalid_argument("empty distribution");
  double sum = checked_sum(probs);
  if (std::abs(sum - 1.0) > kNormTolerance) {
    throw std::invalid_argument("probabilities do not sum to 1");
  }
  return TokenDistribution(std::move(probs));
}

TokenDistribution TokenDistribution::normalized(std::vector<double> weights) {
  if (weights.empty()) throw std::invalid_argument("empty distribution");
  double sum = checked_sum(weights);
  if (!(sum > 0.0)) throw std::invalid_argument("weights sum to zero");
  for (double &w : weights) w /= sum;
  return TokenDistribution(std::move(weights));
}

TokenDistribution TokenDistribution::uniform(std::size_t size) {
  return normalized(std::vector<double>(size, 1.0));
}

TokenDistribution TokenDistribution::one_hot(std::size_t size, TokenId token) {
  std::vector<double> p(size, 0.0);
  p.at(token) = 1.0;
  return TokenDistribution(std::move(p));
}

TokenDistribution TokenDistribution::clamped() const {
  std::vector<double> p(probs_);
  for (double &x : p) x = std::max(x, kProbFloor);
  return normalized(std::move(p));
}

void ModelProfile::validate() const {
  vocab.validate();
  if (!(agreement >= 0.0 && agreement <= 1.0)) {
    throw std::invalid_argument("agreement must lie in [0,1]");
  }
  if (!(slm_sharpness > 0.0) || !(llm_sharpness > 0.0)) {
    throw std::invalid_argument("sharpness must be > 0");
  }
}

TokenId argmax_token(const TokenDistribution &dist) {
  auto p = dist.probs();
  // max_element returns the first maximal element.
  return static_cast<TokenId>(std::max_element(p.begin(), p.end()) -
                              p.begin());
}

TokenDistribution sample_peaked(std::size_t vocab_size, TokenId mode,
                                double sharpness, Rng &rng) {
  std::vector<double> w(vocab_size);
  const double tail_shape = 1.0 / static_cast<double>(vocab_size - 1);
  std::gamma_distribution<double> tail(tail_shape, 1.0);
  std::gamma_distribution<double> head(sharpness, 1.0);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    w[i] = (i == mode) ? head(rng) : tail(rng);
  }
  double sum = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(sum > 0.0)) return TokenDistribution::one_hot(vocab_size, mode);

  auto top = std::max_element(w.begin(), w.end());
  std::iter_swap(top, w.begin() + static_cast<std::ptrdiff_t>(mode));
  auto dist = TokenDistribution::normalized(std::move(w));
  if (argmax_token(dist) != mode) {
    // exact tie with a lower index; mix toward the mode to break it
    std::vector<double> p(dist.probs().begin(), dist.probs().end());
    for (double &x : p) x *= 0.5;
    p[mode] += 0.5;
    return TokenDistribution::normalized(std::move(p));
  }
  return dist;
}

DistributionPair gen_distribution_pair_at(const ModelProfile &profile, TokenId slm_mode,
                                          double slm_sharpness, double agreement,
                                          Rng &rng, std::optional<TokenRange> alternatives) {
  if (!(agreement >= 0.0 && agreement <= 1.0)) {
    throw std::invalid_argument("agreement must lie in [0, 1]");
  }
  const std::size_t v = profile.vocab.size;
  TokenRange range = alternatives.value_or(TokenRange{0, v});
  if (range.end > v || range.begin > slm_mode || slm_mode >= range.end ||
      range.end - range.begin < 2) {
    throw std::invalid_argument("alternative range must contain the mode and one more token");
  }
  TokenId llm_mode = slm_mode;
  if (uniform01(rng) >= agreement) {
    std::uniform_int_distribution<TokenId> other(range.begin, range.end - 2);
    llm_mode = other(rng);
    if (llm_mode >= slm_mode) ++llm_mode;
  }
  DistributionPair out;
  out.slm = sample_peaked(v, slm_mode, slm_sharpness, rng);
  out.llm = sample_peaked(v, llm_mode, profile.llm_sharpness, rng);
  return out;
}

DistributionPair gen_distribution_pair_at(const ModelProfile &profile,
                                          TokenId slm_mode,
                                          double slm_sharpness, Rng &rng) {
  return gen_distribution_pair_at(profile, slm_mode, slm_sharpness, profile.agreement, rng);
}

DistributionPair gen_distribution_pair(const ModelProfile &profile, Rng &rng) {
  std::uniform_int_distribution<TokenId> pick(0, profile.vocab.size - 1);
  TokenId mode = pick(rng);
  return gen_distribution_pair_at(profile, mode, profile.slm_sharpness, rng);
}

// --- logit traces -----------------------------------------------------------

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T &out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

TokenDistribution parse_distribution(std::span<const std::string_view> cells,
                                     std::size_t line_no) {
  std::vector<double> p(cells.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!parse_number(cells[i], p[i]) || !std::isfinite(p[i])) {
      throw TraceError(TraceError::Kind::MalformedRow, line_no,
                       "line " + std::to_string(line_no) +
                           ": unparsable probability");
    }
    if (p[i] < 0.0) {
      throw TraceError(TraceError::Kind::MalformedRow, line_no,
                       "line " + std::to_string(line_no) +
                           ": negative probability");
    }
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > kTraceNormTolerance) {
    throw TraceError(TraceError::Kind::MalformedRow, line_no,
                     "line " + std::to_string(line_no) +
                         ": probabilities do not sum to 1");
  }
  if (std::abs(sum - 1.0) <= kNormTolerance) {
    return TokenDistribution::from_probs(std::move(p));
  }
  return TokenDistribution::normalized(std::move(p));
}

std::string format_real(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<TraceRow> load_logit_trace(const std::filesystem::path &path,
                                       const VocabSpec &vocab) {
  vocab.validate();
  std::ifstream in(path);
  if (!in) {
    throw TraceError(TraceError::Kind::Io, 0,
                     "cannot open trace file " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw TraceError(TraceError::Kind::MalformedRow, 1, "missing header");
  }
  ++line_no;
  {
    constexpr std::string_view prefix = "# vocab=";
    std::string_view h(line);
    if (!h.empty() && h.back() == '\r') h.remove_suffix(1);
    std::size_t declared = 0;
    if (!h.starts_with(prefix) ||
        !parse_number(h.substr(prefix.size()), declared)) {
      throw TraceError(TraceError::Kind::MalformedRow, 1,
                       "header must read '# vocab=<V>'");
    }
    if (declared != vocab.size) {
      throw TraceError(TraceError::Kind::VocabMismatch, 1,
                       "trace vocab " + std::to_string(declared) +
                           " != expected " + std::to_string(vocab.size));
    }
  }

  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_commas(line);
    if (cells.size() < 3 || (cells.size() - 1) % 2 != 0) {
      throw TraceError(TraceError::Kind::MalformedRow, line_no,
                       "line " + std::to_string(line_no) +
                           ": wrong column count");
    }
    const std::size_t width = (cells.size() - 1) / 2;
    if (width != vocab.size) {
      throw TraceError(TraceError::Kind::VocabMismatch, line_no,
                       "line " + std::to_string(line_no) + ": row width " +
                           std::to_string(width) + " != vocab " +
                           std::to_string(vocab.size));
    }
    TraceRow row;
    if (!parse_number(cells[0], row.reference_token) ||
        row.reference_token >= vocab.size) {
      throw TraceError(TraceError::Kind::MalformedRow, line_no,
                       "line " + std::to_string(line_no) +
                           ": bad reference token");
    }
    std::span<const std::string_view> all(cells);
    row.pair.slm = parse_distribution(all.subspan(1, width), line_no);
    row.pair.llm = parse_distribution(all.subspan(1 + width, width), line_no);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_logit_trace(const std::filesystem::path &path,
                       std::span<const TraceRow> rows,
                       const VocabSpec &vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw TraceError(TraceError::Kind::Io, 0,
                     "cannot write trace file " + path.string());
  }
  out << "# vocab=" << vocab.size << '\n';
  for (const auto &row : rows) {
    if (row.pair.slm.size() != vocab.size || row.pair.llm.size() != vocab.size) {
      throw TraceError(TraceError::Kind::VocabMismatch, 0,
                       "row width does not match vocab");
    }
    out << row.reference_token;
    for (double p : row.pair.slm.probs()) out << ',' << format_real(p);
    for (double p : row.pair.llm.probs()) out << ',' << format_real(p);
    out << '\n';
  }
  if (!out) {
    throw TraceError(TraceError::Kind::Io, 0,
                     "write failed for " + path.string());
  }
}

}  // namespace fedhlm
