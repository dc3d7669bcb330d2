// SPDX-License-Identifier: Apache-2.0

#include "fedhlm/peer_resolution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedhlm/random.hpp"

namespace fedhlm {

namespace {

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

Embedding::Embedding(std::vector<double> values)
    : values_(std::move(values)), norm_(l2_norm(values_)) {
  if (!(norm_ > 0.0) || !std::isfinite(norm_)) {
    throw std::domain_error("embedding must have a positive finite norm");
  }
}

void PeerConfig::validate() const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(similarity_threshold) || !in_unit(edge_similarity_threshold)) {
    throw std::invalid_argument("similarity thresholds must lie in [0,1]");
  }
  if (embedding_dim == 0) throw std::invalid_argument("embedding_dim must be >= 1");
  if (cache_capacity == 0) {
    throw std::invalid_argument("cache_capacity must be >= 1");
  }
}

Embedding token_embedding(TokenId token, const VocabSpec &vocab,
                          std::size_t dim, std::uint64_t seed) {
  if (token >= vocab.size) throw std::out_of_range("token outside vocabulary");
  if (dim == 0) throw std::invalid_argument("dim must be >= 1");
  Rng rng = make_rng(seed, {token, dim});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double n = 0.0;
  while (!(n > 0.0)) {
    for (double &x : v) x = normal(rng);
    n = l2_norm(v);
  }
  for (double &x : v) x /= n;
  return Embedding(std::move(v));
}

EmbeddingTable::EmbeddingTable(const VocabSpec &vocab, std::size_t dim,
                               std::uint64_t seed)
    : dim_(dim) {
  table_.reserve(vocab.size);
  for (TokenId t = 0; t < vocab.size; ++t) {
    table_.push_back(token_embedding(t, vocab, dim, seed));
  }
}

Embedding centroid(std::span<const Embedding> peers) {
  if (peers.empty()) throw NoPeers();
  const std::size_t d = peers.front().dim();
  std::vector<double> mean(d, 0.0);
  for (const auto &e : peers) {
    if (e.dim() != d) throw std::invalid_argument("embedding dimension mismatch");
    auto v = e.values();
    for (std::size_t i = 0; i < d; ++i) mean[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(peers.size());
  for (double &x : mean) x *= inv;
  return Embedding(std::move(mean));
}

double cosine_similarity(const Embedding &a, const Embedding &b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("embedding dimension mismatch");
  }
  auto va = a.values();
  auto vb = b.values();
  double dot = std::inner_product(va.begin(), va.end(), vb.begin(), 0.0);
  return std::clamp(dot / (a.norm() * b.norm()), -1.0, 1.0);
}

PeerVerdict peer_consensus(const Embedding &own,
                           std::span<const Embedding> peer_embeddings,
                           const PeerConfig &cfg) {
  try {
    Embedding c = centroid(peer_embeddings);
    return cosine_similarity(own, c) >= cfg.similarity_threshold
               ? PeerVerdict::AcceptLocal
               : PeerVerdict::Escalate;
  } catch (const NoPeers &) {
    return PeerVerdict::Escalate;
  } catch (const std::domain_error &) {
    return PeerVerdict::Escalate;
  }
}

EdgeVerdict edge_validate(const Embedding &own,
                          std::span<const Embedding> neighbor_centroids,
                          const PeerConfig &cfg) {
  for (const auto &c : neighbor_centroids) {
    if (cosine_similarity(own, c) >= cfg.edge_similarity_threshold) {
      return EdgeVerdict::AcceptEdge;
    }
  }
  return EdgeVerdict::EscalateToLLM;
}

TokenCache::TokenCache(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("cache capacity must be >= 1");
  entries_.reserve(capacity + 1);
}

std::optional<TokenId> TokenCache::lookup(const Embedding &query,
                                          double theta) {
  std::ptrdiff_t best = -1;
  double best_sim = -2.0;
  // scan newest to oldest so ties favour the most recent entry
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(entries_.size()) - 1;
       i >= 0; --i) {
    double sim = cosine_similarity(query, entries_[static_cast<std::size_t>(i)].embedding);
    if (sim >= theta && sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  if (best < 0) return std::nullopt;
  auto it = entries_.begin() + best;
  std::rotate(it, it + 1, entries_.end());
  return entries_.back().token;
}

void TokenCache::insert(const Embedding &e, TokenId token) {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const Entry &x) { return x.token == token; });
  if (it != entries_.end()) {
    it->embedding = e;
    std::rotate(it, it + 1, entries_.end());
    return;
  }
  entries_.push_back({e, token});
  if (entries_.size() > capacity_) entries_.erase(entries_.begin());
}

}  // namespace fedhlm
