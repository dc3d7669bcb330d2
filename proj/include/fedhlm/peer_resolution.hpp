// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedhlm/model_source.hpp"

namespace fedhlm {

inline constexpr std::uint64_t kDefaultEmbeddingSeed = 0x5eed'e3b0'0000'0001ULL;

/// Fixed-dimension real vector with a cached, strictly positive norm.
class Embedding {
 public:
  explicit Embedding(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t dim() const { return values_.size(); }
  double norm() const { return norm_; }

 private:
  std::vector<double> values_;
  double norm_ = 0.0;
};

struct PeerConfig {
  double similarity_threshold = 0.85;       // theta for peers and cache
  double edge_similarity_threshold = 0.85;  // theta at the edge server
  std::size_t embedding_dim = 64;
  std::size_t cache_capacity = 256;

  void validate() const;
  bool operator==(const PeerConfig &) const = default;
};

class NoPeers : public std::runtime_error {
 public:
  NoPeers() : std::runtime_error("centroid of an empty peer set") {}
};

/// Deterministic pseudo-random unit vector for a token id.
Embedding token_embedding(TokenId token, const VocabSpec &vocab,
                          std::size_t dim,
                          std::uint64_t seed = kDefaultEmbeddingSeed);

/// token_embedding precomputed for a whole vocabulary.
class EmbeddingTable {
 public:
  EmbeddingTable(const VocabSpec &vocab, std::size_t dim,
                 std::uint64_t seed = kDefaultEmbeddingSeed);

  const Embedding &operator[](TokenId token) const { return table_[token]; }
  std::size_t size() const { return table_.size(); }
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
  std::vector<Embedding> table_;
};

/// Elementwise mean. Throws NoPeers on an empty list and
/// std::domain_error when the mean is the zero vector.
Embedding centroid(std::span<const Embedding> peers);

double cosine_similarity(const Embedding &a, const Embedding &b);

enum class PeerVerdict { AcceptLocal, Escalate };
enum class EdgeVerdict { AcceptEdge, EscalateToLLM };

/// AcceptLocal iff cos(own, centroid(peers)) >= theta. An empty or
/// degenerate peer set escalates.
PeerVerdict peer_consensus(const Embedding &own,
                           std::span<const Embedding> peer_embeddings,
                           const PeerConfig &cfg);

/// AcceptEdge iff some neighbouring cluster centroid reaches the edge
/// threshold.
EdgeVerdict edge_validate(const Embedding &own,
                          std::span<const Embedding> neighbor_centroids,
                          const PeerConfig &cfg);

/// Semantic token cache with LRU eviction. Entries are kept in recency
/// order, most recently used last.
class TokenCache {
 public:
  struct Entry {
    Embedding embedding;
    TokenId token;
  };

  explicit TokenCache(std::size_t capacity);

  /// Token of the most similar entry with similarity >= theta; the entry
  /// becomes most recent. Ties resolve to the more recently used entry.
  std::optional<TokenId> lookup(const Embedding &query, double theta);

  /// Appends as most recent, or refreshes an existing entry for the same
  /// token. Evicts the least recently used entry when over capacity.
  void insert(const Embedding &e, TokenId token);

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::span<const Entry> entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::vector<Entry> entries_;
};

}  // namespace fedhlm
