#pragma once

#include "hyperflow/common.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace hyperflow {

/// Sorted, deduplicated set of undirected pairs (u < v). Directed inputs are
/// symmetrized by canonicalizing each pair; self-loops are dropped.
class EdgeSet {
 public:
  EdgeSet() = default;
  EdgeSet(std::size_t node_count, std::span<const NodePair> pairs) : node_count_(node_count) {
    pairs_.reserve(pairs.size());
    for (auto [a, b] : pairs) {
      require(a < node_count && b < node_count, "edge endpoint out of range");
      if (a == b) continue;
      pairs_.push_back(canonical_pair(a, b));
    }
    std::sort(pairs_.begin(), pairs_.end());
    pairs_.erase(std::unique(pairs_.begin(), pairs_.end()), pairs_.end());
    neighbours_.assign(node_count, {});
    for (auto [a, b] : pairs_) {
      neighbours_[a].push_back(b);
      neighbours_[b].push_back(a);
    }
    for (auto& n : neighbours_) std::sort(n.begin(), n.end());
  }

  std::size_t node_count() const { return node_count_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const std::vector<NodePair>& pairs() const { return pairs_; }
  const std::vector<NodeId>& neighbours(NodeId u) const { return neighbours_[u]; }
  std::size_t degree(NodeId u) const { return neighbours_[u].size(); }

  bool contains(NodeId a, NodeId b) const {
    if (a >= node_count_ || b >= node_count_) return false;
    const auto& n = neighbours_[a];
    return std::binary_search(n.begin(), n.end(), b);
  }

  // Number of unordered non-adjacent pairs (u != v).
  std::size_t non_edge_count() const {
    const std::size_t n = node_count_;
    return n * (n - (n > 0 ? 1 : 0)) / 2 - pairs_.size();
  }

 private:
  std::size_t node_count_ = 0;
  std::vector<NodePair> pairs_;
  std::vector<std::vector<NodeId>> neighbours_;
};

/// Normalizes a hyperedge list: sorts members, rejects empty or out-of-range
/// hyperedges and merges duplicates (first occurrence wins).
inline std::vector<NodeSet> normalize_hyperedges(std::size_t node_count, std::vector<NodeSet> edges,
                                                 std::vector<std::size_t>* kept = nullptr) {
  std::set<NodeSet> seen;
  std::vector<NodeSet> out;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    auto& e = edges[k];
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    require(!e.empty(), "hyperedge must be nonempty");
    require(e.back() < node_count, "hyperedge member out of range");
    if (!seen.insert(e).second) continue;
    if (kept) kept->push_back(k);
    out.push_back(std::move(e));
  }
  return out;
}

/// Nodes, social environments (hyperedges), pairwise links, features and the
/// hyperedge / node weight diagonals. Immutable once built.
class Hypergraph {
 public:
  Hypergraph() = default;

  /// Empty `hyperedge_weights` / `node_weights` fall back to default_weights().
  Hypergraph(Matrix features, std::vector<NodeSet> hyperedges, EdgeSet pairwise, Vector hyperedge_weights = {},
             Vector node_weights = {})
      : features_(std::move(features)), pairwise_(std::move(pairwise)) {
    const auto n = static_cast<std::size_t>(features_.rows());
    require(pairwise_.node_count() == n, "pairwise edge set node count does not match features");
    std::vector<std::size_t> kept;
    hyperedges_ = normalize_hyperedges(n, std::move(hyperedges), &kept);
    if (hyperedge_weights.size() > 0 && static_cast<std::size_t>(hyperedge_weights.size()) != kept.size()) {
      Vector w(static_cast<Eigen::Index>(kept.size()));
      for (std::size_t i = 0; i < kept.size(); ++i) {
        require(kept[i] < static_cast<std::size_t>(hyperedge_weights.size()), "hyperedge weight count mismatch");
        w(static_cast<Eigen::Index>(i)) = hyperedge_weights(static_cast<Eigen::Index>(kept[i]));
      }
      hyperedge_weights = std::move(w);
    }
    memberships_.assign(n, {});
    for (std::size_t k = 0; k < hyperedges_.size(); ++k)
      for (NodeId u : hyperedges_[k]) memberships_[u].push_back(static_cast<NodeId>(k));

    auto [w, u] = compute_default_weights(hyperedges_, pairwise_);
    hyperedge_weights_ = hyperedge_weights.size() > 0 ? std::move(hyperedge_weights) : std::move(w);
    node_weights_ = node_weights.size() > 0 ? std::move(node_weights) : std::move(u);
    require(static_cast<std::size_t>(hyperedge_weights_.size()) == hyperedges_.size(), "hyperedge weight count mismatch");
    require(static_cast<std::size_t>(node_weights_.size()) == n, "node weight count mismatch");
    require((hyperedge_weights_.array() > 0.0).all(), "hyperedge weights must be strictly positive");
    require((node_weights_.array() > 0.0).all(), "node weights must be strictly positive");
  }

  std::size_t node_count() const { return static_cast<std::size_t>(features_.rows()); }
  std::size_t hyperedge_count() const { return hyperedges_.size(); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features_.cols()); }
  const Matrix& features() const { return features_; }
  const std::vector<NodeSet>& hyperedges() const { return hyperedges_; }
  const NodeSet& hyperedge(std::size_t k) const { return hyperedges_[k]; }
  const EdgeSet& pairwise() const { return pairwise_; }
  const Vector& hyperedge_weights() const { return hyperedge_weights_; }
  const Vector& node_weights() const { return node_weights_; }
  /// Hyperedge ids that contain `u`, ascending.
  const std::vector<NodeId>& memberships(NodeId u) const { return memberships_[u]; }

  /// W_k = |e_k|; U_u = pairwise degree of u, floored at 1.
  static std::pair<Vector, Vector> compute_default_weights(const std::vector<NodeSet>& hyperedges,
                                                           const EdgeSet& pairwise) {
    Vector w(static_cast<Eigen::Index>(hyperedges.size()));
    for (std::size_t k = 0; k < hyperedges.size(); ++k)
      w(static_cast<Eigen::Index>(k)) = static_cast<double>(hyperedges[k].size());
    Vector u(static_cast<Eigen::Index>(pairwise.node_count()));
    for (std::size_t i = 0; i < pairwise.node_count(); ++i)
      u(static_cast<Eigen::Index>(i)) = std::max(1.0, static_cast<double>(pairwise.degree(static_cast<NodeId>(i))));
    return {std::move(w), std::move(u)};
  }

 private:
  Matrix features_;
  std::vector<NodeSet> hyperedges_;
  EdgeSet pairwise_;
  Vector hyperedge_weights_;
  Vector node_weights_;
  std::vector<std::vector<NodeId>> memberships_;
};

inline std::pair<Vector, Vector> default_weights(const Hypergraph& g) {
  return Hypergraph::compute_default_weights(g.hyperedges(), g.pairwise());
}

struct IncidenceMatrix {
  SparseMatrix entries;  // N x M, binary
  Vector node_degrees;   // D^v(u) = sum_k W_k H_uk
  Vector edge_degrees;   // D^e(k) = sum_u U_u H_uk

  std::size_t node_count() const { return static_cast<std::size_t>(entries.rows()); }
  std::size_t hyperedge_count() const { return static_cast<std::size_t>(entries.cols()); }
};

inline IncidenceMatrix build_incidence(const Hypergraph& g) {
  if (g.hyperedge_count() == 0) throw DataError("no environments");
  const auto n = static_cast<Eigen::Index>(g.node_count());
  const auto m = static_cast<Eigen::Index>(g.hyperedge_count());
  std::vector<Triplet> trip;
  IncidenceMatrix inc;
  inc.node_degrees = Vector::Zero(n);
  inc.edge_degrees = Vector::Zero(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (NodeId u : g.hyperedge(static_cast<std::size_t>(k))) {
      trip.emplace_back(u, k, 1.0);
      inc.node_degrees(u) += g.hyperedge_weights()(k);
      inc.edge_degrees(k) += g.node_weights()(u);
    }
  }
  inc.entries.resize(n, m);
  inc.entries.setFromTriplets(trip.begin(), trip.end());
  inc.entries.makeCompressed();
  return inc;
}

struct PairwiseAdjacency {
  SparseMatrix adjacency;  // symmetric binary
  Vector degrees;
};

inline PairwiseAdjacency pairwise_adjacency(const EdgeSet& edges, bool add_self_loops) {
  const auto n = static_cast<Eigen::Index>(edges.node_count());
  std::vector<Triplet> trip;
  trip.reserve(edges.size() * 2 + (add_self_loops ? static_cast<std::size_t>(n) : 0));
  for (auto [a, b] : edges.pairs()) {
    trip.emplace_back(a, b, 1.0);
    trip.emplace_back(b, a, 1.0);
  }
  if (add_self_loops)
    for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(i, i, 1.0);
  PairwiseAdjacency out;
  out.adjacency.resize(n, n);
  out.adjacency.setFromTriplets(trip.begin(), trip.end());
  out.adjacency.makeCompressed();
  out.degrees = Vector::Zero(n);
  for (Eigen::Index c = 0; c < out.adjacency.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(out.adjacency, c); it; ++it) out.degrees(it.row()) += it.value();
  return out;
}

inline PairwiseAdjacency pairwise_adjacency(const Hypergraph& g, bool add_self_loops) {
  return pairwise_adjacency(g.pairwise(), add_self_loops);
}

/// D^{-1/2} A D^{-1/2}. Throws on a zero-degree row.
inline SparseMatrix normalized_adjacency(const PairwiseAdjacency& a) {
  Vector inv_sqrt(a.degrees.size());
  for (Eigen::Index i = 0; i < a.degrees.size(); ++i) {
    if (!(a.degrees(i) > 0.0)) throw NumericError("zero-degree row in pairwise adjacency");
    inv_sqrt(i) = 1.0 / std::sqrt(a.degrees(i));
  }
  SparseMatrix out = inv_sqrt.asDiagonal() * a.adjacency * inv_sqrt.asDiagonal();
  out.makeCompressed();
  return out;
}

/// Hyperedges as nodes, with undirected co-occurrence edges.
struct LineGraph {
  std::size_t node_count = 0;
  std::vector<NodePair> edges;  // sorted, canonical

  EdgeSet as_edge_set() const { return EdgeSet(node_count, edges); }
};

}  // namespace hyperflow
