#pragma once

#include "hyperflow/common.hpp"
#include "hyperflow/core/graph.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <queue>
#include <vector>

namespace hyperflow {

namespace detail {

inline std::vector<NodeSet> groups_from_labels(const std::vector<std::size_t>& labels, std::size_t min_size) {
  std::map<std::size_t, NodeSet> groups;
  for (std::size_t u = 0; u < labels.size(); ++u) groups[labels[u]].push_back(static_cast<NodeId>(u));
  std::vector<NodeSet> out;
  for (auto& [_, g] : groups)
    if (g.size() >= min_size) out.push_back(std::move(g));
  std::sort(out.begin(), out.end(), [](const NodeSet& a, const NodeSet& b) { return a.front() < b.front(); });
  return out;
}

}  // namespace detail

struct KMeansResult {
  std::vector<std::size_t> labels;
  Matrix centroids;
  double inertia = 0.0;
};

/// Lloyd iterations from k-means++ seeds; best of `restarts` by inertia.
inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, std::size_t restarts = 8,
                           std::size_t max_iter = 300) {
  const auto n = static_cast<std::size_t>(x.rows());
  require(k >= 1, "k must be at least 1");
  if (k > n) throw std::invalid_argument("k exceeds node count");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t rep = 0; rep < restarts; ++rep) {
    Rng rng(derive_seed(derive_seed(seed, "kmeans"), rep));
    Matrix c(static_cast<Eigen::Index>(k), x.cols());
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::size_t first = uniform_index(rng, n);
    c.row(0) = x.row(static_cast<Eigen::Index>(first));
    for (std::size_t j = 1; j < k; ++j) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d2[i] = std::min(d2[i], (x.row(static_cast<Eigen::Index>(i)) - c.row(static_cast<Eigen::Index>(j - 1))).squaredNorm());
        total += d2[i];
      }
      std::size_t pick = 0;
      if (total > 0.0) {
        double r = uniform_unit(rng) * total;
        for (pick = 0; pick + 1 < n; ++pick) {
          r -= d2[pick];
          if (r < 0.0) break;
        }
        while (d2[pick] == 0.0) pick = (pick + 1) % n;
      } else {
        pick = uniform_index(rng, n);
      }
      c.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(pick));
    }

    std::vector<std::size_t> labels(n, k);
    double inertia = 0.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
      bool changed = false;
      inertia = 0.0;
      std::vector<double> dist(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t arg = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
          const double d = (x.row(static_cast<Eigen::Index>(i)) - c.row(static_cast<Eigen::Index>(j))).squaredNorm();
          if (d < bd) {
            bd = d;
            arg = j;
          }
        }
        dist[i] = bd;
        inertia += bd;
        if (labels[i] != arg) {
          labels[i] = arg;
          changed = true;
        }
      }
      std::vector<std::size_t> counts(k, 0);
      Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), x.cols());
      for (std::size_t i = 0; i < n; ++i) {
        ++counts[labels[i]];
        sums.row(static_cast<Eigen::Index>(labels[i])) += x.row(static_cast<Eigen::Index>(i));
      }
      for (std::size_t j = 0; j < k; ++j) {
        if (counts[j] > 0) {
          c.row(static_cast<Eigen::Index>(j)) = sums.row(static_cast<Eigen::Index>(j)) / static_cast<double>(counts[j]);
          continue;
        }
        // Empty cluster: steal the point farthest from its centroid among clusters of size > 1.
        std::size_t far = n;
        for (std::size_t i = 0; i < n; ++i)
          if (counts[labels[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
        if (far == n) continue;
        --counts[labels[far]];
        labels[far] = j;
        counts[j] = 1;
        dist[far] = 0.0;
        c.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(far));
        changed = true;
      }
      if (!changed) break;
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = labels;
      best.centroids = c;
    }
  }
  return best;
}

/// Attribute-clustering environments: one hyperedge per k-means cluster.
inline std::vector<NodeSet> hyperedges_from_clusters(const Matrix& x, std::size_t k, std::uint64_t seed) {
  return detail::groups_from_labels(kmeans(x, k, seed).labels, 1);
}

/// Newman modularity of a node partition on an unweighted graph.
inline double modularity(const EdgeSet& edges, const std::vector<std::size_t>& labels) {
  const double m = static_cast<double>(edges.size());
  if (m == 0.0) return 0.0;
  std::map<std::size_t, double> inner, tot;
  for (auto [a, b] : edges.pairs())
    if (labels[a] == labels[b]) inner[labels[a]] += 1.0;
  for (std::size_t u = 0; u < edges.node_count(); ++u) tot[labels[u]] += static_cast<double>(edges.degree(static_cast<NodeId>(u)));
  double q = 0.0;
  for (auto [c, t] : tot) q += inner[c] / m - (t / (2.0 * m)) * (t / (2.0 * m));
  return q;
}

/// Louvain greedy modularity optimization (local moves + aggregation). Deterministic:
/// nodes are visited in id order and ties keep the current community, then the lowest id.
inline std::vector<std::size_t> louvain(const EdgeSet& edges) {
  const std::size_t n0 = edges.node_count();
  using Adj = std::vector<std::map<std::size_t, double>>;
  Adj adj(n0);
  for (auto [a, b] : edges.pairs()) {
    adj[a][b] += 1.0;
    adj[b][a] += 1.0;
  }
  std::vector<std::size_t> node_to_comm(n0);
  for (std::size_t i = 0; i < n0; ++i) node_to_comm[i] = i;
  const double m2 = 2.0 * static_cast<double>(edges.size());
  if (m2 == 0.0) return node_to_comm;

  for (;;) {
    const std::size_t n = adj.size();
    std::vector<double> k(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (auto [j, w] : adj[i]) k[i] += (i == j) ? 2.0 * w : w;
    std::vector<std::size_t> comm(n);
    std::vector<double> tot(n);
    for (std::size_t i = 0; i < n; ++i) {
      comm[i] = i;
      tot[i] = k[i];
    }
    bool improved = false;
    for (bool moved = true; moved;) {
      moved = false;
      for (std::size_t i = 0; i < n; ++i) {
        std::map<std::size_t, double> links;
        for (auto [j, w] : adj[i])
          if (j != i) links[comm[j]] += w;
        const std::size_t own = comm[i];
        tot[own] -= k[i];
        std::size_t best = own;
        double best_gain = links[own] - tot[own] * k[i] / m2;
        for (auto [c, w] : links) {
          const double gain = w - tot[c] * k[i] / m2;
          if (gain > best_gain + 1e-12) {
            best_gain = gain;
            best = c;
          }
        }
        tot[best] += k[i];
        if (best != own) {
          comm[i] = best;
          moved = improved = true;
        }
      }
    }
    if (!improved) break;

    std::map<std::size_t, std::size_t> relabel;
    for (std::size_t i = 0; i < n; ++i) relabel.emplace(comm[i], relabel.size());
    for (auto& c : node_to_comm) c = relabel[comm[c]];
    Adj next(relabel.size());
    for (std::size_t i = 0; i < n; ++i)
      for (auto [j, w] : adj[i]) next[relabel[comm[i]]][relabel[comm[j]]] += (i == j) ? 2.0 * w : w;
    // Intra-community weight arrived from both endpoints; store self-loops single-counted.
    for (std::size_t c = 0; c < next.size(); ++c)
      if (auto it = next[c].find(c); it != next[c].end()) it->second /= 2.0;
    adj = std::move(next);
  }
  return node_to_comm;
}

/// Community environments: Louvain communities with at least two members.
inline std::vector<NodeSet> hyperedges_from_communities(const EdgeSet& edges) {
  require(!edges.empty(), "community detection needs at least one edge");
  return detail::groups_from_labels(louvain(edges), 2);
}

/// Neighbourhood environments: {u} plus every node within k hops, duplicates merged.
inline std::vector<NodeSet> hyperedges_from_khop(const EdgeSet& edges, std::size_t k) {
  require(k >= 1, "hop count must be at least 1");
  const std::size_t n = edges.node_count();
  std::vector<NodeSet> out;
  std::vector<std::size_t> depth(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(depth.begin(), depth.end(), std::numeric_limits<std::size_t>::max());
    NodeSet members{static_cast<NodeId>(s)};
    std::queue<NodeId> q;
    q.push(static_cast<NodeId>(s));
    depth[s] = 0;
    while (!q.empty()) {
      const NodeId u = q.front();
      q.pop();
      if (depth[u] == k) continue;
      for (NodeId v : edges.neighbours(u)) {
        if (depth[v] != std::numeric_limits<std::size_t>::max()) continue;
        depth[v] = depth[u] + 1;
        members.push_back(v);
        q.push(v);
      }
    }
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  return normalize_hyperedges(n, std::move(out));
}

}  // namespace hyperflow
