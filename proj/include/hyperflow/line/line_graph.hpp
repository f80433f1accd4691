#pragma once

#include "hyperflow/common.hpp"
#include "hyperflow/core/graph.hpp"

#include <algorithm>
#include <map>
#include <thread>
#include <vector>

namespace hyperflow {

/// Multiset of unordered hyperedge pairs visited consecutively by walks.
struct WalkMultiset {
  std::map<NodePair, std::uint64_t> pair_counts;
  std::uint64_t total = 0;

  void add(NodePair p, std::uint64_t count = 1) {
    pair_counts[p] += count;
    total += count;
  }
  void merge(const WalkMultiset& other) {
    for (auto [p, c] : other.pair_counts) add(p, c);
  }
  bool empty() const { return total == 0; }
};

struct WalkConfig {
  std::size_t max_length = 3;
  std::size_t repeats = 10;
  std::uint64_t seed = 0;
};

namespace detail {

// One walk on the node/hyperedge bipartite graph. Each hop picks a member of the current
// hyperedge uniformly, then a different hyperedge of that member uniformly; the walk ends when
// the member has no other hyperedge or after `max_length` hops.
inline void walk_from(const Hypergraph& g, NodeId start, std::size_t max_length, Rng& rng, WalkMultiset& out) {
  NodeId current = start;
  for (std::size_t hop = 0; hop < max_length; ++hop) {
    const auto& members = g.hyperedge(current);
    const NodeId member = members[uniform_index(rng, members.size())];
    const auto& envs = g.memberships(member);
    if (envs.size() < 2) return;
    // envs is sorted and contains `current`; draw among the others without building a copy.
    auto pos = static_cast<std::size_t>(std::lower_bound(envs.begin(), envs.end(), current) - envs.begin());
    std::size_t pick = uniform_index(rng, envs.size() - 1);
    if (pick >= pos) ++pick;
    const NodeId next = envs[pick];
    out.add(canonical_pair(current, next));
    current = next;
  }
}

}  // namespace detail

/// Walk multiset of the fast line-graph estimator. Every (repeat, start) walk has its own RNG
/// stream, so the result depends only on the seed, not on the worker count.
inline WalkMultiset random_walk_multiset(const Hypergraph& g, const WalkConfig& cfg) {
  require(cfg.max_length >= 1, "walk length must be at least 1");
  require(cfg.repeats >= 1, "repeat count must be at least 1");
  const std::size_t m = g.hyperedge_count();
  const std::size_t tasks = cfg.repeats * m;
  const std::uint64_t root = derive_seed(cfg.seed, "line/walks");
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), std::max<std::size_t>(tasks, 1)));

  std::vector<WalkMultiset> partial(workers);
  auto run = [&](unsigned w) {
    for (std::size_t t = w; t < tasks; t += workers) {
      Rng rng(derive_seed(root, t));
      detail::walk_from(g, static_cast<NodeId>(t % m), cfg.max_length, rng, partial[w]);
    }
  };
  if (workers <= 1) {
    if (!partial.empty()) run(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  WalkMultiset out;
  for (const auto& p : partial) out.merge(p);
  return out;
}

/// Draws `draws` pairs i.i.d. with probability count / total and keeps the distinct ones.
inline LineGraph sample_line_edges(const WalkMultiset& c, std::size_t node_count, std::size_t draws,
                                   std::uint64_t seed) {
  require(draws >= 1, "draw count must be at least 1");
  LineGraph lg;
  lg.node_count = node_count;
  if (c.empty()) return lg;
  std::vector<NodePair> keys;
  std::vector<std::uint64_t> cumulative;
  std::uint64_t acc = 0;
  for (auto [p, n] : c.pair_counts) {
    keys.push_back(p);
    acc += n;
    cumulative.push_back(acc);
  }
  Rng rng = make_rng(seed, "line/sample");
  std::vector<bool> hit(keys.size(), false);
  for (std::size_t i = 0; i < draws; ++i) {
    const std::uint64_t r = uniform_index(rng, acc);
    const auto idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
    hit[idx] = true;
  }
  for (std::size_t i = 0; i < keys.size(); ++i)
    if (hit[i]) lg.edges.push_back(keys[i]);
  return lg;
}

/// Walk, then sample; `draws == 0` means one draw per multiset entry.
inline LineGraph fast_line_graph(const Hypergraph& g, const WalkConfig& cfg, std::size_t draws = 0) {
  const auto c = random_walk_multiset(g, cfg);
  const std::size_t m = draws > 0 ? draws : static_cast<std::size_t>(std::max<std::uint64_t>(c.total, 1));
  return sample_line_edges(c, g.hyperedge_count(), m, cfg.seed);
}

/// Pairwise Jaccard similarity of hyperedges (dense M x M, zero diagonal). Test oracle only.
inline Matrix exact_similarity(const Hypergraph& g) {
  const std::size_t m = g.hyperedge_count();
  require(m >= 1, "need at least one hyperedge");
  Matrix s = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto& a = g.hyperedge(i);
      const auto& b = g.hyperedge(j);
      std::vector<NodeId> inter;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
      const double uni = static_cast<double>(a.size() + b.size() - inter.size());
      const double v = static_cast<double>(inter.size()) / uni;
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      s(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return s;
}

/// Includes each pair (i, j), i < j, independently with probability s_ij.
inline LineGraph bernoulli_line_graph(const Matrix& s, std::uint64_t seed) {
  require(s.rows() == s.cols(), "similarity matrix must be square");
  LineGraph lg;
  lg.node_count = static_cast<std::size_t>(s.rows());
  Rng rng = make_rng(seed, "line/bernoulli");
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = i + 1; j < s.cols(); ++j)
      if (uniform_unit(rng) < s(i, j)) lg.edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
  return lg;
}

}  // namespace hyperflow
