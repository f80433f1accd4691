#pragma once

#include "hyperflow/common.hpp"
#include "hyperflow/core/graph.hpp"
#include "hyperflow/io/formats.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

namespace hyperflow::io {

/// Graph skeleton before environments are attached.
struct Dataset {
  std::size_t node_count = 0;
  Matrix features;
  EdgeSet edges;
  std::map<NodePair, double> edge_weights;  // only for lines that carried a weight
  std::optional<std::vector<NodeSet>> hyperedges;
  std::vector<std::size_t> labels;          // planted block of each node, when generated
};

/// One-hot bucket of floor(log2(degree + 1)); used when no feature file is given.
inline Matrix degree_bucket_features(const EdgeSet& edges) {
  const std::size_t n = edges.node_count();
  std::vector<std::size_t> bucket(n);
  std::size_t width = 1;
  for (std::size_t u = 0; u < n; ++u) {
    std::size_t d = edges.degree(static_cast<NodeId>(u)) + 1, b = 0;
    while (d >>= 1) ++b;
    bucket[u] = b;
    width = std::max(width, b + 1);
  }
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  for (std::size_t u = 0; u < n; ++u) x(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(bucket[u])) = 1.0;
  return x;
}

struct DatasetPaths {
  fs::path edges;
  std::optional<fs::path> features;
  bool features_header = false;
  std::optional<fs::path> hyperedges;
  std::size_t node_count = 0;  // 0: infer from features, else from the largest edge id
};

/// Parses and validates the files, symmetrizes links and drops duplicates / self-loops.
inline Dataset load_dataset(const DatasetPaths& paths) {
  Dataset ds;
  const auto raw = read_edge_file(paths.edges);
  if (paths.features) ds.features = read_features_csv(*paths.features, paths.features_header);

  std::size_t n = paths.node_count;
  if (n == 0 && paths.features) n = static_cast<std::size_t>(ds.features.rows());
  if (n == 0)
    for (const auto& e : raw) n = std::max<std::size_t>(n, std::max(e.src, e.dst) + std::size_t{1});
  if (paths.features && static_cast<std::size_t>(ds.features.rows()) != n)
    throw DataError("feature rows (" + std::to_string(ds.features.rows()) + ") do not match node count (" +
                    std::to_string(n) + ")");

  std::vector<NodePair> pairs;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& e = raw[i];
    if (e.src >= n || e.dst >= n)
      throw DataError("node id out of range in " + paths.edges.string() + " (edge " + std::to_string(i + 1) + ")");
    pairs.emplace_back(e.src, e.dst);
    if (e.weight && e.src != e.dst) ds.edge_weights.emplace(canonical_pair(e.src, e.dst), *e.weight);
  }
  ds.node_count = n;
  ds.edges = EdgeSet(n, pairs);
  if (!paths.features) ds.features = degree_bucket_features(ds.edges);
  if (paths.hyperedges) ds.hyperedges = read_hyperedge_file(*paths.hyperedges, n);
  return ds;
}

struct PlantedSpec {
  std::size_t cliques = 2;
  std::size_t clique_size = 8;
  double inter_p = 0.0;
  double noise = 0.1;
  std::size_t block = 4;  // feature columns per clique
  std::uint64_t seed = 0;
};

/// k complete blocks, inter-block links with probability inter_p, block one-hot features + Gaussian noise.
inline Dataset generate_planted(const PlantedSpec& s) {
  require(s.cliques >= 1 && s.clique_size >= 1 && s.block >= 1, "invalid planted spec");
  require(s.inter_p >= 0.0 && s.inter_p <= 1.0, "inter-block probability must lie in [0, 1]");
  const std::size_t n = s.cliques * s.clique_size;
  Rng rng = make_rng(s.seed, "planted");
  Dataset ds;
  ds.node_count = n;
  ds.labels.resize(n);
  for (std::size_t u = 0; u < n; ++u) ds.labels[u] = u / s.clique_size;
  std::vector<NodePair> pairs;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (ds.labels[u] == ds.labels[v]) {
        pairs.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
      } else if (s.inter_p > 0.0 && uniform_unit(rng) < s.inter_p) {
        pairs.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
      }
    }
  }
  ds.edges = EdgeSet(n, pairs);
  ds.features = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s.cliques * s.block));
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t j = 0; j < s.cliques * s.block; ++j) {
      const double base = j / s.block == ds.labels[u] ? 1.0 : 0.0;
      ds.features(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(j)) = base + s.noise * standard_normal(rng);
    }
  }
  return ds;
}

struct RandomSpec {
  std::size_t nodes = 12;
  std::size_t dim = 5;
  std::size_t hyperedges = 3;
  std::size_t max_size = 5;
  double link_p = 0.3;
  std::uint64_t seed = 0;
};

/// Gaussian features, Bernoulli links (at least one link and one non-link) and random
/// hyperedges of 2..max_size members. Used for gradient checks and property tests.
inline Hypergraph random_hypergraph(const RandomSpec& s) {
  require(s.nodes >= 3 && s.dim >= 1 && s.hyperedges >= 1 && s.max_size >= 2, "invalid random instance spec");
  Rng rng = make_rng(s.seed, "random-instance");
  const auto n = static_cast<Eigen::Index>(s.nodes);
  Matrix x(n, static_cast<Eigen::Index>(s.dim));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
  std::vector<NodePair> pairs;
  for (NodeId u = 0; u < s.nodes; ++u)
    for (NodeId v = u + 1; v < s.nodes; ++v)
      if (uniform_unit(rng) < s.link_p) pairs.emplace_back(u, v);
  if (pairs.empty()) pairs.emplace_back(0, 1);
  if (pairs.size() == s.nodes * (s.nodes - 1) / 2) pairs.pop_back();
  std::vector<NodeSet> edges;
  const std::size_t cap = std::min(s.max_size, s.nodes);
  while (edges.size() < s.hyperedges) {
    const std::size_t size = 2 + uniform_index(rng, cap - 1);
    NodeSet e;
    while (e.size() < size) {
      const auto u = static_cast<NodeId>(uniform_index(rng, s.nodes));
      if (std::find(e.begin(), e.end(), u) == e.end()) e.push_back(u);
    }
    std::sort(e.begin(), e.end());
    if (std::find(edges.begin(), edges.end(), e) == edges.end()) edges.push_back(std::move(e));
  }
  return Hypergraph(std::move(x), std::move(edges), EdgeSet(s.nodes, pairs));
}

}  // namespace hyperflow::io
