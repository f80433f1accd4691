#pragma once

#include "hyperflow/common.hpp"
#include "hyperflow/core/graph.hpp"
#include "hyperflow/model/nn.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <vector>

namespace hyperflow {

/// Mean embedding of a hyperedge's members.
inline Eigen::RowVectorXd group_mean(const Matrix& emb, const NodeSet& members) {
  require(!members.empty(), "hyperedge must be nonempty");
  Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(emb.cols());
  for (NodeId u : members) m += emb.row(u);
  return m / static_cast<double>(members.size());
}

/// p_ui = sigmoid(<emb_u, mean of members of i>), in (0, 1).
inline double membership_confidence(const Matrix& emb, NodeId u, const NodeSet& members) {
  return sigmoid(emb.row(u).dot(group_mean(emb, members)));
}

/// Per-member confidences, reusing one group mean.
inline std::vector<double> member_confidences(const Matrix& emb, const NodeSet& members) {
  const Eigen::RowVectorXd mean = group_mean(emb, members);
  std::vector<double> out;
  out.reserve(members.size());
  for (NodeId u : members) out.push_back(sigmoid(emb.row(u).dot(mean)));
  return out;
}

/// Average over hyperedges (uniformly weighted) of the fraction of members with p_ue > rho.
inline double conformity(const Matrix& emb, const std::vector<NodeSet>& hyperedges, double rho = 0.5) {
  require(rho > 0.0 && rho < 1.0, "significance threshold must lie in (0, 1)");
  if (hyperedges.empty()) throw DataError("conformity needs at least one hyperedge");
  double acc = 0.0;
  for (const auto& e : hyperedges) {
    const auto p = member_confidences(emb, e);
    const auto sig = std::count_if(p.begin(), p.end(), [rho](double v) { return v > rho; });
    acc += static_cast<double>(sig) / static_cast<double>(e.size());
  }
  return acc / static_cast<double>(hyperedges.size());
}

enum class EntropyMode { sum, mean };

inline constexpr double kConfidenceFloor = 1e-12;

/// Group entropy: member-summed uncertainty sum_u -log p_ui (or its mean).
inline double group_entropy(const Matrix& emb, const NodeSet& members, EntropyMode mode = EntropyMode::sum) {
  double acc = 0.0;
  for (double p : member_confidences(emb, members)) acc += -std::log(std::max(p, kConfidenceFloor));
  return mode == EntropyMode::mean ? acc / static_cast<double>(members.size()) : acc;
}

/// Environments of every node.
inline std::vector<NodeSet> node_environments(std::size_t node_count, const std::vector<NodeSet>& hyperedges) {
  std::vector<NodeSet> envs(node_count);
  for (std::size_t k = 0; k < hyperedges.size(); ++k)
    for (NodeId u : hyperedges[k]) envs[u].push_back(static_cast<NodeId>(k));
  return envs;
}

/// |A n B| / |A u B| of two sorted sets; 0 when both are empty.
inline double jaccard(const NodeSet& a, const NodeSet& b) {
  std::size_t inter = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) ++i;
    else if (*j < *i) ++j;
    else {
      ++inter;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct EquivalenceResult {
  double value = 0.0;
  double numerator = 0.0;    // mean environment Jaccard over linked pairs
  double denominator = 0.0;  // same over unlinked pairs
  double numerator_se = 0.0;
  double denominator_se = 0.0;
  bool infinite = false;     // denominator below epsilon
};

inline constexpr double kEquivalenceEps = 1e-9;

/// Ratio of expected environment Jaccard between linked and unlinked node pairs. Pair sets
/// no larger than `sample_count` are enumerated; larger ones are sampled with replacement.
inline EquivalenceResult equivalence(const std::vector<NodeSet>& hyperedges, const EdgeSet& edges,
                                     std::size_t sample_count, std::uint64_t seed, bool force_sampling = false) {
  if (edges.empty()) throw DataError("equivalence needs at least one link");
  if (edges.non_edge_count() == 0) throw DataError("equivalence needs at least one unlinked pair");
  require(sample_count >= 1, "sample count must be at least 1");
  const std::size_t n = edges.node_count();
  const auto envs = node_environments(n, hyperedges);
  Rng rng = make_rng(seed, "metrics/equivalence");

  auto stats = [](const std::vector<double>& v, double& mean, double& se) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    se = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
  };

  std::vector<double> pos, neg;
  if (!force_sampling && edges.size() <= sample_count) {
    for (auto [a, b] : edges.pairs()) pos.push_back(jaccard(envs[a], envs[b]));
  } else {
    for (std::size_t i = 0; i < sample_count; ++i) {
      auto [a, b] = edges.pairs()[uniform_index(rng, edges.size())];
      pos.push_back(jaccard(envs[a], envs[b]));
    }
  }
  if (!force_sampling && edges.non_edge_count() <= sample_count) {
    for (NodeId a = 0; a < n; ++a)
      for (NodeId b = a + 1; b < n; ++b)
        if (!edges.contains(a, b)) neg.push_back(jaccard(envs[a], envs[b]));
  } else {
    while (neg.size() < sample_count) {
      const auto a = static_cast<NodeId>(uniform_index(rng, n));
      const auto b = static_cast<NodeId>(uniform_index(rng, n));
      if (a != b && !edges.contains(a, b)) neg.push_back(jaccard(envs[a], envs[b]));
    }
  }
  EquivalenceResult r;
  stats(pos, r.numerator, r.numerator_se);
  stats(neg, r.denominator, r.denominator_se);
  r.value = r.numerator / (r.denominator + kEquivalenceEps);
  r.infinite = r.denominator < kEquivalenceEps;
  return r;
}

struct EvolvingPoint {
  std::size_t stage = 0;
  std::size_t count = 0;
  double ratio = 0.0;
};

/// Members with p_ui > 0.5 at each snapshot (strictly), relative to the original group size.
inline std::vector<EvolvingPoint> evolving_ratio(const std::vector<Matrix>& snapshots, const NodeSet& members,
                                                 const std::vector<std::size_t>& stages = {}) {
  require(!snapshots.empty(), "need at least one snapshot");
  std::vector<EvolvingPoint> out;
  for (std::size_t t = 0; t < snapshots.size(); ++t) {
    const auto p = member_confidences(snapshots[t], members);
    const auto c = static_cast<std::size_t>(std::count_if(p.begin(), p.end(), [](double v) { return v > 0.5; }));
    out.push_back({stages.empty() ? t : stages[t], c, static_cast<double>(c) / static_cast<double>(members.size())});
  }
  return out;
}

/// Everything the metrics stage reports.
struct MetricReport {
  double conformity = 0.0;
  EquivalenceResult equivalence;
  std::map<std::size_t, double> group_entropies;
  std::map<std::size_t, double> initial_group_entropies;  // filled when initial embeddings are known
  std::vector<std::pair<std::size_t, EvolvingPoint>> evolving;  // (hyperedge id, point)
};

}  // namespace hyperflow
