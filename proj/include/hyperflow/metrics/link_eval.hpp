#pragma once

#include "hyperflow/common.hpp"
#include "hyperflow/core/graph.hpp"
#include "hyperflow/model/nn.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace hyperflow {

/// Area under the ROC curve via the rank-sum statistic; tied scores count one half.
inline double roc_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  require(!pos.empty() && !neg.empty(), "AUC needs positive and negative scores");
  std::vector<std::pair<double, int>> all;
  all.reserve(pos.size() + neg.size());
  for (double s : pos) all.emplace_back(s, 1);
  for (double s : neg) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j + 1);  // 1-based ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second == 1) rank_sum += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(pos.size()), nn = static_cast<double>(neg.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

/// Held-out link split: training graph, test links and test non-links.
struct LinkSplit {
  EdgeSet train;
  std::vector<NodePair> test_pos;
  std::vector<NodePair> test_neg;
};

/// Holds out `fraction` of the links and draws `neg_per_pos` non-links (of the full graph) per test link.
inline LinkSplit split_links(const EdgeSet& edges, double fraction, std::size_t neg_per_pos, std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0, "holdout fraction must lie in (0, 1)");
  Rng rng = make_rng(seed, "eval/split");
  std::vector<NodePair> pairs = edges.pairs();
  for (std::size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[uniform_index(rng, i)]);
  const auto held = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pairs.size()))));
  require(held < pairs.size(), "holdout leaves no training links");
  LinkSplit s;
  s.test_pos.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(held));
  std::vector<NodePair> rest(pairs.begin() + static_cast<std::ptrdiff_t>(held), pairs.end());
  s.train = EdgeSet(edges.node_count(), rest);
  require(edges.non_edge_count() > 0, "graph has no non-links to sample");
  const std::size_t n = edges.node_count();
  while (s.test_neg.size() < held * neg_per_pos) {
    const auto u = static_cast<NodeId>(uniform_index(rng, n));
    const auto v = static_cast<NodeId>(uniform_index(rng, n));
    if (u != v && !edges.contains(u, v)) s.test_neg.push_back(canonical_pair(u, v));
  }
  return s;
}

inline std::vector<double> inner_product_scores(const Matrix& emb, const std::vector<NodePair>& pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (auto [u, v] : pairs) out.push_back(emb.row(u).dot(emb.row(v)));
  return out;
}

/// Logistic-regression head on Hadamard products of endpoint embeddings, used for the
/// separately trained downstream step of the self-supervised mode.
struct HadamardLogistic {
  Matrix w;  // d x 1
  double b = 0.0;

  static Eigen::RowVectorXd feature(const Matrix& emb, NodePair p) {
    return emb.row(p.first).cwiseProduct(emb.row(p.second));
  }

  double score(const Matrix& emb, NodePair p) const { return feature(emb, p).dot(w.col(0)) + b; }

  static HadamardLogistic fit(const Matrix& emb, const std::vector<NodePair>& pos, const std::vector<NodePair>& neg,
                              std::size_t epochs = 300, double lr = 0.05) {
    HadamardLogistic m;
    m.w = Matrix::Zero(emb.cols(), 1);
    Matrix bias = Matrix::Zero(1, 1);
    Adam opt(lr);
    const double wt = 1.0 / static_cast<double>(pos.size() + neg.size());
    for (std::size_t e = 0; e < epochs; ++e) {
      Matrix gw = Matrix::Zero(emb.cols(), 1);
      Matrix gb = Matrix::Zero(1, 1);
      auto acc = [&](NodePair p, double y) {
        const Eigen::RowVectorXd f = feature(emb, p);
        const double g = wt * (sigmoid(f.dot(m.w.col(0)) + bias(0, 0)) - y);
        gw.col(0) += g * f.transpose();
        gb(0, 0) += g;
      };
      for (auto p : pos) acc(p, 1.0);
      for (auto p : neg) acc(p, 0.0);
      opt.step({&m.w, &bias}, {&gw, &gb});
    }
    m.b = bias(0, 0);
    return m;
  }
};

}  // namespace hyperflow
