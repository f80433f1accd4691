#pragma once

#include "hyperflow/common.hpp"
#include "hyperflow/core/graph.hpp"
#include "hyperflow/model/nn.hpp"

#include <vector>

namespace hyperflow {

/// Aligned pairs (u, u) and ordered non-adjacent pairs (u, v), u != v.
struct PairBatch {
  std::vector<NodePair> positives;
  std::vector<NodePair> negatives;
};

/// P = {(u, u)}; N = neg_ratio * |V| ordered non-adjacent pairs by rejection sampling.
inline PairBatch sample_pairs(const EdgeSet& edges, std::size_t neg_ratio, Rng& rng) {
  require(neg_ratio >= 1, "negative ratio must be at least 1");
  const std::size_t n = edges.node_count();
  if (edges.non_edge_count() == 0) throw DataError("no valid negative pairs: graph is complete");
  PairBatch b;
  b.positives.reserve(n);
  for (std::size_t u = 0; u < n; ++u) b.positives.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(u));
  b.negatives.reserve(n * neg_ratio);
  while (b.negatives.size() < n * neg_ratio) {
    const auto u = static_cast<NodeId>(uniform_index(rng, n));
    const auto v = static_cast<NodeId>(uniform_index(rng, n));
    if (u != v && !edges.contains(u, v)) b.negatives.emplace_back(u, v);
  }
  return b;
}

inline PairBatch sample_pairs(const EdgeSet& edges, std::size_t neg_ratio, std::uint64_t seed) {
  Rng rng = make_rng(seed, "train/pairs");
  return sample_pairs(edges, neg_ratio, rng);
}

struct LossValue {
  double total = 0.0;
  double positive = 0.0;
  double negative = 0.0;
};

/// sum_P [|X_u - Xh_u|^2 - m_p]+  +  sum_N [m_n - |X_u - Xh_v|^2]+ .
/// Writes dL/dXh into `grad` when given; the clamp has subgradient 0 at its kink.
inline LossValue dual_contrastive_loss(const Matrix& x, const Matrix& x_hat, const PairBatch& batch, double m_p,
                                       double m_n, Matrix* grad = nullptr) {
  require(x.rows() == x_hat.rows() && x.cols() == x_hat.cols(), "feature and reconstruction shapes differ");
  if (grad) *grad = Matrix::Zero(x_hat.rows(), x_hat.cols());
  LossValue l;
  for (auto [u, v] : batch.positives) {
    const Eigen::RowVectorXd diff = x.row(u) - x_hat.row(v);
    const double slack = diff.squaredNorm() - m_p;
    if (slack > 0.0) {
      l.positive += slack;
      if (grad) grad->row(v) -= 2.0 * diff;
    }
  }
  for (auto [u, v] : batch.negatives) {
    const Eigen::RowVectorXd diff = x.row(u) - x_hat.row(v);
    const double slack = m_n - diff.squaredNorm();
    if (slack > 0.0) {
      l.negative += slack;
      if (grad) grad->row(v) += 2.0 * diff;
    }
  }
  l.total = l.positive + l.negative;
  return l;
}

enum class TaskKind { none, link_prediction, rating_regression };

inline TaskKind parse_task(const std::string& name) {
  if (name.empty() || name == "none") return TaskKind::none;
  if (name == "link_prediction" || name == "link") return TaskKind::link_prediction;
  if (name == "rating_regression" || name == "rating") return TaskKind::rating_regression;
  throw ConfigError("unknown task: " + name);
}

/// Supervision for the jointly trained ("unpluggable") head.
struct TaskData {
  TaskKind kind = TaskKind::none;
  std::vector<NodePair> pairs;  // training links (link task) or rated pairs (rating task)
  std::vector<double> targets;  // rating targets, already scaled to [0, 1]
  EdgeSet known;                // links excluded from negative sampling (link task)
  std::size_t neg_ratio = 1;
};

/// Pair labels for one epoch of the link head: every training link plus sampled non-links.
struct LinkBatch {
  std::vector<NodePair> pairs;
  std::vector<double> labels;
};

inline LinkBatch sample_link_batch(const TaskData& t, Rng& rng) {
  LinkBatch b;
  for (auto p : t.pairs) {
    b.pairs.push_back(p);
    b.labels.push_back(1.0);
  }
  if (t.known.non_edge_count() > 0) {
    const std::size_t n = t.known.node_count();
    for (std::size_t i = 0; i < t.pairs.size() * t.neg_ratio; ++i) {
      for (;;) {
        const auto u = static_cast<NodeId>(uniform_index(rng, n));
        const auto v = static_cast<NodeId>(uniform_index(rng, n));
        if (u == v || t.known.contains(u, v)) continue;
        b.pairs.emplace_back(u, v);
        b.labels.push_back(0.0);
        break;
      }
    }
  }
  return b;
}

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// Mean logistic loss on inner products of embedding rows.
inline double link_logistic_loss(const Matrix& emb, const LinkBatch& b, Matrix* grad = nullptr) {
  if (grad) *grad = Matrix::Zero(emb.rows(), emb.cols());
  if (b.pairs.empty()) return 0.0;
  const double w = 1.0 / static_cast<double>(b.pairs.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < b.pairs.size(); ++i) {
    const auto [u, v] = b.pairs[i];
    const double s = emb.row(u).dot(emb.row(v));
    const double y = b.labels[i];
    loss += y > 0.5 ? softplus(-s) : softplus(s);
    if (grad) {
      const double g = w * (sigmoid(s) - y);
      const Eigen::RowVectorXd ru = emb.row(u);
      grad->row(u) += g * emb.row(v);
      grad->row(v) += g * ru;
    }
  }
  return loss * w;
}

/// Mean absolute error between sigmoid(<R_u, R_v>) and the scaled targets.
inline double rating_l1_loss(const Matrix& emb, const std::vector<NodePair>& pairs, const std::vector<double>& targets,
                             Matrix* grad = nullptr) {
  require(pairs.size() == targets.size(), "rating pairs and targets differ in length");
  if (grad) *grad = Matrix::Zero(emb.rows(), emb.cols());
  if (pairs.empty()) return 0.0;
  const double w = 1.0 / static_cast<double>(pairs.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [u, v] = pairs[i];
    const double s = emb.row(u).dot(emb.row(v));
    const double pred = sigmoid(s);
    const double r = pred - targets[i];
    loss += std::abs(r);
    if (grad && r != 0.0) {
      const double g = w * (r > 0.0 ? 1.0 : -1.0) * pred * (1.0 - pred);
      const Eigen::RowVectorXd ru = emb.row(u);
      grad->row(u) += g * emb.row(v);
      grad->row(v) += g * ru;
    }
  }
  return loss * w;
}

/// Min-max scaling of raw scores into [0, 1]; constant inputs map to 1.
inline std::vector<double> scale_unit(const std::vector<double>& raw) {
  if (raw.empty()) return {};
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  std::vector<double> out;
  out.reserve(raw.size());
  for (double r : raw) out.push_back(*hi > *lo ? (r - *lo) / (*hi - *lo) : 1.0);
  return out;
}

}  // namespace hyperflow
