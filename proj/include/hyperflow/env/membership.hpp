#pragma once

#include "hyperflow/common.hpp"
#include "hyperflow/core/graph.hpp"
#include "hyperflow/model/nn.hpp"

#include <numeric>
#include <vector>

namespace hyperflow {

/// Soft node-to-environment membership F (N x C), entries in [0, 1].
struct MembershipMatrix {
  Matrix values;
  std::size_t env_count() const { return static_cast<std::size_t>(values.cols()); }
};

/// f(X | theta): one rectified hidden layer, then C outputs squashed into (0, 1).
struct MembershipNet {
  Matrix w1, b1, w2, b2;  // biases are 1 x width row vectors

  static MembershipNet init(std::size_t in_dim, std::size_t hidden, std::size_t envs, Rng& rng) {
    MembershipNet net;
    const auto d = static_cast<Eigen::Index>(in_dim), h = static_cast<Eigen::Index>(hidden),
               c = static_cast<Eigen::Index>(envs);
    net.w1 = glorot(d, h, rng);
    net.b1 = Matrix::Zero(1, h);
    net.w2 = glorot(h, c, rng);
    net.b2 = Matrix::Zero(1, c);
    return net;
  }

  std::size_t env_count() const { return static_cast<std::size_t>(w2.cols()); }

  struct Cache {
    Matrix z1, h1, z2, out;
  };

  Cache forward_cached(const Matrix& x) const {
    require(x.cols() == w1.rows(), "membership net: feature width mismatch");
    Cache c;
    c.z1 = (x * w1).rowwise() + b1.row(0);
    c.h1 = activate(Activation::relu, c.z1);
    c.z2 = (c.h1 * w2).rowwise() + b2.row(0);
    c.out = activate(Activation::sigmoid, c.z2);
    return c;
  }

  MembershipMatrix forward(const Matrix& x) const { return {forward_cached(x).out}; }

  std::vector<Matrix*> tensors() { return {&w1, &b1, &w2, &b2}; }
};

/// Positive (linked) and negative (unlinked) node pairs for the membership objective.
struct MembershipSamples {
  std::vector<NodePair> positives;
  std::vector<NodePair> negatives;
};

inline constexpr double kMembershipDotFloor = 1e-9;

/// -E+[log(1 - exp(-f_u.f_v))] + E-[f_u.f_v]; also returns dObjective/dF when `grad_f` is set.
inline double membership_objective(const Matrix& f, const MembershipSamples& s, Matrix* grad_f = nullptr) {
  if (grad_f) *grad_f = Matrix::Zero(f.rows(), f.cols());
  double pos = 0.0, neg = 0.0;
  const double wp = s.positives.empty() ? 0.0 : 1.0 / static_cast<double>(s.positives.size());
  const double wn = s.negatives.empty() ? 0.0 : 1.0 / static_cast<double>(s.negatives.size());
  for (auto [u, v] : s.positives) {
    const double raw = f.row(u).dot(f.row(v));
    const bool clamped = raw < kMembershipDotFloor;
    const double dot = clamped ? kMembershipDotFloor : raw;
    pos += -std::log(-std::expm1(-dot));
    if (grad_f && !clamped) {
      const double g = -wp / std::expm1(dot);
      grad_f->row(u) += g * f.row(v);
      grad_f->row(v) += g * f.row(u);
    }
  }
  for (auto [u, v] : s.negatives) {
    neg += f.row(u).dot(f.row(v));
    if (grad_f) {
      grad_f->row(u) += wn * f.row(v);
      grad_f->row(v) += wn * f.row(u);
    }
  }
  return pos * wp + neg * wn;
}

struct MembershipGradients {
  Matrix w1, b1, w2, b2;
  std::vector<const Matrix*> tensors() const { return {&w1, &b1, &w2, &b2}; }
};

inline MembershipGradients membership_backward(const MembershipNet& net, const Matrix& x,
                                               const MembershipNet::Cache& c, const Matrix& grad_f) {
  MembershipGradients g;
  const Matrix dz2 = activation_backward(Activation::sigmoid, c.z2, grad_f);
  g.w2 = c.h1.transpose() * dz2;
  g.b2 = dz2.colwise().sum();
  const Matrix dz1 = activation_backward(Activation::relu, c.z1, dz2 * net.w2.transpose());
  g.w1 = x.transpose() * dz1;
  g.b1 = dz1.colwise().sum();
  return g;
}

/// Uniform unordered pair (u != v) absent from `edges`. Requires at least one such pair.
inline NodePair sample_non_edge(const EdgeSet& edges, Rng& rng) {
  const auto n = edges.node_count();
  for (;;) {
    const auto u = static_cast<NodeId>(uniform_index(rng, n));
    const auto v = static_cast<NodeId>(uniform_index(rng, n));
    if (u != v && !edges.contains(u, v)) return canonical_pair(u, v);
  }
}

struct MembershipConfig {
  std::size_t envs = 4;
  std::size_t hidden = 64;
  std::size_t neg_ratio = 5;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr = 0.01;
  std::uint64_t seed = 0;
};

struct MembershipFit {
  MembershipNet net;
  MembershipMatrix membership;
  std::vector<double> history;  // objective on a fixed evaluation sample, per epoch
};

/// Minimizes the membership negative log-likelihood with minibatch Adam. Positives are the
/// pairwise links; negatives are fresh uniform non-adjacent pairs each epoch.
inline MembershipFit fit_membership(const Matrix& x, const EdgeSet& edges, const MembershipConfig& cfg) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (edges.empty()) throw DataError("no positive pairs for the membership objective");
  require(cfg.envs >= 1, "environment count must be at least 1");
  require(cfg.envs <= n, "environment count exceeds node count");
  require(cfg.neg_ratio >= 1 && cfg.batch_size >= 1 && cfg.hidden >= 1, "invalid membership settings");
  const bool has_negatives = edges.non_edge_count() > 0;

  Rng init_rng = make_rng(cfg.seed, "membership/init");
  MembershipFit fit;
  fit.net = MembershipNet::init(static_cast<std::size_t>(x.cols()), cfg.hidden, cfg.envs, init_rng);

  MembershipSamples eval;
  {
    Rng rng = make_rng(cfg.seed, "membership/eval");
    eval.positives = edges.pairs();
    if (has_negatives)
      for (std::size_t i = 0; i < eval.positives.size() * cfg.neg_ratio; ++i)
        eval.negatives.push_back(sample_non_edge(edges, rng));
  }

  Adam opt(cfg.lr);
  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(derive_seed(cfg.seed, "membership/epoch"), epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      MembershipSamples batch;
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < stop; ++i) {
        batch.positives.push_back(edges.pairs()[order[i]]);
        if (has_negatives)
          for (std::size_t r = 0; r < cfg.neg_ratio; ++r) batch.negatives.push_back(sample_non_edge(edges, rng));
      }
      const auto cache = fit.net.forward_cached(x);
      Matrix grad_f;
      membership_objective(cache.out, batch, &grad_f);
      const auto grads = membership_backward(fit.net, x, cache, grad_f);
      opt.step(fit.net.tensors(), grads.tensors());
    }
    const double obj = membership_objective(fit.net.forward(x).values, eval);
    if (!std::isfinite(obj)) throw NumericError("membership objective diverged");
    fit.history.push_back(obj);
  }
  fit.membership = fit.net.forward(x);
  return fit;
}

/// Node u joins environment j when F_uj >= tau, and always joins its argmax column
/// (lowest index on ties). Empty columns are dropped.
inline std::vector<NodeSet> extract_hyperedges(const MembershipMatrix& f, double tau) {
  require(tau > 0.0 && tau < 1.0, "threshold must lie in (0, 1)");
  const auto& v = f.values;
  std::vector<NodeSet> cols(static_cast<std::size_t>(v.cols()));
  for (Eigen::Index u = 0; u < v.rows(); ++u) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < v.cols(); ++j)
      if (v(u, j) > v(u, best)) best = j;
    for (Eigen::Index j = 0; j < v.cols(); ++j)
      if (v(u, j) >= tau || j == best) cols[static_cast<std::size_t>(j)].push_back(static_cast<NodeId>(u));
  }
  std::vector<NodeSet> out;
  for (auto& c : cols)
    if (!c.empty()) out.push_back(std::move(c));
  return out;
}

}  // namespace hyperflow
