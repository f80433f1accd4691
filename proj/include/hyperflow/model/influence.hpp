#pragma once

#include "hyperflow/common.hpp"
#include "hyperflow/core/graph.hpp"
#include "hyperflow/model/nn.hpp"

#include <string>
#include <vector>

namespace hyperflow {

/// Influence operator  (D^v)^-1/2 U H W (D^e)^-1 H^T U (D^v)^-1/2.
/// Rows and columns of nodes outside every hyperedge are zero.
inline SparseMatrix theta(const IncidenceMatrix& inc, const Vector& hyperedge_weights, const Vector& node_weights) {
  const auto n = inc.entries.rows();
  const auto m = inc.entries.cols();
  require(hyperedge_weights.size() == m && node_weights.size() == n, "weight vector size mismatch");
  Vector left(n);
  for (Eigen::Index u = 0; u < n; ++u) {
    const double dv = inc.node_degrees(u);
    left(u) = dv > 0.0 ? node_weights(u) / std::sqrt(dv) : 0.0;
  }
  Vector mid(m);
  for (Eigen::Index k = 0; k < m; ++k) mid(k) = hyperedge_weights(k) / inc.edge_degrees(k);
  const SparseMatrix lh = left.asDiagonal() * inc.entries;
  SparseMatrix out = SparseMatrix(lh * mid.asDiagonal()) * SparseMatrix(lh.transpose());
  out.makeCompressed();
  return out;
}

inline SparseMatrix theta(const Hypergraph& g, const IncidenceMatrix& inc) {
  return theta(inc, g.hyperedge_weights(), g.node_weights());
}

/// sum_{k=1..K} gamma^(k-1) Theta^k, materialized.
inline SparseMatrix theta_sum(const SparseMatrix& th, std::size_t hops, double gamma) {
  require(hops >= 1, "hop count must be at least 1");
  require(gamma >= 0.0 && gamma <= 1.0, "decay must lie in [0, 1]");
  SparseMatrix sum = th;
  SparseMatrix power = th;
  double coef = 1.0;
  for (std::size_t k = 2; k <= hops; ++k) {
    coef *= gamma;
    power = SparseMatrix(power * th);
    if (coef != 0.0) sum += coef * power;
  }
  sum.makeCompressed();
  return sum;
}

/// Hypergraph propagation  S = Theta_sum - Diag(Theta_sum) + I. Materialized for small graphs;
/// above `dense_limit` nodes, Theta powers are applied as repeated sparse products instead.
class HyperPropagation {
 public:
  static constexpr std::size_t kMaterializeLimit = 2000;

  HyperPropagation() = default;
  HyperPropagation(const SparseMatrix& th, std::size_t hops, double gamma, std::size_t materialize_limit = kMaterializeLimit)
      : hops_(hops), gamma_(gamma) {
    require(hops >= 1, "hop count must be at least 1");
    require(gamma >= 0.0 && gamma <= 1.0, "decay must lie in [0, 1]");
    if (static_cast<std::size_t>(th.rows()) <= materialize_limit) {
      SparseMatrix s = theta_sum(th, hops, gamma);
      const Vector d = s.diagonal();
      SparseMatrix id(s.rows(), s.cols());
      id.setIdentity();
      SparseMatrix diag_part(s.rows(), s.cols());
      std::vector<Triplet> t;
      for (Eigen::Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d(i));
      diag_part.setFromTriplets(t.begin(), t.end());
      matrix_ = SparseMatrix(s - diag_part + id);
      matrix_.prune(0.0);
      matrix_.makeCompressed();
      materialized_ = true;
    } else {
      theta_ = th;
      diag_ = implicit_diagonal(th, hops, gamma);
    }
  }

  bool materialized() const { return materialized_; }

  Matrix apply(const Matrix& y) const {
    if (materialized_) return matrix_ * y;
    Matrix power = theta_ * y;
    Matrix out = power;
    double coef = 1.0;
    for (std::size_t k = 2; k <= hops_; ++k) {
      coef *= gamma_;
      power = theta_ * power;
      out += coef * power;
    }
    out -= diag_.asDiagonal() * y;
    out += y;
    return out;
  }

  /// Dense copy of S; intended for tests and small graphs.
  Matrix dense() const {
    if (materialized_) return Matrix(matrix_);
    const auto n = theta_.rows();
    return apply(Matrix::Identity(n, n));
  }

 private:
  // diag(Theta^k) from Theta^a columns with a = floor(k/2): |Theta^a e_i|^2 or e_i^T Theta^a Theta Theta^a e_i.
  static Vector implicit_diagonal(const SparseMatrix& th, std::size_t hops, double gamma) {
    const auto n = th.rows();
    Vector diag = th.diagonal();
    std::vector<SparseMatrix> powers{SparseMatrix()};
    SparseMatrix cur(n, n);
    cur.setIdentity();
    powers[0] = cur;
    double coef = 1.0;
    for (std::size_t k = 2; k <= hops; ++k) {
      coef *= gamma;
      const std::size_t a = k / 2;
      while (powers.size() <= a) powers.push_back(SparseMatrix(powers.back() * th));
      const SparseMatrix& pa = powers[a];
      Vector dk(n);
      if (k % 2 == 0) {
        for (Eigen::Index i = 0; i < n; ++i) dk(i) = pa.col(i).squaredNorm();
      } else {
        const SparseMatrix tp = th * pa;
        for (Eigen::Index i = 0; i < n; ++i) dk(i) = pa.col(i).dot(tp.col(i));
      }
      diag += coef * dk;
    }
    return diag;
  }

  std::size_t hops_ = 1;
  double gamma_ = 0.0;
  bool materialized_ = false;
  SparseMatrix matrix_;
  SparseMatrix theta_;
  Vector diag_;
};

inline void ensure_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + what);
}

/// One hypergraph layer  f(S X P).
inline Matrix hyper_layer(const Matrix& x, const HyperPropagation& s, const Matrix& p, Activation act) {
  ensure_finite(x, "hypergraph layer input");
  require(x.cols() == p.rows(), "hypergraph layer: dimensions do not compose");
  return activate(act, s.apply(x) * p);
}

inline Matrix hyper_layer(const Matrix& x, const SparseMatrix& theta_sum_matrix, const Matrix& p, Activation act) {
  ensure_finite(x, "hypergraph layer input");
  require(x.cols() == p.rows(), "hypergraph layer: dimensions do not compose");
  const Vector d = theta_sum_matrix.diagonal();
  const Matrix sx = theta_sum_matrix * x - d.asDiagonal() * x + x;
  return activate(act, sx * p);
}

/// One pairwise layer  f(D^-1/2 A D^-1/2 X P); A must carry self-connections.
inline Matrix pair_layer(const Matrix& x, const PairwiseAdjacency& a, const Matrix& p, Activation act) {
  ensure_finite(x, "pairwise layer input");
  require(x.cols() == p.rows(), "pairwise layer: dimensions do not compose");
  return activate(act, normalized_adjacency(a) * x * p);
}

struct ModelShape {
  std::size_t in_dim = 0;
  std::size_t dim_h = 16;
  std::size_t dim_p = 16;
  std::size_t layers = 2;
  std::size_t decoder_hidden = 0;  // 0: half the decoder input width
  double init_scale = 0.1;         // multiplier on the Glorot range of propagation layers
};

/// Every trainable matrix of the flow model plus its fixed hyperparameters.
struct ModelParams {
  std::vector<Matrix> hyper_layers;
  std::vector<Matrix> pair_layers;
  std::vector<Matrix> line_layers;
  Matrix dec_w1, dec_b1, dec_w2, dec_b2;
  Activation activation = Activation::relu;
  std::size_t hops = 2;
  double gamma = 0.5;

  std::size_t dim_h() const { return static_cast<std::size_t>(hyper_layers.back().cols()); }
  std::size_t dim_p() const { return static_cast<std::size_t>(pair_layers.back().cols()); }
  std::size_t encode_dim() const { return dim_h() + dim_p(); }

  static ModelParams init(const ModelShape& shape, Rng& rng) {
    require(shape.layers >= 1, "at least one layer");
    require(shape.in_dim >= 1 && shape.dim_h >= 1 && shape.dim_p >= 1, "layer widths must be positive");
    ModelParams p;
    auto stack = [&](std::size_t out) {
      std::vector<Matrix> ls;
      auto in = static_cast<Eigen::Index>(shape.in_dim);
      for (std::size_t l = 0; l < shape.layers; ++l) {
        ls.push_back(shape.init_scale * glorot(in, static_cast<Eigen::Index>(out), rng));
        in = static_cast<Eigen::Index>(out);
      }
      return ls;
    };
    p.hyper_layers = stack(shape.dim_h);
    p.pair_layers = stack(shape.dim_p);
    const auto enc = static_cast<Eigen::Index>(shape.dim_h + shape.dim_p);
    p.line_layers.push_back(shape.init_scale * glorot(enc, enc, rng));
    const Eigen::Index dec_in = 2 * enc;
    const Eigen::Index hidden =
        shape.decoder_hidden > 0 ? static_cast<Eigen::Index>(shape.decoder_hidden) : std::max<Eigen::Index>(1, dec_in / 2);
    p.dec_w1 = glorot(dec_in, hidden, rng);
    p.dec_b1 = Matrix::Zero(1, hidden);
    p.dec_w2 = glorot(hidden, static_cast<Eigen::Index>(shape.in_dim), rng);
    p.dec_b2 = Matrix::Zero(1, static_cast<Eigen::Index>(shape.in_dim));
    return p;
  }

  std::vector<Matrix*> tensors() {
    std::vector<Matrix*> out;
    for (auto& m : hyper_layers) out.push_back(&m);
    for (auto& m : pair_layers) out.push_back(&m);
    for (auto& m : line_layers) out.push_back(&m);
    out.insert(out.end(), {&dec_w1, &dec_b1, &dec_w2, &dec_b2});
    return out;
  }
  std::vector<const Matrix*> tensors() const {
    std::vector<const Matrix*> out;
    for (auto* m : const_cast<ModelParams*>(this)->tensors()) out.push_back(m);
    return out;
  }
  std::vector<std::string> tensor_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < hyper_layers.size(); ++i) out.push_back("hyper_layer" + std::to_string(i));
    for (std::size_t i = 0; i < pair_layers.size(); ++i) out.push_back("pair_layer" + std::to_string(i));
    for (std::size_t i = 0; i < line_layers.size(); ++i) out.push_back("line_layer" + std::to_string(i));
    out.insert(out.end(), {"decoder_w1", "decoder_b1", "decoder_w2", "decoder_b2"});
    return out;
  }

  /// Zero tensors with this parameter set's shapes.
  ModelParams zeros_like() const {
    ModelParams z = *this;
    for (auto* m : z.tensors()) m->setZero();
    return z;
  }
};

/// Per-stage user (and environment) representations.
struct EmbeddingSet {
  Matrix r_h, r_p, r_encode, x_circ, r_star, x_hat;
};

/// Fixed graph operators consumed by the forward pass.
struct GraphOperators {
  HyperPropagation hyper;     // N x N
  SparseMatrix pair_norm;     // N x N, normalized with self-loops
  SparseMatrix incidence;     // N x M
  SparseMatrix line_norm;     // M x M, normalized with self-loops

  static GraphOperators build(const Hypergraph& g, const IncidenceMatrix& inc, const LineGraph& lg, std::size_t hops,
                              double gamma) {
    require(lg.node_count == g.hyperedge_count(), "line graph node count must equal hyperedge count");
    GraphOperators ops;
    ops.hyper = HyperPropagation(theta(g, inc), hops, gamma);
    ops.pair_norm = normalized_adjacency(pairwise_adjacency(g, true));
    ops.incidence = inc.entries;
    ops.line_norm = normalized_adjacency(pairwise_adjacency(lg.as_edge_set(), true));
    return ops;
  }
};

/// Intermediate values kept for the backward pass.
struct ForwardCache {
  std::vector<Matrix> hyper_in, hyper_z;  // propagated input S X^l and pre-activation per layer
  std::vector<Matrix> pair_in, pair_z;
  Matrix line_in, line_z;                 // A_line X_circ and its pre-activation
  Matrix dec_in, dec_z;
  EmbeddingSet emb;
};

/// Runs L hypergraph layers and L pairwise layers from X; returns R_h, R_p and R_h (+) R_p.
inline void encode(const Matrix& x, const GraphOperators& ops, const ModelParams& p, ForwardCache& c) {
  if (p.hyper_layers.empty() || p.pair_layers.empty()) throw std::invalid_argument("at least one layer");
  ensure_finite(x, "features");
  c.hyper_in.clear();
  c.hyper_z.clear();
  c.pair_in.clear();
  c.pair_z.clear();
  Matrix h = x;
  for (const auto& w : p.hyper_layers) {
    require(h.cols() == w.rows(), "hypergraph layer: dimensions do not compose");
    c.hyper_in.push_back(ops.hyper.apply(h));
    c.hyper_z.push_back(c.hyper_in.back() * w);
    h = activate(p.activation, c.hyper_z.back());
  }
  Matrix q = x;
  for (const auto& w : p.pair_layers) {
    require(q.cols() == w.rows(), "pairwise layer: dimensions do not compose");
    c.pair_in.push_back(ops.pair_norm * q);
    c.pair_z.push_back(c.pair_in.back() * w);
    q = activate(p.activation, c.pair_z.back());
  }
  c.emb.r_h = std::move(h);
  c.emb.r_p = std::move(q);
  c.emb.r_encode.resize(x.rows(), c.emb.r_h.cols() + c.emb.r_p.cols());
  c.emb.r_encode << c.emb.r_h, c.emb.r_p;
}

/// X_circ = H^T R_encode; one normalized line-graph layer; R_star = H X_circ'.
inline void line_propagate(const GraphOperators& ops, const ModelParams& p, ForwardCache& c) {
  if (ops.incidence.cols() == 0) throw std::invalid_argument("line propagation needs at least one hyperedge");
  require(ops.line_norm.rows() == ops.incidence.cols(), "line graph size does not match incidence");
  require(p.line_layers.size() == 1, "exactly one line-graph layer expected");
  c.emb.x_circ = ops.incidence.transpose() * c.emb.r_encode;
  c.line_in = ops.line_norm * c.emb.x_circ;
  c.line_z = c.line_in * p.line_layers[0];
  c.emb.r_star = ops.incidence * activate(p.activation, c.line_z);
}

/// X_hat = MLP(R_star (+) R_h (+) R_p): one hidden layer with the model activation, linear output.
inline void reconstruct(const ModelParams& p, ForwardCache& c) {
  const auto& e = c.emb;
  const Eigen::Index width = e.r_star.cols() + e.r_h.cols() + e.r_p.cols();
  if (width != p.dec_w1.rows()) throw std::invalid_argument("decoder input width mismatch");
  c.dec_in.resize(e.r_star.rows(), width);
  c.dec_in << e.r_star, e.r_h, e.r_p;
  c.dec_z = (c.dec_in * p.dec_w1).rowwise() + p.dec_b1.row(0);
  c.emb.x_hat = (activate(p.activation, c.dec_z) * p.dec_w2).rowwise() + p.dec_b2.row(0);
}

inline ForwardCache forward(const Matrix& x, const GraphOperators& ops, const ModelParams& p) {
  ForwardCache c;
  encode(x, ops, p, c);
  line_propagate(ops, p, c);
  reconstruct(p, c);
  ensure_finite(c.emb.x_hat, "reconstruction");
  return c;
}

/// Reverse pass from dL/dX_hat (plus an optional extra dL/dR_encode from a task head).
/// All propagation operators are symmetric, so they serve as their own transposes.
inline ModelParams backward(const GraphOperators& ops, const ModelParams& p, const ForwardCache& c,
                            const Matrix& grad_x_hat, const Matrix* grad_r_encode = nullptr) {
  ModelParams g = p.zeros_like();
  const auto& e = c.emb;
  const Eigen::Index dh = e.r_h.cols(), dp = e.r_p.cols(), ds = e.r_star.cols();

  const Matrix dec_h = activate(p.activation, c.dec_z);
  g.dec_w2 = dec_h.transpose() * grad_x_hat;
  g.dec_b2 = grad_x_hat.colwise().sum();
  const Matrix dz = activation_backward(p.activation, c.dec_z, grad_x_hat * p.dec_w2.transpose());
  g.dec_w1 = c.dec_in.transpose() * dz;
  g.dec_b1 = dz.colwise().sum();
  const Matrix d_in = dz * p.dec_w1.transpose();

  Matrix d_encode = Matrix::Zero(e.r_encode.rows(), e.r_encode.cols());
  if (grad_r_encode) d_encode += *grad_r_encode;
  d_encode.leftCols(dh) += d_in.middleCols(ds, dh);
  d_encode.rightCols(dp) += d_in.middleCols(ds + dh, dp);

  // R_star = H f(A_line (H^T R_encode) P_line)
  const Matrix d_line_z =
      activation_backward(p.activation, c.line_z, ops.incidence.transpose() * d_in.leftCols(ds));
  g.line_layers[0] = c.line_in.transpose() * d_line_z;
  d_encode += ops.incidence * (ops.line_norm * (d_line_z * p.line_layers[0].transpose()));

  Matrix d_out = d_encode.leftCols(dh);
  for (std::size_t l = p.hyper_layers.size(); l-- > 0;) {
    const Matrix d_z = activation_backward(p.activation, c.hyper_z[l], d_out);
    g.hyper_layers[l] = c.hyper_in[l].transpose() * d_z;
    if (l > 0) d_out = ops.hyper.apply(d_z * p.hyper_layers[l].transpose());
  }
  d_out = d_encode.rightCols(dp);
  for (std::size_t l = p.pair_layers.size(); l-- > 0;) {
    const Matrix d_z = activation_backward(p.activation, c.pair_z[l], d_out);
    g.pair_layers[l] = c.pair_in[l].transpose() * d_z;
    if (l > 0) d_out = ops.pair_norm * (d_z * p.pair_layers[l].transpose());
  }
  return g;
}

}  // namespace hyperflow
