#include "hyperflow/io/dataset.hpp"
#include "hyperflow/line/line_graph.hpp"
#include "hyperflow/model/influence.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace hyperflow;

namespace {

Hypergraph weighted(std::size_t n, std::vector<NodeSet> edges, Vector w, Vector u, Matrix x = Matrix()) {
  if (x.size() == 0) x = Matrix::Zero(static_cast<Eigen::Index>(n), 1);
  return Hypergraph(std::move(x), std::move(edges), EdgeSet(n, {}), std::move(w), std::move(u));
}

std::vector<double> as_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Matrix dense_theta(const Hypergraph& g) {
  return oracle::theta(oracle::incidence(g.node_count(), g.hyperedges()), as_std(g.hyperedge_weights()),
                       as_std(g.node_weights()));
}

Matrix propagation_oracle(const Hypergraph& g, std::size_t hops, double gamma) {
  const Matrix s = oracle::theta_sum(dense_theta(g), hops, gamma);
  Matrix out = s;
  for (Eigen::Index i = 0; i < s.rows(); ++i) out(i, i) = 1.0;
  return out;
}

struct Instance {
  Hypergraph g;
  LineGraph lg;
  GraphOperators ops;
};

Instance random_instance(std::uint64_t seed, std::size_t nodes = 9) {
  io::RandomSpec s;
  s.nodes = nodes;
  s.dim = 4;
  s.hyperedges = 4;
  s.seed = seed;
  auto g = io::random_hypergraph(s);
  WalkConfig wc;
  wc.seed = seed;
  auto lg = fast_line_graph(g, wc);
  auto ops = GraphOperators::build(g, build_incidence(g), lg, 2, 0.5);
  return {std::move(g), std::move(lg), std::move(ops)};
}

ModelParams random_params(std::size_t in_dim, Activation act, std::uint64_t seed) {
  ModelShape shape;
  shape.in_dim = in_dim;
  shape.dim_h = 3;
  shape.dim_p = 2;
  shape.layers = 2;
  shape.init_scale = 1.0;
  Rng rng(seed);
  auto p = ModelParams::init(shape, rng);
  for (auto* m : p.tensors())
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] += 0.1 * standard_normal(rng);
  p.activation = act;
  return p;
}

}  // namespace

TEST(Theta, UniversalHyperedgeWithUnitWeights) {
  for (std::size_t n : {1u, 2u, 5u, 13u}) {
    NodeSet all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<NodeId>(i);
    const auto g = weighted(n, {all}, Vector::Ones(1), Vector::Ones(static_cast<Eigen::Index>(n)));
    const Matrix t(theta(g, build_incidence(g)));
    EXPECT_TRUE(t.isApprox(Matrix::Constant(t.rows(), t.cols(), 1.0 / static_cast<double>(n)), 1e-14));
  }
}

TEST(Theta, NodeOutsideEveryHyperedgeHasZeroRow) {
  const auto g = weighted(4, {{0, 1}, {1, 2}}, Vector::Ones(2), Vector::Ones(4));
  const Matrix t(theta(g, build_incidence(g)));
  EXPECT_EQ(t.row(3).norm(), 0.0);
  EXPECT_EQ(t.col(3).norm(), 0.0);
}

TEST(Theta, MatchesEntrywiseOracleWithWeights) {
  const auto g = weighted(3, {{0, 1}, {1, 2}, {0, 1, 2}}, (Vector(3) << 2.0, 0.5, 1.5).finished(),
                          (Vector(3) << 1.0, 3.0, 0.7).finished());
  const Matrix t(theta(g, build_incidence(g)));
  EXPECT_TRUE(t.isApprox(dense_theta(g), 1e-13));
  // Entry (0, 2) by hand: only the third hyperedge contains both.
  const double dv0 = 2.0 + 1.5, dv2 = 0.5 + 1.5, de2 = 1.0 + 3.0 + 0.7;
  EXPECT_NEAR(t(0, 2), 1.0 * 0.7 * 1.5 / de2 / std::sqrt(dv0 * dv2), 1e-15);
}

TEST(Theta, SymmetricOnRandomInstances) {
  Rng rng(6);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    io::RandomSpec s;
    s.nodes = 12;
    s.hyperedges = 5;
    s.seed = seed;
    const auto base = io::random_hypergraph(s);
    Vector w(static_cast<Eigen::Index>(base.hyperedge_count())), u(12);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = 0.1 + 2.0 * uniform_unit(rng);
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = 0.1 + 2.0 * uniform_unit(rng);
    const auto g = weighted(12, base.hyperedges(), w, u);
    const Matrix t(theta(g, build_incidence(g)));
    EXPECT_LE((t - t.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_TRUE(t.isApprox(dense_theta(g), 1e-12));
  }
}

TEST(ThetaSum, SingleHopIsTheta) {
  const auto g = weighted(4, {{0, 1, 2}, {2, 3}}, Vector::Ones(2), Vector::Ones(4));
  const SparseMatrix t = theta(g, build_incidence(g));
  EXPECT_TRUE(Matrix(theta_sum(t, 1, 0.5)).isApprox(Matrix(t)));
  EXPECT_TRUE(Matrix(theta_sum(t, 3, 0.0)).isApprox(Matrix(t)));
  EXPECT_THROW(theta_sum(t, 0, 0.5), std::invalid_argument);
  EXPECT_THROW(theta_sum(t, 2, 1.5), std::invalid_argument);
}

TEST(ThetaSum, MatchesDensePowers) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(seed);
    const Matrix t = dense_theta(inst.g);
    for (std::size_t k : {1u, 2u, 3u}) {
      const Matrix got(theta_sum(theta(inst.g, build_incidence(inst.g)), k, 0.7));
      EXPECT_LE((got - oracle::theta_sum(t, k, 0.7)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(HyperPropagation, ImplicitAgreesWithMaterialized) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(seed, 14);
    const SparseMatrix t = theta(inst.g, build_incidence(inst.g));
    for (std::size_t k : {1u, 2u, 3u, 4u}) {
      const HyperPropagation dense(t, k, 0.6);
      const HyperPropagation implicit(t, k, 0.6, 0);
      ASSERT_TRUE(dense.materialized());
      ASSERT_FALSE(implicit.materialized());
      EXPECT_LE((dense.dense() - implicit.dense()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((dense.dense() - propagation_oracle(inst.g, k, 0.6)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(HyperLayer, UniversalHyperedgeScalesByTwoMinusOneOverN) {
  const std::size_t n = 5;
  const auto g = weighted(n, {{0, 1, 2, 3, 4}}, Vector::Ones(1), Vector::Ones(5));
  const SparseMatrix t = theta(g, build_incidence(g));
  // One hop: Theta = J/N, so (Theta - Diag + I) x = x + (sum(x) - x)/N. Constant x gives (2 - 1/N) x.
  const Matrix x = Matrix::Constant(5, 1, 3.0);
  const Matrix out = hyper_layer(x, HyperPropagation(t, 1, 0.5), Matrix::Ones(1, 1), Activation::identity);
  EXPECT_TRUE(out.isApprox(Matrix::Constant(5, 1, (2.0 - 1.0 / n) * 3.0), 1e-14));
  const Matrix out2 = hyper_layer(x, theta_sum(t, 1, 0.5), Matrix::Ones(1, 1), Activation::identity);
  EXPECT_TRUE(out2.isApprox(out, 1e-14));
}

TEST(HyperLayer, RejectsNonFiniteInputAndBadShapes) {
  const auto g = weighted(2, {{0, 1}}, Vector::Ones(1), Vector::Ones(2));
  const HyperPropagation s(theta(g, build_incidence(g)), 1, 0.5);
  Matrix x = Matrix::Ones(2, 2);
  EXPECT_THROW(hyper_layer(x, s, Matrix::Ones(3, 1), Activation::relu), std::invalid_argument);
  x(0, 0) = std::nan("");
  EXPECT_THROW(hyper_layer(x, s, Matrix::Ones(2, 1), Activation::relu), NumericError);
}

TEST(PairLayer, SingleEdgeAveragesEndpoints) {
  const std::vector<NodePair> p = {{0, 1}};
  const auto a = pairwise_adjacency(EdgeSet(2, p), true);
  const Matrix x = (Matrix(2, 1) << 1.0, 3.0).finished();
  const Matrix out = pair_layer(x, a, Matrix::Ones(1, 1), Activation::identity);
  EXPECT_TRUE(out.isApprox(Matrix::Constant(2, 1, 2.0), 1e-15));
}

TEST(PairLayer, MatchesDenseOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(seed);
    Rng rng(seed);
    Matrix p(4, 3);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = standard_normal(rng);
    const Matrix got = pair_layer(inst.g.features(), pairwise_adjacency(inst.g, true), p, Activation::relu);
    const Matrix want = oracle::apply(
        oracle::matmul(oracle::matmul(oracle::normalized_adjacency(9, inst.g.pairwise().pairs()), inst.g.features()), p),
        oracle::relu);
    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(LinePropagate, IsolatedHyperedgesKeepTheirSum) {
  // Disjoint hyperedges: the line graph is empty, so the line layer is the identity on X_circ.
  const auto g = weighted(4, {{0, 1}, {2, 3}}, Vector::Ones(2), Vector::Ones(4));
  const LineGraph lg{2, {}};
  const auto ops = GraphOperators::build(g, build_incidence(g), lg, 1, 0.5);
  ModelParams p;
  p.activation = Activation::identity;
  p.line_layers = {Matrix::Identity(1, 1)};
  ForwardCache c;
  c.emb.r_encode = (Matrix(4, 1) << 1.0, 2.0, 3.0, 4.0).finished();
  line_propagate(ops, p, c);
  EXPECT_EQ(c.emb.x_circ, (Matrix(2, 1) << 3.0, 7.0).finished());
  EXPECT_EQ(c.emb.r_star, (Matrix(4, 1) << 3.0, 3.0, 7.0, 7.0).finished());
}

TEST(LinePropagate, NeedsHyperedges) {
  GraphOperators ops;
  ops.incidence = SparseMatrix(3, 0);
  ModelParams p;
  p.line_layers = {Matrix::Identity(1, 1)};
  ForwardCache c;
  c.emb.r_encode = Matrix::Ones(3, 1);
  EXPECT_THROW(line_propagate(ops, p, c), std::invalid_argument);
}

TEST(Reconstruct, RejectsWidthMismatch) {
  ModelParams p;
  p.dec_w1 = Matrix::Ones(4, 2);
  ForwardCache c;
  c.emb.r_star = Matrix::Ones(3, 2);
  c.emb.r_h = Matrix::Ones(3, 1);
  c.emb.r_p = Matrix::Ones(3, 2);
  EXPECT_THROW(reconstruct(p, c), std::invalid_argument);
}

TEST(Forward, MatchesDenseOracle) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto inst = random_instance(seed);
    const auto p = random_params(4, Activation::relu, seed);
    const auto c = forward(inst.g.features(), inst.ops, p);

    const Matrix s = propagation_oracle(inst.g, 2, 0.5);
    const Matrix a = oracle::normalized_adjacency(9, inst.g.pairwise().pairs());
    Matrix h = inst.g.features(), q = inst.g.features();
    for (const auto& w : p.hyper_layers) h = oracle::apply(oracle::matmul(oracle::matmul(s, h), w), oracle::relu);
    for (const auto& w : p.pair_layers) q = oracle::apply(oracle::matmul(oracle::matmul(a, q), w), oracle::relu);
    Matrix enc(9, h.cols() + q.cols());
    enc << h, q;
    const Matrix inc = oracle::incidence(9, inst.g.hyperedges());
    const Matrix al = oracle::normalized_adjacency(inst.g.hyperedge_count(), inst.lg.edges);
    const Matrix r_star = oracle::matmul(
        inc, oracle::apply(oracle::matmul(oracle::matmul(al, oracle::matmul(inc.transpose(), enc)), p.line_layers[0]),
                           oracle::relu));
    Matrix dec_in(9, r_star.cols() + h.cols() + q.cols());
    dec_in << r_star, h, q;
    Matrix z = oracle::matmul(dec_in, p.dec_w1);
    for (Eigen::Index i = 0; i < z.rows(); ++i) z.row(i) += p.dec_b1.row(0);
    Matrix x_hat = oracle::matmul(oracle::apply(z, oracle::relu), p.dec_w2);
    for (Eigen::Index i = 0; i < x_hat.rows(); ++i) x_hat.row(i) += p.dec_b2.row(0);

    EXPECT_LE((c.emb.r_h - h).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((c.emb.r_p - q).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((c.emb.r_star - r_star).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((c.emb.x_hat - x_hat).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Backward, MatchesFiniteDifferencesForSmoothActivations) {
  for (Activation act : {Activation::tanh, Activation::sigmoid, Activation::identity}) {
    const auto inst = random_instance(3);
    auto p = random_params(4, act, 11);
    Rng rng(2);
    Matrix probe(9, 4), probe_enc(9, p.encode_dim());
    for (Eigen::Index i = 0; i < probe.size(); ++i) probe.data()[i] = standard_normal(rng);
    for (Eigen::Index i = 0; i < probe_enc.size(); ++i) probe_enc.data()[i] = standard_normal(rng);
    auto loss = [&](const ModelParams& q) {
      const auto c = forward(inst.g.features(), inst.ops, q);
      return (c.emb.x_hat.array() * probe.array()).sum() + (c.emb.r_encode.array() * probe_enc.array()).sum();
    };
    const auto c = forward(inst.g.features(), inst.ops, p);
    const auto g = backward(inst.ops, p, c, probe, &probe_enc);
    const auto gt = g.tensors();
    auto pt = p.tensors();
    const auto names = p.tensor_names();
    const double eps = 1e-6;
    for (std::size_t t = 0; t < pt.size(); ++t) {
      for (Eigen::Index i = 0; i < pt[t]->size(); ++i) {
        const double orig = pt[t]->data()[i];
        pt[t]->data()[i] = orig + eps;
        const double up = loss(p);
        pt[t]->data()[i] = orig - eps;
        const double dn = loss(p);
        pt[t]->data()[i] = orig;
        const double num = (up - dn) / (2 * eps);
        EXPECT_NEAR(gt[t]->data()[i], num, 1e-6 * std::max(1.0, std::abs(num)))
            << activation_name(act) << " " << names[t] << "[" << i << "]";
      }
    }
  }
}

TEST(GraphOperators, LineGraphSizeMustMatch) {
  const auto inst = random_instance(0);
  const LineGraph wrong{inst.g.hyperedge_count() + 1, {}};
  EXPECT_THROW(GraphOperators::build(inst.g, build_incidence(inst.g), wrong, 2, 0.5), std::invalid_argument);
}
