#include "hyperflow/metrics/link_eval.hpp"
#include "hyperflow/metrics/socio.hpp"

#include <gtest/gtest.h>

using namespace hyperflow;

namespace {

double brute_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / static_cast<double>(pos.size() * neg.size());
}

EdgeSet links(std::size_t n, std::vector<NodePair> p) { return EdgeSet(n, p); }

}  // namespace

TEST(RocAuc, ExtremesAndTies) {
  EXPECT_EQ(roc_auc({3, 4}, {1, 2}), 1.0);
  EXPECT_EQ(roc_auc({1, 2}, {3, 4}), 0.0);
  EXPECT_EQ(roc_auc({1, 1}, {1, 1, 1}), 0.5);
  EXPECT_THROW(roc_auc({}, {1.0}), std::invalid_argument);
}

TEST(RocAuc, MatchesPairCounting) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> pos(1 + uniform_index(rng, 30)), neg(1 + uniform_index(rng, 30));
    // Coarse values force plenty of ties.
    for (auto& v : pos) v = static_cast<double>(uniform_index(rng, 6));
    for (auto& v : neg) v = static_cast<double>(uniform_index(rng, 5));
    EXPECT_NEAR(roc_auc(pos, neg), brute_auc(pos, neg), 1e-12);
  }
}

TEST(Confidence, HandValue) {
  const Matrix emb = (Matrix(3, 2) << 1.0, 0.0, 0.0, 1.0, 1.0, 1.0).finished();
  // Mean of {0, 1} is (0.5, 0.5); node 2 scores 1.0.
  EXPECT_NEAR(membership_confidence(emb, 2, {0, 1}), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(membership_confidence(emb, 0, {0, 1}), 1.0 / (1.0 + std::exp(-0.5)), 1e-15);
}

TEST(Conformity, ZeroEmbeddingsSitOnTheThreshold) {
  const Matrix emb = Matrix::Zero(4, 3);
  // Every confidence is exactly 0.5, which is not above rho = 0.5.
  EXPECT_EQ(conformity(emb, {{0, 1}, {2, 3}}, 0.5), 0.0);
  EXPECT_EQ(conformity(emb, {{0, 1}, {2, 3}}, 0.4), 1.0);
}

TEST(Conformity, AveragesGroupsUniformly) {
  Matrix emb(3, 1);
  emb << 2.0, 1.0, -3.0;
  // Group {0, 1}: both positive. Group {0, 2}: mean -0.5; node 0 -> -1, node 2 -> 1.5, one of two.
  EXPECT_NEAR(conformity(emb, {{0, 1}, {0, 2}}, 0.5), (1.0 + 0.5) / 2.0, 1e-15);
  EXPECT_THROW(conformity(emb, {}, 0.5), DataError);
  EXPECT_THROW(conformity(emb, {{0}}, 1.0), std::invalid_argument);
}

TEST(GroupEntropy, SumAndMean) {
  const Matrix emb = Matrix::Zero(2, 1);
  EXPECT_NEAR(group_entropy(emb, {0, 1}), 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(group_entropy(emb, {0, 1}, EntropyMode::mean), std::log(2.0), 1e-15);
  Matrix big = Matrix::Constant(2, 1, 100.0);
  EXPECT_GE(group_entropy(big, {0, 1}), 0.0);
  EXPECT_LT(group_entropy(big, {0, 1}), 1e-12);
}

TEST(Jaccard, Values) {
  EXPECT_EQ(jaccard({}, {}), 0.0);
  EXPECT_EQ(jaccard({1, 2}, {1, 2}), 1.0);
  EXPECT_EQ(jaccard({1, 2}, {2, 3}), 1.0 / 3.0);
  EXPECT_EQ(jaccard({1}, {2}), 0.0);
}

TEST(Equivalence, HandValue) {
  // Path 0-1-2-3 with environments {0,1,2} and {2,3}.
  const auto e = links(4, {{0, 1}, {1, 2}, {2, 3}});
  const std::vector<NodeSet> envs = {{0, 1, 2}, {2, 3}};
  const auto r = equivalence(envs, e, 100, 0);
  // Node environments: 0:{0} 1:{0} 2:{0,1} 3:{1}. Linked: 1, 1/2, 1/2. Unlinked (0,2),(0,3),(1,3): 1/2, 0, 0.
  EXPECT_NEAR(r.numerator, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.denominator, 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(r.value, (2.0 / 3.0) / (1.0 / 6.0 + kEquivalenceEps), 1e-12);
  EXPECT_FALSE(r.infinite);
}

TEST(Equivalence, DisjointEnvironmentsAcrossNonLinksAreInfinite) {
  const auto e = links(4, {{0, 1}, {2, 3}});
  const auto r = equivalence({{0, 1}, {2, 3}}, e, 100, 0);
  EXPECT_TRUE(r.infinite);
  EXPECT_GT(r.value, 1.0);
  EXPECT_EQ(r.numerator, 1.0);
}

TEST(Equivalence, SampledAgreesWithEnumerated) {
  Rng rng(5);
  std::vector<NodePair> p;
  for (NodeId u = 0; u < 30; ++u)
    for (NodeId v = u + 1; v < 30; ++v)
      if (uniform_unit(rng) < 0.2) p.emplace_back(u, v);
  const EdgeSet e(30, p);
  std::vector<NodeSet> envs;
  for (int k = 0; k < 8; ++k) {
    NodeSet s;
    for (NodeId u = 0; u < 30; ++u)
      if (uniform_unit(rng) < 0.25) s.push_back(u);
    if (!s.empty()) envs.push_back(s);
  }
  const auto exact = equivalence(envs, e, 1000000, 1);
  const auto sampled = equivalence(envs, e, 20000, 1, true);
  EXPECT_NEAR(sampled.numerator, exact.numerator, 4.0 * sampled.numerator_se + 1e-12);
  EXPECT_NEAR(sampled.denominator, exact.denominator, 4.0 * sampled.denominator_se + 1e-12);
}

TEST(Equivalence, NeedsLinksAndNonLinks) {
  EXPECT_THROW(equivalence({{0, 1}}, links(3, {}), 10, 0), DataError);
  EXPECT_THROW(equivalence({{0, 1}}, links(2, {{0, 1}}), 10, 0), DataError);
}

TEST(EvolvingRatio, CountsStrictlyAboveHalf) {
  std::vector<Matrix> snaps;
  snaps.push_back(Matrix::Zero(3, 1));
  snaps.push_back((Matrix(3, 1) << 1.0, 1.0, -1.0).finished());
  snaps.push_back(Matrix::Ones(3, 1));
  const auto pts = evolving_ratio(snaps, {0, 1, 2}, {0, 50, 100});
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[0].count, 0u);
  // Mean is 1/3: nodes 0 and 1 score 1/3 > 0, node 2 scores -1/3.
  EXPECT_EQ(pts[1].count, 2u);
  EXPECT_NEAR(pts[1].ratio, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(pts[2].count, 3u);
  EXPECT_EQ(pts[2].stage, 100u);
}

TEST(SplitLinks, DisjointAndDeterministic) {
  Rng rng(2);
  std::vector<NodePair> p;
  for (NodeId u = 0; u < 20; ++u)
    for (NodeId v = u + 1; v < 20; ++v)
      if (uniform_unit(rng) < 0.3) p.emplace_back(u, v);
  const EdgeSet e(20, p);
  const auto s = split_links(e, 0.2, 3, 9);
  EXPECT_EQ(s.test_pos.size() + s.train.size(), e.size());
  for (auto [u, v] : s.test_pos) {
    EXPECT_TRUE(e.contains(u, v));
    EXPECT_FALSE(s.train.contains(u, v));
  }
  EXPECT_EQ(s.test_neg.size(), 3 * s.test_pos.size());
  for (auto [u, v] : s.test_neg) EXPECT_FALSE(e.contains(u, v));
  EXPECT_EQ(split_links(e, 0.2, 3, 9).test_pos, s.test_pos);
}

TEST(HadamardLogistic, SeparatesSeparableLinks) {
  Matrix emb(4, 1);
  emb << 1.0, 1.0, -1.0, 2.0;
  // Linked pairs have positive products, non-links negative.
  const std::vector<NodePair> pos = {{0, 1}, {0, 3}}, neg = {{0, 2}, {2, 3}};
  const auto m = HadamardLogistic::fit(emb, pos, neg);
  for (auto q : pos)
    for (auto r : neg) EXPECT_GT(m.score(emb, q), m.score(emb, r));
}
