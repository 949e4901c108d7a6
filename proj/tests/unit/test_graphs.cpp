#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "sheafnet/sheafnet.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace sheafnet;

TEST(Graph, RejectsBadEdges) {
  EXPECT_THROW(Graph(3, {{0, 3}}), InvalidInput);
  EXPECT_THROW(Graph(3, {{1, 1}}), InvalidInput);
  EXPECT_THROW(Graph(3, {{0, 1}, {1, 0}}), InvalidInput);
  EXPECT_THROW(Graph(3, {}, {1, 2}), InvalidInput);
  const Graph g(3, {{0, 2}, {0, 1}});
  EXPECT_EQ(g.neighbors(0), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(g.degree(1), 1u);
}

TEST(DoubleCover, LiftsEveryEdgeAndLoop) {
  const DoubleCover dc = double_cover(Graph::cycle(3));
  EXPECT_EQ(dc.n_base_edges, 6u);
  EXPECT_EQ(dc.arcs.size(), 9u);
  EXPECT_EQ(dc.loop_lifts(), 3u);
  const auto sheets = dc.sheets();
  for (std::size_t e = 0; e < 3; ++e) EXPECT_EQ(sheets[e], 2u);
  for (std::size_t e = 3; e < 6; ++e) EXPECT_EQ(sheets[e], 1u);
}

TEST(UnfoldingTree, LevelsCountWalks) {
  const UnfoldingTree t = unfolding_tree(Graph::cycle(3), 0, 2);
  EXPECT_EQ(t.level_sizes(), (std::vector<std::size_t>{1, 2, 4}));
  const UnfoldingTree p = unfolding_tree(Graph::path(4), 0, 3);
  EXPECT_EQ(p.level_sizes(), (std::vector<std::size_t>{1, 1, 2, 3}));
}

TEST(UnfoldingTree, CanonicalCodeIgnoresChildOrder) {
  const Graph g(4, {{0, 1}, {0, 2}, {2, 3}});
  const Graph h = g.relabeled({3, 1, 0, 2});
  EXPECT_EQ(tree_canonical(unfolding_tree(g, 0, 3)), tree_canonical(unfolding_tree(h, 3, 3)));
}

TEST(Compare, CycleSixAgainstTwoTriangles) {
  const Graph c6 = Graph::cycle(6);
  const Graph two = Graph::disjoint_union(Graph::cycle(3), Graph::cycle(3));
  for (std::size_t k = 0; k <= 8; ++k) {
    const GraphComparison r = compare_graphs(c6, two, k);
    EXPECT_FALSE(r.distinguishable) << k;
    EXPECT_FALSE(r.wl_distinguishable) << k;
  }
}

TEST(Compare, PathAgainstTriangleAtDepthOne) {
  const GraphComparison r = compare_graphs(Graph::path(3), Graph::cycle(3), 1);
  EXPECT_TRUE(r.distinguishable);
  EXPECT_TRUE(r.wl_distinguishable);
  EXPECT_FALSE(r.first_difference.empty());
  EXPECT_FALSE(compare_graphs(Graph::path(3), Graph::cycle(3), 0).distinguishable);
}

TEST(Compare, LabelsSeparateOtherwiseEqualGraphs) {
  const Graph a(2, {{0, 1}}, {0, 1});
  const Graph b(2, {{0, 1}}, {0, 0});
  EXPECT_TRUE(compare_graphs(a, b, 0).distinguishable);
  EXPECT_TRUE(compare_graphs(a, b, 0).wl_distinguishable);
}

TEST(Enumeration, ClassCountsMatchKnownSequence) {
  const std::vector<std::size_t> expected{1, 1, 2, 4, 11, 34};
  for (std::size_t n = 0; n < expected.size(); ++n)
    EXPECT_EQ(gen::graphs_up_to_isomorphism(n).size(), expected[n]) << n;
}

TEST(WlVsUnfolding, PartitionsAgreeWithStringOracle) {
  for (std::size_t n = 1; n <= 5; ++n)
    for (const Graph& g : gen::graphs_up_to_isomorphism(n))
      for (std::size_t k = 0; k <= 3; ++k) {
        const auto lib = unfolding_codes(g, k);
        const auto ref = oracle::unfolding_codes(g, k);
        EXPECT_TRUE(same_partition(lib, ref));
        EXPECT_TRUE(same_partition(wl_refine(g, k).colors.back(), ref));
        EXPECT_TRUE(wl_equals_unfolding(g, k));
      }
}

TEST(WlVsUnfolding, PairwiseVerdictsAgreeWithOracle) {
  std::vector<Graph> all;
  for (std::size_t n = 1; n <= 4; ++n)
    for (auto& g : gen::graphs_up_to_isomorphism(n)) all.push_back(g);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i; j < all.size(); ++j)
      for (std::size_t k = 0; k <= 3; ++k) {
        auto a = oracle::unfolding_codes(all[i], k), b = oracle::unfolding_codes(all[j], k);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        const GraphComparison r = compare_graphs(all[i], all[j], k);
        EXPECT_EQ(r.distinguishable, a != b);
        EXPECT_EQ(r.wl_distinguishable, r.distinguishable);
      }
}

TEST(WlVsUnfolding, InvariantUnderRelabeling) {
  std::mt19937_64 rng(41);
  for (const Graph& g : gen::graphs_up_to_isomorphism(5)) {
    std::vector<std::size_t> perm{0, 1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), rng);
    const Graph h = g.relabeled(perm);
    EXPECT_FALSE(compare_graphs(g, h, 4).distinguishable);
    const auto a = unfolding_codes(g, 2), b = unfolding_codes(h, 2);
    for (std::size_t v = 0; v < 5; ++v) EXPECT_EQ(a[v], b[perm[v]]);
  }
}

TEST(Wl, StabilizesWithinNodeCount) {
  const WLColoring c = wl_refine(Graph::path(5), 6);
  EXPECT_EQ(c.n_classes(0), 1u);
  EXPECT_EQ(c.n_classes(6), 3u);
  EXPECT_LE(c.stable_round, 5u);
}
