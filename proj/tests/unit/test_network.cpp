#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sheafnet/sheafnet.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace sheafnet;

namespace {

/// Linear factoring network: singletons, pairs, global; maps are random
/// matrices without bias and all activations are the identity.
Network random_linear_network(std::mt19937_64& rng) {
  const MarkedSpace space({1, 2, 1, 1});
  CoverSequence seq = CoverSequence::with_global(
      space, {{PointSet{0}, PointSet{1}, PointSet{2}, PointSet{3}}, {PointSet{0, 1}, PointSet{2, 3}}});
  std::normal_distribution<double> normal(0.0, 1.0);
  auto lin = [&](std::size_t in, std::size_t out) {
    Matrix w(out, in);
    for (auto& v : w.data) v = normal(rng);
    return linear(w, Section::identity(in));
  };
  FactorsThroughInclusion f1{{lin(1, 2), lin(2, 2), lin(1, 2), lin(1, 2)}, &activation("identity")};
  FactorsThroughInclusion f2{{lin(2, 3), lin(2, 3)}, &activation("identity")};
  return Network(std::move(seq), {Layer{{{0, 1}, {2, 3}}, std::move(f1), 2}, Layer{{{0, 1}}, std::move(f2), 3}});
}

}  // namespace

TEST(Network, SumPoolDemoAddsInputs) {
  const Network net = build_sum_pool_demo();
  EXPECT_DOUBLE_EQ(forward_output(net, Vec{3, 4, 5, 6})[0], 18.0);
  const Matrix m = linear_matrix(net);
  EXPECT_EQ(m.data, (Vec{1, 1, 1, 1}));
}

TEST(Network, ValidationRejectsBadLayers) {
  const MarkedSpace space = MarkedSpace::uniform(2);
  const CoverSequence seq = CoverSequence::with_global(space, {{PointSet{0}, PointSet{1}}});
  const FactorsThroughInclusion id{{Section::identity(1), Section::identity(1)}, &activation("identity")};
  EXPECT_THROW(Network(seq, {}), InvalidInput);
  EXPECT_THROW(Network(seq, {Layer{{{0, 1}}, id, 2}}), InvalidInput);      // map shape
  EXPECT_THROW(Network(seq, {Layer{{{0, 2}}, id, 1}}), InvalidInput);      // index range
  EXPECT_THROW(Network(seq, {Layer{{{}}, id, 1}}), InvalidInput);          // empty aggregation
  EXPECT_NO_THROW(Network(seq, {Layer{{{0, 1}}, id, 1}}));
}

TEST(Network, LinearNetworksStayLinear) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = random_linear_network(rng);
    const Matrix m = linear_matrix(net);
    // Columns from the forward pass on basis vectors.
    const std::size_t d = net.space().total_dim();
    for (std::size_t c = 0; c < d; ++c) {
      Vec e(d, 0.0);
      e[c] = 1.0;
      const Vec col = forward_output(net, e);
      for (std::size_t r = 0; r < col.size(); ++r) EXPECT_NEAR(m(r, c), col[r], 1e-12);
    }
  }
  EXPECT_THROW(linear_matrix(build_rnn(3, RecurrentKind::rnn, 2, 0)), InvalidInput);
}

TEST(Network, GlobalSectionMatchesForward) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = gen::random_fti_network(rng);
    const Deviation dev = Deviation::constant(net.space(), [&] {
      std::vector<Vec> o;
      for (auto f : net.space().fiber_dims()) o.push_back(Vec(f, 0.25));
      return o;
    }());
    const Section g = global_section(net, dev);
    for (const auto& x : gaussian_points(net.space().total_dim(), 10, trial)) {
      const Vec a = g(x), b = forward(net, dev, x).output;
      for (std::size_t t = 0; t < a.size(); ++t) EXPECT_NEAR(a[t], b[t], 1e-10);
    }
  }
}

TEST(Network, DeviationShiftsStageZero) {
  const Network net = build_sum_pool_demo();
  const Deviation dev = Deviation::constant(net.space(), {{1.0}, {0.0}, {0.0}, {-0.5}});
  EXPECT_DOUBLE_EQ(forward(net, dev, Vec{0, 0, 0, 0}).output[0], 0.5);
  Deviation bad = Deviation::zero(net.space());
  bad.nu.pop_back();
  EXPECT_THROW(forward(net, bad, Vec{0, 0, 0, 0}), InvalidInput);
}

TEST(Network, PerturbationOffsetsAreAddedBeforeAggregation) {
  const Network net = build_sum_pool_demo();
  const Perturbation p{0, {{1.0}, {-1.0}, {2.0}, {0.0}}};
  const ForwardResult r = forward(net, Deviation::zero(net.space()), Vec{1, 1, 1, 1}, &p);
  EXPECT_DOUBLE_EQ(r.output[0], 6.0);
  EXPECT_EQ(r.pre_aggregation[0], (std::vector<Vec>{{2.0}, {0.0}, {3.0}, {1.0}}));
  EXPECT_EQ(r.pre_activation[0], (std::vector<Vec>{{2.0}, {4.0}}));
}

TEST(FactorsCheck, FactoringLayersAgreeAndMaxPoolDoesNotFitAffinely) {
  const Network cnn = build_cnn(4, {{ConvStep{2, 3, "relu"}, PoolStep{PoolKind::max, 2}, DenseStep{2}}, 3});
  for (std::size_t n = 0; n < cnn.n_layers(); ++n) {
    const FactorsReport r = factors_check(cnn, n, 30, 1e-9, 1);
    if (cnn.layer(n).factors_through_inclusion()) {
      EXPECT_TRUE(r.applicable);
      EXPECT_TRUE(r.agrees) << n << " " << r.max_deviation;
    } else {
      EXPECT_FALSE(r.applicable);
      EXPECT_GT(r.affine_fit_residual, 1e-3);
    }
  }
}

TEST(Builders, CnnStagesAndErrors) {
  const Network net = build_cnn(8, {{ConvStep{2, 4, "relu"}, PoolStep{PoolKind::sum, 2}, DenseStep{1}}, 0});
  ASSERT_EQ(net.covers().size(), 4u);
  EXPECT_EQ(net.covers()[1].size(), 16u);
  EXPECT_EQ(net.covers()[2].size(), 4u);
  EXPECT_EQ(net.covers()[2][0].members.size(), 16u);
  const AxiomReport rep = check_na_axioms(net.covers());
  for (auto ax : {Axiom::strictness, Axiom::non_triviality, Axiom::distinctness}) EXPECT_TRUE(rep.internal_hold(ax));

  EXPECT_THROW(build_cnn(1, {{DenseStep{1}}, 0}), InvalidInput);
  EXPECT_THROW(build_cnn(4, {{PoolStep{}}, 0}), InvalidInput);
  EXPECT_THROW(build_cnn(5, {{PoolStep{PoolKind::sum, 2}, DenseStep{1}}, 0}), InvalidInput);
  EXPECT_NO_THROW(build_cnn(5, {{PoolStep{PoolKind::sum, 3, 1}, DenseStep{1}}, 0}));
}

TEST(Builders, IdentityFilterConvolutionPermutesPatches) {
  const Network net = build_cnn(2, {{ConvStep{2, 4, "identity", true}, DenseStep{1}}, 0, 1});
  const ForwardResult r = forward(net, Deviation::zero(net.space()), Vec{1, 2, 3, 4});
  Vec patch = r.stages[1][0];
  std::sort(patch.begin(), patch.end());
  EXPECT_EQ(patch, (Vec{1, 2, 3, 4}));
}

TEST(Builders, RecurrentCovers) {
  const CoverSequence rnn = build_rnn_cover(4, RecurrentKind::rnn);
  ASSERT_EQ(rnn.size(), 4u);
  EXPECT_EQ(rnn[1][0].members, (PointSet{0, 1}));
  EXPECT_EQ(rnn[1].size(), 3u);
  EXPECT_EQ(rnn[3][0].members, rnn.space().all_points());

  const CoverSequence lstm = build_rnn_cover(5, RecurrentKind::lstm, 2);
  EXPECT_EQ(lstm[1].size(), 4u);
  EXPECT_EQ(lstm[2][0].members, (PointSet{0, 1, 2}));
  EXPECT_EQ(lstm.stages().back()[0].members, lstm.space().all_points());
  EXPECT_THROW(build_rnn_cover(1, RecurrentKind::rnn), InvalidInput);
  EXPECT_THROW(build_rnn_cover(4, RecurrentKind::lstm, 5), InvalidInput);
}

TEST(Builders, PositionalEncodingMatchesClosedForm) {
  for (std::size_t n = 1; n <= 16; ++n)
    for (std::size_t d = 1; d <= 16; ++d) {
      const auto pe = positional_encoding(n, d);
      ASSERT_EQ(pe.size(), n * d);
      for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= d; ++j) {
          const auto [s, t] = oracle::positional(i, d, j);
          EXPECT_NEAR(pe[(i - 1) * d + (j - 1)].first, static_cast<double>(s), 1e-12);
          EXPECT_NEAR(pe[(i - 1) * d + (j - 1)].second, static_cast<double>(t), 1e-12);
        }
    }
  // i = 2 takes the sine branch, i = 1 the cosine branch.
  EXPECT_NEAR(positional_encoding(2, 1)[1].first, std::sin(2.0 / 1e8), 1e-15);
  EXPECT_NEAR(positional_encoding(1, 1)[0].first, std::cos(1.0 / 1e8), 1e-15);
  EXPECT_THROW(positional_encoding(0, 3), InvalidInput);
}

TEST(Builders, AttentionShapesAndGeneralLayer) {
  const Network net = build_attention(3, 4, 2, 2, 5);
  EXPECT_EQ(net.covers()[0].size(), 12u);
  EXPECT_EQ(net.covers()[1].size(), 3u);
  EXPECT_EQ(net.covers()[2].size(), 3u);
  EXPECT_EQ(net.layer(1).kind_name(), "attention");
  const Vec out = forward_output(net, gaussian_points(12, 1, 0).front());
  EXPECT_EQ(out.size(), 12u);
  EXPECT_THROW(global_section(net, Deviation::zero(net.space())), PreconditionFailed);
  const AxiomReport rep = check_na_axioms(net.covers());
  EXPECT_FALSE(rep.at_stage(1).locality);
  EXPECT_FALSE(rep.at_stage(2).distinctness);
}

TEST(Builders, AttentionScoresAreDistributions) {
  const Network net = build_attention(4, 2, 1, 3, 9);
  const auto x = gaussian_points(8, 1, 2).front();
  const ForwardResult r = forward(net, Deviation::zero(net.space()), x);
  const Layer& l = net.layer(1);
  const auto& att = std::get<Attention>(std::get<General>(l.kind).map);
  const auto scores = attention_scores(att, l.aggregation, r.stages[1], 0);
  for (const auto& row : scores) {
    double total = 0.0;
    for (double s : row) {
      EXPECT_GE(s, 0.0);
      total += s;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}
