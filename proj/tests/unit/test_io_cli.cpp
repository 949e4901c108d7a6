#include <gtest/gtest.h>

#include <random>
#include <string>

#include "sheafnet/cli.hpp"
#include "sheafnet/sheafnet.hpp"
#include "support/generators.hpp"

using namespace sheafnet;

namespace {

std::string fixture(const std::string& name) { return std::string(SHEAFNET_FIXTURES) + "/" + name; }

void expect_same_outputs(const Network& a, const Network& b, std::uint64_t seed) {
  for (const auto& x : gaussian_points(a.space().total_dim(), 5, seed)) {
    const Vec u = forward_output(a, x), v = forward_output(b, x);
    ASSERT_EQ(u.size(), v.size());
    for (std::size_t t = 0; t < u.size(); ++t) EXPECT_NEAR(u[t], v[t], 1e-12);
  }
}

}  // namespace

TEST(Io, SpaceRoundTrip) {
  for (const MarkedSpace& s : {MarkedSpace::grid(2, 3, 2), MarkedSpace({1, 3}), MarkedSpace::uniform(4)}) {
    const MarkedSpace back = io::space_from_json(io::space_to_json(s));
    EXPECT_EQ(back.fiber_dims(), s.fiber_dims());
    EXPECT_EQ(io::structure_to_json(back.structure()), io::structure_to_json(s.structure()));
  }
  EXPECT_THROW(io::space_from_json(json::parse(R"({"n_points": 2, "fiber_dims": [1]})")), InvalidInput);
  EXPECT_THROW(io::space_from_json(json::parse(R"({"fiber_dims": [1]})")), InvalidInput);
}

TEST(Io, CoverDocumentsAreOneBased) {
  const auto doc = io::cover_document_from_json(json::parse(R"({"n_points": 3, "covers": [[[1, 3], [2]]]})"));
  EXPECT_EQ(doc.covers[0][0], (PointSet{0, 2}));
  EXPECT_THROW(io::cover_document_from_json(json::parse(R"({"n_points": 3, "covers": [[[0]]]})")), InvalidInput);
  EXPECT_THROW(io::cover_document_from_json(json::parse(R"({"n_points": 3, "covers": [[[4]]]})")), InvalidInput);
  EXPECT_THROW(io::cover_document_from_json(json::parse(R"({"n_points": 3, "covers": []})")), InvalidInput);
}

TEST(Io, SectionRoundTripPreservesValues) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const Section a = gen::random_affine(rng, 3, 2);
    const Section b = gen::random_affine(rng, 3, 2);
    const Section s = concat({activate("tanh", a), product({a, b}), maximum({b, Section::zero(3, 2)})});
    const Section back = io::section_from_json(io::section_to_json(s));
    EXPECT_TRUE(sections_equal(s, back, 10, 0.0, trial).equal);
    EXPECT_EQ(io::section_to_json(back), io::section_to_json(s));
  }
}

TEST(Io, NetworkRoundTrip) {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = gen::random_fti_network(rng);
    const Network back = io::network_from_json(io::network_to_json(net));
    expect_same_outputs(net, back, trial);
    EXPECT_EQ(io::network_to_json(back), io::network_to_json(net));
  }
  const Network cnn = build_cnn(4, {{ConvStep{2, 2, "relu"}, PoolStep{PoolKind::max, 2}, DenseStep{1}}, 1, 2});
  expect_same_outputs(cnn, io::network_from_json(io::network_to_json(cnn)), 1);
  const Network att = build_attention(3, 2, 2, 1, 4);
  expect_same_outputs(att, io::network_from_json(io::network_to_json(att)), 2);
}

TEST(Io, SumPoolFixtureAddsInputs) {
  const Network net = io::load_network(fixture("sumpool.json"));
  EXPECT_DOUBLE_EQ(forward_output(net, Vec{1, 2, 3, 4})[0], 10.0);
  EXPECT_THROW(io::load_network(fixture("missing.json")), InvalidInput);
  EXPECT_THROW(io::load_network(fixture("malformed.json")), InvalidInput);
}

TEST(Io, GraphFormats) {
  const Graph g = io::graph_from_edge_list("# comment\nn 5\n1 2  # edge\n\n2 3\n");
  EXPECT_EQ(g.n(), 5u);
  EXPECT_EQ(g.edges().size(), 2u);
  const Graph back = io::graph_from_json(io::graph_to_json(g));
  EXPECT_EQ(back.edges(), g.edges());
  EXPECT_EQ(back.n(), 5u);
  EXPECT_THROW(io::graph_from_edge_list("1\n"), InvalidInput);
  EXPECT_THROW(io::graph_from_edge_list("0 1\n"), InvalidInput);
  EXPECT_THROW(io::graph_from_edge_list("a b\n"), InvalidInput);
  EXPECT_THROW(io::graph_from_json(json::parse(R"({"n": 2, "edges": [[1, 3]]})")), InvalidInput);
  EXPECT_EQ(io::load_graph(fixture("p3.txt")).edges().size(), 2u);
  EXPECT_EQ(io::load_graph(fixture("c6.json")).n(), 6u);
}

TEST(Cli, CohomologyReport) {
  cli::RunConfig cfg;
  cfg.cover = fixture("two_disjoint.json");
  const cli::RunResult r = cli::run("cohomology", "", cfg);
  EXPECT_EQ(r.exit_code, cli::kPass) << r.report.dump();
  EXPECT_EQ(r.report["h"], json::array({2, 0}));
  EXPECT_EQ(r.report["cover_id"], "two_disjoint");
  EXPECT_EQ(r.report["verdict"], "pass");
}

TEST(Cli, AttackReportOnSumPool) {
  cli::RunConfig cfg;
  cfg.net = fixture("sumpool.json");
  cfg.delta = 4;
  cfg.seed = 7;
  const cli::RunResult r = cli::run("witness", "thm4.2", cfg);
  ASSERT_EQ(r.exit_code, cli::kPass) << r.report.dump();
  EXPECT_EQ(r.report["results"][0]["measured"]["m"], json::parse("[[0],[0],[3],[-3]]"));

  // A tolerance nothing can meet turns the verdict into a failure.
  cfg.tol = -1.0;
  const cli::RunResult f = cli::run("witness", "thm4.2", cfg);
  EXPECT_EQ(f.exit_code, cli::kVerdictFail);
  EXPECT_EQ(f.report["verdict"], "fail");
}

TEST(Cli, WlCompareFixtures) {
  cli::RunConfig cfg;
  cfg.files = {fixture("c6.json"), fixture("2c3.json")};
  cfg.depth = 6;
  cli::RunResult r = cli::run("wl-compare", "", cfg);
  EXPECT_EQ(r.exit_code, cli::kPass);
  EXPECT_EQ(r.report["result"], "indistinguishable");
  cfg.files = {fixture("p3.txt"), fixture("c3.txt")};
  cfg.depth = 1;
  r = cli::run("wl-compare", "", cfg);
  EXPECT_EQ(r.report["result"], "distinguishable");
  EXPECT_EQ(r.report["graphs"], json::array({"p3", "c3"}));
}

TEST(Cli, InputErrorsExitTwo) {
  cli::RunConfig cfg;
  cfg.cover = fixture("malformed.json");
  cli::RunResult r = cli::run("cohomology", "", cfg);
  EXPECT_EQ(r.exit_code, cli::kInputError);
  EXPECT_TRUE(r.report.contains("error"));
  EXPECT_EQ(cli::run("bogus", "", cfg).exit_code, cli::kInputError);
  EXPECT_EQ(cli::run("witness", "nope", cfg).exit_code, cli::kInputError);
  EXPECT_EQ(cli::run("demo", "nope", cfg).exit_code, cli::kInputError);
  cfg.cover = fixture("two_disjoint.json");
  cfg.index = 3;
  EXPECT_EQ(cli::run("cohomology", "", cfg).exit_code, cli::kInputError);
}

TEST(Cli, ReportsAreReproducible) {
  cli::RunConfig cfg;
  cfg.cover = fixture("triangle.json");
  cfg.k = 2;
  cfg.seed = 11;
  cfg.families = 10;
  EXPECT_EQ(cli::run("witness", "glue", cfg).report.dump(), cli::run("witness", "glue", cfg).report.dump());
  EXPECT_EQ(cli::run("demo", "attention", cfg).report.dump(), cli::run("demo", "attention", cfg).report.dump());
}
