// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. argv[1] is the path of the sheafnet CLI binary (criterion 13).

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sheafnet/sheafnet.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace sheafnet;

namespace {

// Pinned tolerances and budgets.
constexpr double kGlueTol = 1e-9;
constexpr double kSeparableTol = 1e-12;
constexpr double kDisplacementTol = 1e-12;
constexpr double kOutputTol = 1e-9;
constexpr double kUnreachableTol = 1e-6;
constexpr double kEncodingTol = 1e-12;
constexpr double kExactnessBudgetSeconds = 5.0;
constexpr double kWlBudgetSeconds = 60.0;
constexpr std::size_t kSweepCovers = 300;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fixtures_dir() { return SHEAFNET_FIXTURES; }

std::vector<Cover> cover_sweep() {
  std::mt19937_64 rng(2024);
  std::vector<Cover> out;
  for (std::size_t i = 0; i < kSweepCovers; ++i) out.push_back(gen::random_cover(rng, 6, 5, 2));
  return out;
}

/// Covers of the sweep with no element equal to the union and at least two
/// coordinates in it.
bool qualifies_for_locality(const Cover& c) {
  const PointSet u = c.covered();
  if (c.space().dim(u) < 2) return false;
  for (const auto& e : c.elements())
    if (e.members == u) return false;
  return true;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << v;
  return s.str();
}

// 1 ---------------------------------------------------------------------------
Outcome exactness(const std::vector<Cover>& covers) {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t passed = 0, checks = 0;
  for (std::size_t i = 0; i < covers.size(); ++i) {
    const ExactnessReport e = sheaf_axiom_check(covers[i], 1 + i % 3);
    ++checks;
    if (e.passes() && e.float_ranks_agree) ++passed;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {passed == checks && secs < kExactnessBudgetSeconds,
          std::to_string(passed) + "/" + std::to_string(checks) + " covers exact in " + fmt(secs) + " s (budget " +
              fmt(kExactnessBudgetSeconds) + " s)"};
}

// 2 ---------------------------------------------------------------------------
Outcome acyclicity(const std::vector<Cover>& covers) {
  std::size_t passed = 0, oracle_agree = 0;
  for (std::size_t i = 0; i < covers.size(); ++i) {
    const Cover& c = covers[i];
    const std::size_t k = 1 + i % 3;
    const CohomologyResult r = cech_cohomology(c, k, 3);
    bool ok = r.h.size() == 4 && r.delta_squared_zero;
    for (std::size_t q = 1; q < r.h.size(); ++q) ok = ok && r.h[q] == 0;
    std::size_t total_fiber = 0;
    for (auto p : c.covered()) total_fiber += c.space().fiber(p);
    ok = ok && r.h[0] == k * total_fiber;
    if (ok) ++passed;
    const oracle::CechNumbers o = oracle::cech(c, k, 3);
    if (o.h == r.h && o.dims == r.dims) ++oracle_agree;
  }
  return {passed == covers.size() && oracle_agree == covers.size(),
          std::to_string(passed) + "/" + std::to_string(covers.size()) + " acyclic with h0 = k*sum l_i; " +
              std::to_string(oracle_agree) + " match the dense oracle"};
}

// 3 ---------------------------------------------------------------------------
Outcome locality(const std::vector<Cover>& covers) {
  std::size_t qualifying = 0, passed = 0;
  for (std::size_t i = 0; i < covers.size(); ++i) {
    const Cover& c = covers[i];
    if (!qualifies_for_locality(c)) continue;
    ++qualifying;
    const std::size_t k = 1 + i % 3;
    const LocalityWitness w = locality_witness(c, k, std::nullopt, 100, kGlueTol, i);
    const PointSet u = c.covered();
    double worst = 0.0;
    for (std::size_t a = 0; a < c.size(); ++a) {
      const Section r = restrict_to(c.space(), w.h, u, c[a].members);
      worst = std::max(worst, max_deviation(r, Section::zero(c.space().dim(c[a].members), k),
                                            gaussian_points(c.space().dim(c[a].members), 100, 7 * i + a), 0.0)
                                  .max_deviation);
    }
    double ones = 0.0;
    for (double v : w.h(Vec(c.space().dim(u), 1.0))) ones = std::max(ones, std::abs(v));
    if (worst == 0.0 && ones == 1.0 && w.report.verdict) ++passed;
  }
  return {qualifying > 0 && passed == qualifying,
          std::to_string(passed) + "/" + std::to_string(qualifying) +
              " qualifying covers: restrictions exactly zero at 100 samples, |h(1..1)| = 1"};
}

// 4 ---------------------------------------------------------------------------
Outcome surjectivity(const std::vector<Cover>& covers) {
  // d_U = 2, base 0, step 1: the product y_1 y_2 has mixed difference 1.
  const MarkedSpace two = MarkedSpace::uniform(2);
  const Section h = product_counterexample(two, two.all_points(), 1);
  const double base_md = mixed_difference(h, 0, 1, Vec{0.0, 0.0}, 1.0)[0];

  std::size_t qualifying = 0, passed = 0;
  double worst_control = 0.0;
  for (std::size_t i = 0; i < covers.size(); ++i) {
    const Cover& c = covers[i];
    if (!qualifies_for_locality(c)) continue;
    try {
      const WitnessReport r = surjectivity_witness(c, 1 + i % 2, 50, kSeparableTol, i);
      ++qualifying;
      worst_control = std::max(worst_control, r.measured["max_separable_mixed_difference"].get<double>());
      if (r.verdict) ++passed;
    } catch (const PreconditionFailed&) {
      // Every pair of points shares an element; no cross-element pair.
    }
  }
  return {base_md == 1.0 && qualifying > 0 && passed == qualifying,
          "product mixed difference " + fmt(base_md) + "; " + std::to_string(passed) + "/" +
              std::to_string(qualifying) + " covers with 50 separable controls <= 1e-12 (worst " + fmt(worst_control) +
              ")"};
}

// 5 ---------------------------------------------------------------------------

/// First pair (a, c), a < c, whose locals differ on the overlap, found by
/// evaluating both on zero-padded overlap points.
std::optional<std::pair<std::size_t, std::size_t>> brute_force_offending_pair(const Cover& cover,
                                                                             const std::vector<Section>& locals) {
  const auto& space = cover.space();
  auto pad = [&](const PointSet& into, const PointSet& w, const Vec& y) {
    Vec out;
    std::size_t cursor = 0;
    for (auto p : into)
      for (std::size_t t = 0; t < space.fiber(p); ++t) out.push_back(w.contains(p) ? y[cursor++] : 0.0);
    return out;
  };
  for (std::size_t a = 0; a < cover.size(); ++a)
    for (std::size_t c = a + 1; c < cover.size(); ++c) {
      const PointSet w = cover[a].members & cover[c].members;
      auto pts = gaussian_points(space.dim(w), 5, a * 31 + c);
      for (const auto& y : pts) {
        const Vec fa = locals[a](pad(cover[a].members, w, y));
        const Vec fc = locals[c](pad(cover[c].members, w, y));
        for (std::size_t t = 0; t < fa.size(); ++t)
          if (std::abs(fa[t] - fc[t]) > kGlueTol) return std::make_pair(a, c);
      }
    }
  return std::nullopt;
}

Outcome gluing() {
  std::mt19937_64 rng(55);
  std::size_t witnesses = 0, witness_pass = 0, rejections = 0, rejection_pass = 0;
  double worst = 0.0;
  for (std::size_t m = 2; m <= 5; ++m) {
    // Cover with exactly m elements over up to 6 points.
    Cover c = gen::random_cover(rng, 6, m, 2, m);
    while (c.size() != m) c = gen::random_cover(rng, 6, m, 2, m);
    const std::size_t k = 1 + m % 2;
    const WitnessReport r = glue_witness(c, k, 100, kGlueTol, m);
    ++witnesses;
    worst = std::max(worst, r.measured["max_restricted_deviation"].get<double>());
    if (r.verdict) ++witness_pass;

    // Independent rejection check: break each local in turn.
    const PointSet u = c.covered();
    const Section g = gen::random_polynomial_section(rng, c.space(), u, k, 2);
    for (std::size_t broken = 0; broken < m; ++broken) {
      std::vector<Section> locals;
      for (const auto& e : c.elements()) locals.push_back(restrict_to(c.space(), g, u, e.members));
      locals[broken] = (locals[broken] + Section::constant(c.space().dim(c[broken].members), Vec(k, 1.0)))
                           .over(c[broken].members);
      const auto expected = brute_force_offending_pair(c, locals);
      ++rejections;
      try {
        glue_inclusion_exclusion(c, locals, 20, kGlueTol, broken);
      } catch (const IncompatibleLocals& e) {
        if (expected && e.offending_pair() == *expected) ++rejection_pass;
      }
    }
  }
  return {witness_pass == witnesses && rejection_pass == rejections,
          std::to_string(witness_pass) + "/" + std::to_string(witnesses) +
              " covers (2-5 elements) x 100 families glue within 1e-9 (worst " + fmt(worst) + "); " +
              std::to_string(rejection_pass) + "/" + std::to_string(rejections) + " broken families name the oracle pair"};
}

// 6 ---------------------------------------------------------------------------
Outcome kernel() {
  const std::vector<std::pair<std::vector<std::size_t>, std::vector<PointSet>>> cases{
      {{1, 2, 1}, {PointSet{0, 1}, PointSet{1, 2}}},
      {{1, 1, 1}, {PointSet{0, 1}, PointSet{1, 2}, PointSet{0, 2}}},
      {{2, 1, 1, 1}, {PointSet{0, 1, 2}, PointSet{2, 3}, PointSet{0, 3}, PointSet{1}}}};
  std::size_t passed = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const MarkedSpace space(cases[i].first);
    const WitnessReport r = kernel_witness(make_cover(space, cases[i].second), 1 + i % 2, 50, i);
    const bool ok = r.verdict && r.measured["reconstructed_exactly"] == 50 && r.measured["antisymmetric"] == 50;
    if (ok) ++passed;
  }
  return {passed == cases.size(), std::to_string(passed) + "/" + std::to_string(cases.size()) +
                                      " covers: 50/50 families reconstructed exactly and antisymmetric"};
}

// 7 ---------------------------------------------------------------------------
Outcome attack() {
  std::vector<Network> nets;
  nets.push_back(build_cnn(4, {{PoolStep{PoolKind::sum, 2}, DenseStep{2}}, 1}));
  std::mt19937_64 rng(77);
  for (int i = 0; i < 20; ++i) nets.push_back(gen::random_fti_network(rng));

  std::size_t runs = 0, passed = 0;
  double worst_gap = 0.0, worst_disp = 0.0;
  for (std::size_t n = 0; n < nets.size(); ++n) {
    const Network& net = nets[n];
    const double p = 1.0 + static_cast<double>(n % 3);
    for (double delta : {1.0, 10.0, 100.0}) {
      ++runs;
      const AttackResult a = adversarial_attack(net, 0, p, delta, 100 * n + static_cast<std::size_t>(delta),
                                                n % 2 ? AttackMode::dense : AttackMode::sparse, 20, kOutputTol);
      // Zero sum, exactly, per aggregated output and coordinate.
      bool zero_sum = true;
      for (const auto& agg : net.layer(0).aggregation)
        for (std::size_t t = 0; t < net.layer(0).out_dim; ++t) {
          BigInt total = 0;
          for (auto in : agg) total += a.spec.exact[in][t];
          zero_sum = zero_sum && total == 0;
        }
      // Displacement recomputed in long double.
      long double acc = 0.0L;
      for (const auto& row : a.spec.m)
        for (double v : row) acc += std::pow(std::fabs(static_cast<long double>(v)), static_cast<long double>(p));
      const double disp = static_cast<double>(std::pow(acc, 1.0L / static_cast<long double>(p)));
      worst_disp = std::max(worst_disp, std::abs(disp - a.spec.displacement));
      // Outputs over 20 fresh inputs.
      const Perturbation perturb{0, a.spec.m};
      const Deviation dev = Deviation::zero(net.space());
      double gap = 0.0;
      for (const auto& x : gaussian_points(net.space().total_dim(), 20, 9000 + n)) {
        const Vec clean = forward(net, dev, x).output;
        const Vec hit = forward(net, dev, x, &perturb).output;
        for (std::size_t t = 0; t < clean.size(); ++t) gap = std::max(gap, std::abs(clean[t] - hit[t]));
      }
      worst_gap = std::max(worst_gap, gap);
      if (zero_sum && std::abs(disp - a.spec.displacement) <= kDisplacementTol && gap <= kOutputTol &&
          a.spec.displacement > delta && a.report.verdict)
        ++passed;
    }
  }
  return {passed == runs, std::to_string(passed) + "/" + std::to_string(runs) +
                              " attacks (CNN demo + 20 random networks, delta 1/10/100); worst output gap " +
                              fmt(worst_gap) + ", worst displacement error " + fmt(worst_disp)};
}

// 8 ---------------------------------------------------------------------------
Outcome dependency() {
  std::size_t passed = 0, total = 0;
  std::string detail;
  for (const char* head : {"sigmoid", "tanh"}) {
    ++total;
    const Network net = build_sum_pool_demo(head);
    DependencyOptions opt;
    opt.grid_side = 100;
    opt.tol = kUnreachableTol;
    opt.seed = 8;
    const WitnessReport r = dataset_dependency(net, opt);
    const double target = r.measured["target_constant"].get<double>();
    // Independent probe: 10^4 points of the box [-10, 10]^4 on a lattice.
    double closest = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 10; ++a)
      for (int b = 0; b < 10; ++b)
        for (int c = 0; c < 10; ++c)
          for (int d = 0; d < 10; ++d) {
            const Vec x{-10.0 + a * 20.0 / 9, -10.0 + b * 20.0 / 9, -10.0 + c * 20.0 / 9, -10.0 + d * 20.0 / 9};
            closest = std::min(closest, std::abs(forward_output(net, x)[0] - target));
          }
    if (r.verdict && closest > kUnreachableTol && r.measured["case"] == "not-surjective") ++passed;
    detail += std::string(head) + " target " + fmt(target) + " closest " + fmt(closest) + "; ";
  }
  std::size_t catalog_ok = 0;
  const auto names = ActivationRegistry::instance().names();
  for (const auto& name : names) {
    const auto it = oracle::expected_cases().find(name);
    if (it != oracle::expected_cases().end() && classify_activation(activation(name)) == it->second) ++catalog_ok;
  }
  return {passed == total && catalog_ok == names.size(),
          detail + std::to_string(catalog_ok) + "/" + std::to_string(names.size()) + " activations classified"};
}

// 9 ---------------------------------------------------------------------------
using Verdicts = std::array<bool, 4>;  // locality, strictness, non_triviality, distinctness

std::vector<Verdicts> verdicts(const AxiomReport& r) {
  std::vector<Verdicts> out;
  for (const auto& s : r.stages) out.push_back({s.locality, s.strictness, s.non_triviality, s.distinctness});
  return out;
}

Outcome axiom_fixtures() {
  auto load = [](const std::string& name) {
    const io::CoverDocument doc = io::load_cover_document(fixtures_dir() + "/" + name);
    return check_na_axioms(CoverSequence(doc.space, doc.covers));
  };
  // Hand-derived verdicts for each stage transition.
  const std::vector<Verdicts> cnn_expected{{false, true, true, true}, {false, true, true, true}};
  const std::vector<Verdicts> attention_expected{
      {false, true, true, true}, {false, false, true, false}, {false, true, true, true}};
  const bool cnn_ok = verdicts(load("cnn_stages.json")) == cnn_expected;
  const bool att_ok = verdicts(load("attention_stages.json")) == attention_expected;

  // Built CNN sequences: internal strictness, non-triviality, distinctness.
  bool built_ok = true;
  for (const Network& net : {build_cnn(8, {{ConvStep{2, 4, "relu"}, PoolStep{PoolKind::sum, 2}, DenseStep{1}}, 0}),
                             build_cnn(4, {{PoolStep{PoolKind::max, 2}, DenseStep{1}}, 0})}) {
    const AxiomReport r = check_na_axioms(net.covers());
    built_ok = built_ok && r.internal_hold(Axiom::strictness) && r.internal_hold(Axiom::non_triviality) &&
               r.internal_hold(Axiom::distinctness);
  }
  const bool built_att = !check_na_axioms(build_attention(3, 4, 2, 2, 0).covers()).internal_hold(Axiom::locality);
  return {cnn_ok && att_ok && built_ok && built_att,
          std::string("cnn fixture ") + (cnn_ok ? "matches" : "differs") + ", attention fixture " +
              (att_ok ? "matches" : "differs") + ", built CNNs " + (built_ok ? "hold" : "fail") +
              ", built attention fails locality: " + (built_att ? "yes" : "no")};
}

// 10 --------------------------------------------------------------------------
Outcome wl_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t graphs = 0, agree = 0;
  std::vector<std::vector<Graph>> by_size;
  for (std::size_t n = 1; n <= 6; ++n) by_size.push_back(gen::graphs_up_to_isomorphism(n));
  for (const auto& group : by_size)
    for (const Graph& g : group) {
      ++graphs;
      bool ok = true;
      for (std::size_t k = 0; k <= 4; ++k) {
        const auto ref = oracle::unfolding_codes(g, k);
        ok = ok && same_partition(wl_refine(g, k).colors.back(), ref) && same_partition(unfolding_codes(g, k), ref);
      }
      if (ok) ++agree;
    }
  // Cross-graph verdicts within each node count.
  std::size_t pairs = 0, pair_agree = 0;
  for (const auto& group : by_size) {
    std::vector<std::vector<std::vector<std::string>>> sorted(group.size());
    for (std::size_t i = 0; i < group.size(); ++i)
      for (std::size_t k = 0; k <= 4; ++k) {
        auto c = oracle::unfolding_codes(group[i], k);
        std::sort(c.begin(), c.end());
        sorted[i].push_back(std::move(c));
      }
    for (std::size_t i = 0; i < group.size(); ++i)
      for (std::size_t j = i + 1; j < group.size(); ++j)
        for (std::size_t k = 0; k <= 4; ++k) {
          ++pairs;
          const auto wl = wl_refine_joint({group[i], group[j]}, k);
          auto h1 = wl[0].colors.back(), h2 = wl[1].colors.back();
          std::sort(h1.begin(), h1.end());
          std::sort(h2.begin(), h2.end());
          if ((h1 != h2) == (sorted[i][k] != sorted[j][k])) ++pair_agree;
        }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {agree == graphs && pair_agree == pairs && secs < kWlBudgetSeconds,
          std::to_string(agree) + "/" + std::to_string(graphs) + " graph classes (<= 6 nodes, k <= 4), " +
              std::to_string(pair_agree) + "/" + std::to_string(pairs) + " pair verdicts, " + fmt(secs) +
              " s (budget " + fmt(kWlBudgetSeconds) + " s)"};
}

// 11 --------------------------------------------------------------------------
Outcome universal_cover() {
  const Graph c6 = Graph::cycle(6);
  const Graph two = Graph::disjoint_union(Graph::cycle(3), Graph::cycle(3));
  bool same = true;
  for (std::size_t k = 0; k <= 8; ++k) same = same && !compare_graphs(c6, two, k).distinguishable;
  const bool split = compare_graphs(Graph::path(3), Graph::cycle(3), 1).distinguishable;
  return {same && split, std::string("C6 vs C3+C3 indistinguishable for k <= 8: ") + (same ? "yes" : "no") +
                             "; P3 vs C3 distinguishable at k = 1: " + (split ? "yes" : "no")};
}

// 12 --------------------------------------------------------------------------
Outcome positional() {
  double worst = 0.0;
  std::size_t sin_rows = 0, cos_rows = 0;
  for (std::size_t n = 1; n <= 16; ++n)
    for (std::size_t d = 1; d <= 16; ++d) {
      const auto pe = positional_encoding(n, d);
      for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= d; ++j) {
          const auto [s, t] = oracle::positional(i, d, j);
          const auto& got = pe[(i - 1) * d + (j - 1)];
          worst = std::max(worst, static_cast<double>(std::fabs(got.first - s)));
          worst = std::max(worst, static_cast<double>(std::fabs(got.second - t)));
          (i % 2 == 0 ? sin_rows : cos_rows) += 1;
        }
    }
  return {worst <= kEncodingTol && sin_rows > 0 && cos_rows > 0,
          "max deviation " + fmt(worst) + " over N, d <= 16 (" + std::to_string(sin_rows) + " sine, " +
              std::to_string(cos_rows) + " cosine entries)"};
}

// 13 --------------------------------------------------------------------------
std::string capture(const std::string& command) {
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(command.c_str(), "r"), pclose);
  if (!pipe) return "<popen failed>";
  std::string out;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe.get())) > 0) out.append(buf.data(), n);
  return out;
}

Outcome reproducibility(const std::string& cli) {
  if (cli.empty()) return {false, "no CLI path given"};
  const std::string f = fixtures_dir() + "/";
  const std::vector<std::string> commands{
      "axioms --cover " + f + "cnn_stages.json",
      "axioms --net " + f + "sumpool.json",
      "cohomology --cover " + f + "triangle.json --k 2",
      "witness prop2.8 --cover " + f + "two_disjoint.json --k 2",
      "witness glue --cover " + f + "triangle.json --k 2 --families 20",
      "witness kernel --cover " + f + "chain.json --k 2",
      "witness thm4.1 --net " + f + "maxpool.json",
      "witness thm4.2 --net " + f + "sumpool.json --p 2 --delta 4 --mode dense",
      "witness thm4.3 --net " + f + "sumpool_sigmoid.json --grid 30",
      "wl-compare " + f + "c6.json " + f + "2c3.json --depth 4",
      "demo cnn",
      "demo rnn",
      "demo attention",
      "cohomology --cover " + f + "malformed.json"};
  std::size_t identical = 0;
  for (const auto& c : commands) {
    const std::string cmd = "'" + cli + "' " + c + " --seed 13 2>&1";
    const std::string a = capture(cmd), b = capture(cmd);
    if (!a.empty() && a == b) ++identical;
  }
  return {identical == commands.size(),
          std::to_string(identical) + "/" + std::to_string(commands.size()) + " CLI reports byte-identical across runs"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const std::vector<Cover> covers = cover_sweep();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"hom-sheaf exactness", [&] { return exactness(covers); }},
      {"acyclicity", [&] { return acyclicity(covers); }},
      {"locality failure", [&] { return locality(covers); }},
      {"surjectivity failure", [&] { return surjectivity(covers); }},
      {"gluing", gluing},
      {"cosheaf kernel decomposition", kernel},
      {"adversarial attack", attack},
      {"dataset dependency", dependency},
      {"axiom checker fixtures", axiom_fixtures},
      {"WL/unfolding equivalence", wl_equivalence},
      {"universal-cover indistinguishability", universal_cover},
      {"positional encoding", positional},
      {"reproducibility", [&] { return reproducibility(cli); }}};

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << std::setw(2) << i + 1 << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
