#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sheafnet/builders.hpp"
#include "sheafnet/cech.hpp"
#include "sheafnet/error.hpp"
#include "sheafnet/graphs.hpp"
#include "sheafnet/io.hpp"
#include "sheafnet/network.hpp"
#include "sheafnet/topology.hpp"
#include "sheafnet/witnesses.hpp"

// Report assembly behind the command-line tool. Every report carries
// "schema": 1 and no clock or path data, so equal arguments give equal bytes.

namespace sheafnet::cli {

using json = nlohmann::ordered_json;

enum ExitCode : int { kPass = 0, kVerdictFail = 1, kInputError = 2 };

struct RunConfig {
  std::uint64_t seed = 0;
  double tol = 1e-9;
  std::size_t samples = 100;
  std::string out;

  std::vector<std::string> files;  ///< positional inputs (graphs)
  std::string cover;               ///< cover document
  std::string net;                 ///< network document
  std::size_t index = 0;           ///< which cover of the document
  std::size_t k = 1;               ///< section output dimension
  std::optional<std::size_t> max_degree;
  std::optional<std::size_t> families;
  std::size_t depth = 3;
  double p = 2.0;
  double delta = 1.0;
  std::optional<std::size_t> layer;
  std::string mode = "sparse";
  std::size_t grid = 100;
};

struct RunResult {
  int exit_code = kPass;
  json report;
};

namespace detail {

inline const char* verdict(bool pass) { return pass ? "pass" : "fail"; }

inline bool passed(const json& j) { return j.at("verdict") == "pass"; }

inline json header(const std::string& command, const RunConfig& cfg) {
  return {{"schema", 1}, {"command", command}, {"seed", cfg.seed}};
}

/// Wraps a list of checks, each carrying a "verdict", into a report.
inline RunResult collect(json report, json results) {
  bool all = true;
  for (const auto& r : results) all = all && passed(r);
  report["results"] = std::move(results);
  report["verdict"] = verdict(all);
  return {all ? kPass : kVerdictFail, std::move(report)};
}

inline std::string stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

inline Cover document_cover(const RunConfig& cfg, std::string* id = nullptr) {
  if (cfg.cover.empty()) throw InvalidInput("--cover is required");
  const io::CoverDocument doc = io::load_cover_document(cfg.cover);
  if (cfg.index >= doc.covers.size())
    throw InvalidInput("--index " + std::to_string(cfg.index) + " but the document lists " +
                       std::to_string(doc.covers.size()) + " cover(s)");
  if (id) *id = stem(cfg.cover) + (doc.covers.size() > 1 ? "#" + std::to_string(cfg.index) : "");
  return make_cover(doc.space, doc.covers[cfg.index]);
}

inline Network document_network(const RunConfig& cfg) {
  if (cfg.net.empty()) throw InvalidInput("--net is required");
  return io::load_network(cfg.net);
}

inline json optional_index(const std::optional<std::size_t>& v) { return v ? json(*v + 1) : json(nullptr); }

inline json axioms_json(const AxiomReport& rep) {
  json stages = json::array();
  for (const auto& s : rep.stages) {
    json j = {{"stage", s.stage},
              {"locality", s.locality},
              {"strictness", s.strictness},
              {"non_triviality", s.non_triviality},
              {"distinctness", s.distinctness}};
    if (s.uncovered_point) j["uncovered_point"] = *s.uncovered_point + 1;
    if (s.non_trivial_violator) j["non_trivial_violator"] = *s.non_trivial_violator + 1;
    if (s.duplicate) j["duplicate"] = {s.duplicate->first + 1, s.duplicate->second + 1};
    stages.push_back(std::move(j));
  }
  json first = json::object(), internal = json::object();
  for (std::size_t a = 0; a < 4; ++a) {
    const auto ax = static_cast<Axiom>(a);
    const std::string name(axiom_name(ax));
    first[name] = rep.first_violation[a] ? json(*rep.first_violation[a]) : json(nullptr);
    internal[name] = rep.internal_hold(ax);
  }
  return {{"stages", stages}, {"first_violation", first}, {"internal", internal}, {"all_hold", rep.all_hold()}};
}

/// Axiom report of a network checked against expected internal verdicts.
inline json axioms_check(const std::string& name, const Network& net, const json& expected_internal) {
  json j = {{"check", "axioms"}, {"network", name}};
  j.update(axioms_json(check_na_axioms(net.covers())));
  bool ok = true;
  for (const auto& [ax, want] : expected_internal.items()) ok = ok && j["internal"][ax] == want;
  j["expected_internal"] = expected_internal;
  j["verdict"] = verdict(ok);
  return j;
}

/// Global section from stage_sections against the forward pass.
inline json section_forward_check(const std::string& name, const Network& net, const Deviation& dev,
                                  const RunConfig& cfg) {
  const Section g = global_section(net, dev);
  double worst = 0.0;
  for (const auto& x : gaussian_points(net.space().total_dim(), cfg.samples, cfg.seed)) {
    const Vec a = g(x), b = forward(net, dev, x).output;
    for (std::size_t t = 0; t < a.size(); ++t) worst = std::max(worst, std::abs(a[t] - b[t]));
  }
  return {{"check", "global-section-vs-forward"},
          {"network", name},
          {"samples", cfg.samples},
          {"max_deviation", worst},
          {"verdict", verdict(worst <= cfg.tol * 1e3)}};
}

inline json factors_json(const std::string& name, const Network& net, const RunConfig& cfg) {
  json layers = json::array();
  bool ok = true;
  for (std::size_t n = 0; n < net.n_layers(); ++n) {
    const FactorsReport r = factors_check(net, n, std::min<std::size_t>(cfg.samples, 50), cfg.tol * 1e3, cfg.seed);
    json l = {{"layer", n}, {"kind", net.layer(n).kind_name()}, {"factors_through_inclusion", r.applicable}};
    if (r.applicable) {
      l["composite_agrees"] = r.agrees;
      l["max_deviation"] = r.max_deviation;
      ok = ok && r.agrees;
    } else {
      l["affine_fit_residual"] = r.affine_fit_residual;
    }
    layers.push_back(std::move(l));
  }
  return {{"check", "factors-through-inclusion"}, {"network", name}, {"layers", layers}, {"verdict", verdict(ok)}};
}

/// First layer whose aggregation incidence has a nonzero kernel.
inline std::size_t attackable_layer(const Network& net) {
  for (std::size_t j = 0; j < net.n_layers(); ++j) {
    if (!net.layer(j).factors_through_inclusion()) continue;
    const IntMatrix m = aggregation_incidence(net, j);
    if (exact_rank(m) < m.cols) return j;
  }
  throw PreconditionFailed("no factoring layer has a nonzero aggregation kernel");
}

inline AttackMode attack_mode(const std::string& m) {
  if (m == "sparse") return AttackMode::sparse;
  if (m == "dense") return AttackMode::dense;
  throw InvalidInput("--mode must be sparse or dense");
}

/// Last cover before the global readout.
inline Cover readout_cover(const Network& net) {
  const auto& stages = net.covers().stages();
  return stages[stages.size() >= 2 ? stages.size() - 2 : 0];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

/// Axiom report for a cover sequence; reports values rather than a verdict.
inline RunResult run_axioms(const RunConfig& cfg) {
  json report = detail::header("axioms", cfg);
  std::optional<CoverSequence> seq;
  if (!cfg.net.empty()) {
    seq = detail::document_network(cfg).covers();
    report["source"] = detail::stem(cfg.net);
  } else {
    if (cfg.cover.empty()) throw InvalidInput("axioms needs --cover or --net");
    const io::CoverDocument doc = io::load_cover_document(cfg.cover);
    seq = CoverSequence(doc.space, doc.covers);
    report["source"] = detail::stem(cfg.cover);
  }
  report.update(detail::axioms_json(check_na_axioms(*seq)));
  return {kPass, std::move(report)};
}

inline RunResult run_cohomology(const RunConfig& cfg) {
  std::string id;
  const Cover cover = detail::document_cover(cfg, &id);
  const std::size_t max_degree = cfg.max_degree.value_or(std::max<std::size_t>(1, cover.size() - 1));
  const CohomologyResult c = cech_cohomology(cover, cfg.k, max_degree);
  const ExactnessReport e = sheaf_axiom_check(cover, cfg.k);
  const std::size_t expected_h0 = cfg.k * cover.space().dim(cover.covered());
  const bool ok = c.acyclic() && c.h.front() == expected_h0 && e.passes() && c.delta_squared_zero &&
                  c.float_ranks_agree && e.float_ranks_agree;

  json report = detail::header("cohomology", cfg);
  report["cover_id"] = id;
  report["k"] = cfg.k;
  report["h"] = c.h;
  report["dims"] = c.dims;
  report["ranks"] = c.ranks;
  report["exact"] = e.passes();
  report["exactness"] = {{"injective", e.injective},
                         {"middle_exact", e.middle_exact},
                         {"cosheaf_surjective", e.cosheaf_surjective},
                         {"cosheaf_middle_exact", e.cosheaf_middle_exact}};
  report["delta_squared_zero"] = c.delta_squared_zero;
  report["float_ranks_agree"] = c.float_ranks_agree && e.float_ranks_agree;
  report["verdict"] = detail::verdict(ok);
  return {ok ? kPass : kVerdictFail, std::move(report)};
}

inline RunResult run_witness(const std::string& claim, const RunConfig& cfg) {
  json report = detail::header("witness " + claim, cfg);
  json results = json::array();
  if (claim == "prop2.8") {
    const Cover cover = detail::document_cover(cfg);
    results.push_back(locality_witness(cover, cfg.k, std::nullopt, cfg.samples, cfg.tol, cfg.seed).report.to_json());
    results.push_back(surjectivity_witness(cover, cfg.k, cfg.families.value_or(50), 1e-12, cfg.seed).to_json());
  } else if (claim == "glue") {
    const Cover cover = detail::document_cover(cfg);
    results.push_back(glue_witness(cover, cfg.k, cfg.families.value_or(100), cfg.tol, cfg.seed).to_json());
  } else if (claim == "kernel") {
    const Cover cover = detail::document_cover(cfg);
    results.push_back(kernel_witness(cover, cfg.k, cfg.families.value_or(50), cfg.seed).to_json());
  } else if (claim == "thm4.1") {
    const Network net = detail::document_network(cfg);
    const Cover readout = detail::readout_cover(net);
    results.push_back(
        locality_witness(readout, cfg.k, std::nullopt, cfg.samples, cfg.tol, cfg.seed, "thm4.1").report.to_json());
    const auto* g = std::get_if<General>(&net.layer(0).kind);
    if (g && std::holds_alternative<MaxPool>(g->map)) results.push_back(pooling_collision(net, cfg.seed).to_json());
  } else if (claim == "thm4.2") {
    const Network net = detail::document_network(cfg);
    const std::size_t j = cfg.layer ? *cfg.layer : detail::attackable_layer(net);
    const AttackResult a =
        adversarial_attack(net, j, cfg.p, cfg.delta, cfg.seed, detail::attack_mode(cfg.mode), 20, cfg.tol);
    results.push_back(a.report.to_json());
  } else if (claim == "thm4.3") {
    const Network net = detail::document_network(cfg);
    DependencyOptions opt;
    opt.grid_side = cfg.grid;
    opt.tol = 1e-6;
    opt.seed = cfg.seed;
    results.push_back(dataset_dependency(net, opt).to_json());
  } else {
    throw InvalidInput("unknown witness '" + claim + "' (expected prop2.8, glue, kernel, thm4.1, thm4.2, thm4.3)");
  }
  return detail::collect(std::move(report), std::move(results));
}

/// Unfolding-tree histograms of two graphs; passes when 1-WL agrees with
/// the tree verdict.
inline RunResult run_wl_compare(const RunConfig& cfg) {
  if (cfg.files.size() != 2) throw InvalidInput("wl-compare needs exactly two graph files");
  const Graph g1 = io::load_graph(cfg.files[0]);
  const Graph g2 = io::load_graph(cfg.files[1]);
  const GraphComparison c = compare_graphs(g1, g2, cfg.depth);
  json hist = json::array();
  for (const auto& [code, counts] : c.histogram) hist.push_back({{"tree", code}, {"g1", counts.first}, {"g2", counts.second}});
  json report = detail::header("wl-compare", cfg);
  report.erase("seed");
  report["graphs"] = {detail::stem(cfg.files[0]), detail::stem(cfg.files[1])};
  report["depth"] = cfg.depth;
  report["result"] = c.distinguishable ? "distinguishable" : "indistinguishable";
  report["wl_result"] = c.wl_distinguishable ? "distinguishable" : "indistinguishable";
  if (c.distinguishable) report["first_difference"] = c.first_difference;
  report["histogram"] = std::move(hist);
  const bool ok = c.distinguishable == c.wl_distinguishable;
  report["verdict"] = detail::verdict(ok);
  return {ok ? kPass : kVerdictFail, std::move(report)};
}

// ---------------------------------------------------------------------------
// Demo suites

inline RunResult run_demo_cnn(const RunConfig& cfg) {
  json results = json::array();

  // 8x8 grid: convolution, sum pooling, dense head.
  const Network deep = build_cnn(8, {{ConvStep{2, 4, "relu"}, PoolStep{PoolKind::sum, 2}, DenseStep{1}}, cfg.seed});
  results.push_back(detail::axioms_check("cnn-8-conv-sumpool-dense", deep,
                                         {{"strictness", true}, {"non_triviality", true}, {"distinctness", true}}));
  results.push_back(detail::section_forward_check("cnn-8-conv-sumpool-dense", deep, Deviation::zero(deep.space()), cfg));
  results.push_back(detail::factors_json("cnn-8-conv-sumpool-dense", deep, cfg));

  // 4x4 grid: sum pooling and a fully connected head, attacked at the pooling.
  const Network pool = build_cnn(4, {{PoolStep{PoolKind::sum, 2}, DenseStep{1}}, cfg.seed});
  for (double delta : {1.0, 10.0, 100.0})
    results.push_back(adversarial_attack(pool, 0, cfg.p, delta, cfg.seed, detail::attack_mode(cfg.mode), 20, cfg.tol)
                          .report.to_json());

  // 4x4 grid with max pooling: block rotations collide.
  const Network maxpool = build_cnn(4, {{PoolStep{PoolKind::max, 2}, DenseStep{1}}, cfg.seed});
  results.push_back(pooling_collision(maxpool, cfg.seed).to_json());
  results.push_back(locality_witness(detail::readout_cover(maxpool), 1, std::nullopt, cfg.samples, cfg.tol, cfg.seed,
                                     "thm4.1")
                        .report.to_json());

  // Final activation sigmoid: a constant target the network never reaches.
  const Network sig = build_cnn(4, {{PoolStep{PoolKind::sum, 2}, DenseStep{1, "sigmoid"}}, cfg.seed});
  DependencyOptions opt;
  opt.grid_side = cfg.grid;
  opt.seed = cfg.seed;
  results.push_back(dataset_dependency(sig, opt).to_json());

  return detail::collect(detail::header("demo cnn", cfg), std::move(results));
}

inline RunResult run_demo_rnn(const RunConfig& cfg) {
  json results = json::array();
  for (auto [kind, name] : {std::pair{RecurrentKind::rnn, "rnn-5"}, std::pair{RecurrentKind::lstm, "lstm-5"}}) {
    const Network net = build_rnn(5, kind, 3, cfg.seed);
    json ax = {{"check", "axioms"}, {"network", name}, {"informational", true}};
    ax.update(detail::axioms_json(check_na_axioms(net.covers())));
    ax["verdict"] = "pass";
    results.push_back(std::move(ax));
    results.push_back(detail::section_forward_check(name, net, Deviation::zero(net.space()), cfg));
    results.push_back(detail::factors_json(name, net, cfg));
    results.push_back(adversarial_attack(net, detail::attackable_layer(net), cfg.p, cfg.delta, cfg.seed,
                                         detail::attack_mode(cfg.mode), 20, cfg.tol)
                          .report.to_json());
    DependencyOptions opt;
    opt.grid_side = cfg.grid;
    opt.seed = cfg.seed;
    results.push_back(dataset_dependency(net, opt).to_json());
  }
  return detail::collect(detail::header("demo rnn", cfg), std::move(results));
}

inline RunResult run_demo_attention(const RunConfig& cfg) {
  json results = json::array();
  const std::size_t n = 3, d = 4;
  const Network net = build_attention(n, d, 2, 2, cfg.seed);
  results.push_back(detail::axioms_check("attention-3x4", net, {{"locality", false}, {"distinctness", false}}));

  // Positional encoding against a direct evaluation of its closed form.
  const auto pe = positional_encoding(n, d);
  double worst = 0.0;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= d; ++j) {
      const double angle = double(i) / std::pow(10000.0, 2.0 * double(j) / double(d));
      const auto [s, t] = pe[(i - 1) * d + (j - 1)];
      worst = std::max({worst, std::abs(s - (i % 2 == 0 ? std::sin(angle) : std::cos(angle))),
                        std::abs(t - (2.0 * double(j) - 1.0) / (2.0 * double(d)))});
    }
  results.push_back({{"check", "positional-encoding"},
                     {"n", n},
                     {"d", d},
                     {"max_deviation", worst},
                     {"verdict", detail::verdict(worst <= 1e-12)}});

  json fx = detail::factors_json("attention-3x4", net, cfg);
  bool attention_general = false;
  for (const auto& l : fx["layers"])
    if (l["kind"] == "attention") attention_general = !l["factors_through_inclusion"].get<bool>() &&
                                                      l["affine_fit_residual"].get<double>() > cfg.tol;
  fx["attention_layer_is_general"] = attention_general;
  if (!attention_general) fx["verdict"] = "fail";
  results.push_back(std::move(fx));

  const Deviation pos = positional_deviation(net.space(), n, d);
  const auto x = gaussian_points(net.space().total_dim(), 1, cfg.seed).front();
  const Vec with = forward(net, pos, x).output, without = forward(net, Deviation::zero(net.space()), x).output;
  double gap = 0.0;
  for (std::size_t t = 0; t < with.size(); ++t) gap = std::max(gap, std::abs(with[t] - without[t]));
  results.push_back({{"check", "positional-deviation-changes-output"},
                     {"output_dim", with.size()},
                     {"max_gap", gap},
                     {"verdict", detail::verdict(with.size() == n * d && gap > 0.0)}});
  return detail::collect(detail::header("demo attention", cfg), std::move(results));
}

inline RunResult run_demo(const std::string& which, const RunConfig& cfg) {
  if (which == "cnn") return run_demo_cnn(cfg);
  if (which == "rnn") return run_demo_rnn(cfg);
  if (which == "attention") return run_demo_attention(cfg);
  throw InvalidInput("unknown demo '" + which + "' (expected cnn, rnn, attention)");
}

/// Dispatches a subcommand; input problems become exit code 2 with a
/// diagnostic report.
inline RunResult run(const std::string& subcommand, const std::string& target, const RunConfig& cfg) {
  try {
    if (subcommand == "axioms") return run_axioms(cfg);
    if (subcommand == "cohomology") return run_cohomology(cfg);
    if (subcommand == "witness") return run_witness(target, cfg);
    if (subcommand == "wl-compare") return run_wl_compare(cfg);
    if (subcommand == "demo") return run_demo(target, cfg);
    throw InvalidInput("unknown subcommand '" + subcommand + "'");
  } catch (const Error& e) {
    json report = {{"schema", 1}, {"command", subcommand}, {"error", e.what()}};
    return {kInputError, std::move(report)};
  }
}

}  // namespace sheafnet::cli
