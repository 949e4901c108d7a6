#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "sheafnet/cli.hpp"

namespace {

void add_common(CLI::App* app, sheafnet::cli::RunConfig& cfg) {
  app->add_option("--seed", cfg.seed, "seed for every randomized step");
  app->add_option("--tol", cfg.tol, "numerical tolerance")->check(CLI::PositiveNumber);
  app->add_option("--samples", cfg.samples, "sample count for extensional checks");
  app->add_option("--out", cfg.out, "write the JSON report here instead of stdout");
}

void add_cover(CLI::App* app, sheafnet::cli::RunConfig& cfg) {
  app->add_option("--cover", cfg.cover, "cover document (JSON)");
  app->add_option("--index", cfg.index, "which cover of the document (0-based)");
  app->add_option("--k", cfg.k, "output dimension of sections")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace sheafnet::cli;
  CLI::App app{"Sheaf-theoretic checks for neighborhood-aggregating networks"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string target;
  std::size_t max_degree = 0, families = 0, layer = 0;

  auto* axioms = app.add_subcommand("axioms", "neighborhood-aggregation axiom report for a cover sequence");
  add_common(axioms, cfg);
  axioms->add_option("--cover", cfg.cover, "cover document whose covers are the stages");
  axioms->add_option("--net", cfg.net, "network document");

  auto* cohomology = app.add_subcommand("cohomology", "Cech cohomology and exactness of the Hom sheaf");
  add_common(cohomology, cfg);
  add_cover(cohomology, cfg);
  auto* max_degree_opt = cohomology->add_option("--max-degree", max_degree, "highest cochain degree");

  auto* witness = app.add_subcommand("witness", "run one witness generator");
  add_common(witness, cfg);
  add_cover(witness, cfg);
  witness->add_option("claim", target, "prop2.8 | glue | kernel | thm4.1 | thm4.2 | thm4.3")->required();
  witness->add_option("--net", cfg.net, "network document");
  auto* families_opt =
      witness->add_option("--families", families, "number of seeded families (glue, kernel, prop2.8 controls)");
  witness->add_option("--p", cfg.p, "norm order of the attack displacement");
  witness->add_option("--delta", cfg.delta, "displacement threshold of the attack");
  auto* layer_opt = witness->add_option("--layer", layer, "attacked layer (0-based)");
  witness->add_option("--mode", cfg.mode, "attack direction: sparse or dense");
  witness->add_option("--grid", cfg.grid, "grid side of the unreachable-target probe");

  auto* wl = app.add_subcommand("wl-compare", "compare two graphs by depth-k unfolding trees and 1-WL");
  add_common(wl, cfg);
  wl->add_option("graphs", cfg.files, "two graph files (JSON or edge list)")->expected(2)->required();
  wl->add_option("--depth", cfg.depth, "unfolding depth / WL rounds");

  auto* demo = app.add_subcommand("demo", "build an example network and run the suite against it");
  add_common(demo, cfg);
  demo->add_option("network", target, "cnn | rnn | attention")->required();
  demo->add_option("--p", cfg.p, "norm order of the attack displacement");
  demo->add_option("--delta", cfg.delta, "displacement threshold of the attack");
  demo->add_option("--mode", cfg.mode, "attack direction: sparse or dense");
  demo->add_option("--grid", cfg.grid, "grid side of the unreachable-target probe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (max_degree_opt->count()) cfg.max_degree = max_degree;
  if (families_opt->count()) cfg.families = families;
  if (layer_opt->count()) cfg.layer = layer;

  const RunResult r = run(chosen->get_name(), target, cfg);
  const std::string text = r.report.dump(2) + "\n";
  if (r.exit_code == kInputError) std::cerr << "error: " << r.report.value("error", "") << "\n";
  if (cfg.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(cfg.out);
    if (!out) {
      std::cerr << "error: cannot write '" << cfg.out << "'\n";
      return kInputError;
    }
    out << text;
  }
  return r.exit_code;
}
