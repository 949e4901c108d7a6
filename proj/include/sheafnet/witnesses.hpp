#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sheafnet/activation.hpp"
#include "sheafnet/error.hpp"
#include "sheafnet/linalg.hpp"
#include "sheafnet/network.hpp"
#include "sheafnet/polynomial.hpp"
#include "sheafnet/section.hpp"
#include "sheafnet/topology.hpp"

namespace sheafnet {

using json = nlohmann::ordered_json;

/// Evidence emitted by a witness generator.
struct WitnessReport {
  std::string claim;
  json inputs = json::object();
  json measured = json::object();
  bool verdict = false;
  std::uint64_t seed = 0;

  json to_json() const {
    json j;
    j["schema"] = 1;
    j["claim"] = claim;
    j["seed"] = seed;
    j["inputs"] = inputs;
    j["measured"] = measured;
    j["verdict"] = verdict ? "pass" : "fail";
    return j;
  }
};

inline json to_json(const PointSet& s) {
  json j = json::array();
  for (auto p : s) j.push_back(p + 1);
  return j;
}

inline json to_json(const Cover& c) {
  json j = json::array();
  for (const auto& e : c.elements()) j.push_back(to_json(e.members));
  return j;
}

namespace detail {

inline double inf_norm(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// First pair of distinct points of `u` that no element of `cover` contains
/// together.
inline std::optional<std::pair<std::size_t, std::size_t>> uncovered_pair(const std::vector<PointSet>& elements,
                                                                        const PointSet& u) {
  for (auto p : u)
    for (auto q : u) {
      if (q <= p) continue;
      const bool together = std::any_of(elements.begin(), elements.end(),
                                        [&](const PointSet& e) { return e.contains(p) && e.contains(q); });
      if (!together) return std::make_pair(p, q);
    }
  return std::nullopt;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Locality failure

struct LocalityWitness {
  Section h;
  WitnessReport report;
};

/// The k outputs of sum_j y_j over the union of `cover`, a simple global
/// section to pair with the product counterexample.
inline Section identity_sum_section(const MarkedSpace& space, const PointSet& u, std::size_t k) {
  return linear(Matrix(k, space.dim(u), 1.0), Section::identity(space.dim(u))).over(u);
}

/// Product counterexample h over the union U: h restricts to zero on every
/// element yet h(1,...,1) = (1,...,1); g and g + h agree on every element
/// and differ globally.
inline LocalityWitness locality_witness(const Cover& cover, std::size_t k, std::optional<Section> g = std::nullopt,
                                        std::size_t n_samples = 100, double tol = 1e-9, std::uint64_t seed = 0,
                                        std::string claim = "prop2.8-locality") {
  const auto& space = cover.space();
  const PointSet u = cover.covered();
  for (std::size_t a = 0; a < cover.size(); ++a)
    if (cover[a].members == u)
      throw PreconditionFailed("cover element " + cover[a].id + " contains every point of the union");
  if (space.dim(u) < 2) throw PreconditionFailed("the union needs at least two coordinates");

  LocalityWitness w{product_counterexample(space, u, k), {}};
  const Section base = g ? *g : identity_sum_section(space, u, k);
  if (base.dim_in() != space.dim(u) || base.dim_out() != k)
    throw InvalidInput("global section g must map R^{d_U} to R^k");
  const Section perturbed = (base + w.h).over(u);

  double max_restricted = 0.0, max_g_gap = 0.0;
  bool structurally_zero = true;
  for (std::size_t a = 0; a < cover.size(); ++a) {
    const PointSet& ua = cover[a].members;
    const Section r = restrict_to(space, w.h, u, ua);
    structurally_zero = structurally_zero && r.is_constant();
    const auto pts = gaussian_points(space.dim(ua), n_samples, seed + a);
    max_restricted =
        std::max(max_restricted, max_deviation(r, Section::zero(space.dim(ua), k), pts, 0.0).max_deviation);
    max_g_gap = std::max(max_g_gap, max_deviation(restrict_to(space, base.over(u), u, ua),
                                                  restrict_to(space, perturbed, u, ua), pts, 0.0)
                                        .max_deviation);
  }
  const Vec ones(space.dim(u), 1.0);
  const double h_ones = detail::inf_norm(w.h(ones));
  Vec diff = perturbed(ones);
  const Vec gv = base(ones);
  for (std::size_t t = 0; t < diff.size(); ++t) diff[t] -= gv[t];
  const double global_gap = detail::inf_norm(diff);

  auto& r = w.report;
  r.claim = std::move(claim);
  r.seed = seed;
  r.inputs = {{"cover", to_json(cover)}, {"k", k}, {"samples", n_samples}};
  r.measured = {{"max_restricted_deviation", max_restricted},
                {"restrictions_fold_to_zero", structurally_zero},
                {"h_at_ones_inf_norm", h_ones},
                {"max_restricted_gap_g_vs_g_plus_h", max_g_gap},
                {"global_gap_at_ones", global_gap}};
  r.verdict = max_restricted == 0.0 && h_ones == 1.0 && max_g_gap <= tol && std::abs(global_gap - 1.0) <= tol;
  return w;
}

// ---------------------------------------------------------------------------
// Surjectivity failure (separability surrogate)

/// Random sum over the elements of sections g_a o res_{U,U_a}; each g_a mixes
/// an affine map, a tanh and a product of two of its coordinates.
inline Section random_separable_section(const MarkedSpace& space, const std::vector<PointSet>& elements,
                                        const PointSet& u, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Section> parts;
  for (const auto& e : elements) {
    const std::size_t d = space.dim(e);
    if (d == 0) continue;
    Matrix w(k, d);
    for (auto& v : w.data) v = normal(rng);
    Vec b(k);
    for (auto& v : b) v = normal(rng);
    const Section y = Section::identity(d);
    Section g = activate("tanh", affine(w, b, y));
    std::uniform_int_distribution<std::size_t> pick(0, d - 1);
    const long i = static_cast<long>(pick(rng)), j = static_cast<long>(pick(rng));
    const Section mono = product({Section::coordinates(d, std::vector<long>(k, i)),
                                  Section::coordinates(d, std::vector<long>(k, j))});
    g = g + scaled(mono, normal(rng));
    parts.push_back(extend_to(space, g.over(e), e, u));
  }
  if (parts.empty()) return Section::zero(space.dim(u), k).over(u);
  return sum(parts).over(u);
}

/// Mixed difference of the product counterexample across a coordinate pair
/// that no element covers jointly, against `n_controls` separable sections.
inline WitnessReport surjectivity_witness(const Cover& cover, std::size_t k, std::size_t n_controls = 50,
                                          double tol = 1e-12, std::uint64_t seed = 0) {
  const auto& space = cover.space();
  const PointSet u = cover.covered();
  const auto pair = detail::uncovered_pair(cover.memberships(), u);
  if (!pair) throw PreconditionFailed("every pair of points lies in a common cover element");
  const std::size_t ci = space.offset(pair->first);
  const std::size_t cj = space.offset(pair->second);
  const auto coords = space.coordinates(u);
  const std::size_t li = static_cast<std::size_t>(std::find(coords.begin(), coords.end(), ci) - coords.begin());
  const std::size_t lj = static_cast<std::size_t>(std::find(coords.begin(), coords.end(), cj) - coords.begin());

  const Section h = product_counterexample(space, u, k);
  Vec base(space.dim(u), 1.0);
  base[li] = 0.0;
  base[lj] = 0.0;
  const double product_md = detail::inf_norm(mixed_difference(h, li, lj, base, 1.0));

  double control_md = 0.0;
  const auto bases = gaussian_points(space.dim(u), n_controls, seed ^ 0x5eedULL);
  for (std::size_t c = 0; c < n_controls; ++c) {
    const Section g = random_separable_section(space, cover.memberships(), u, k, seed + c);
    control_md = std::max(control_md, detail::inf_norm(mixed_difference(g, li, lj, bases[c], 1.0)));
  }

  WitnessReport r;
  r.claim = "prop2.8-surjectivity";
  r.seed = seed;
  r.inputs = {{"cover", to_json(cover)}, {"k", k}, {"controls", n_controls}};
  r.measured = {{"point_pair", {pair->first + 1, pair->second + 1}},
                {"product_mixed_difference", product_md},
                {"max_separable_mixed_difference", control_md}};
  r.verdict = product_md == 1.0 && control_md <= tol;
  return r;
}

// ---------------------------------------------------------------------------
// Gluing by inclusion-exclusion

/// Largest deviation between f_a and f_b restricted to U_a n U_b, over
/// Gaussian samples and the all-ones probe.
inline double overlap_deviation(const MarkedSpace& space, const Section& fa, const PointSet& ua, const Section& fb,
                                const PointSet& ub, std::size_t n_samples, std::uint64_t seed) {
  const PointSet w = ua & ub;
  auto pts = gaussian_points(space.dim(w), n_samples, seed);
  pts.push_back(Vec(space.dim(w), 1.0));
  return max_deviation(restrict_to(space, fa, ua, w), restrict_to(space, fb, ub, w), pts, 0.0).max_deviation;
}

/// Glues a compatible family into f = sum over nonempty index sets S of
/// (-1)^{|S|+1} f_S o res_{U, faces(S)}, with f_S the common restriction of
/// the family to faces(S). Throws IncompatibleLocals on the first pair that
/// disagrees on its overlap.
inline Section glue_inclusion_exclusion(const Cover& cover, const std::vector<Section>& locals,
                                        std::size_t n_samples = 100, double tol = 1e-9, std::uint64_t seed = 0) {
  const auto& space = cover.space();
  if (locals.size() != cover.size()) throw InvalidInput("gluing needs one local section per cover element");
  const std::size_t k = locals.front().dim_out();
  for (std::size_t a = 0; a < locals.size(); ++a)
    if (locals[a].dim_in() != space.dim(cover[a].members) || locals[a].dim_out() != k)
      throw InvalidInput("local section " + std::to_string(a) + " has the wrong shape");

  for (std::size_t a = 0; a < cover.size(); ++a)
    for (std::size_t b = a + 1; b < cover.size(); ++b) {
      const double dev = overlap_deviation(space, locals[a], cover[a].members, locals[b], cover[b].members,
                                           n_samples, seed + a * cover.size() + b);
      if (dev > tol) throw IncompatibleLocals(a, b, dev);
    }

  const PointSet u = cover.covered();
  const Nerve nv = nerve(cover, cover.size());
  std::vector<Section> terms;
  for (const auto& [simplex, face] : nv.faces()) {
    const std::size_t first = simplex.front();
    const Section fs = restrict_to(space, locals[first], cover[first].members, face);
    const Section ext = extend_to(space, fs, face, u);
    terms.push_back(simplex.size() % 2 == 1 ? ext : scaled(ext, -1.0));
  }
  return simplify(sum(terms)).over(u);
}

// ---------------------------------------------------------------------------
// Cosheaf kernel decomposition

/// Pairwise family f_{a,b}, stored in global coordinates, with only the
/// nonzero entries kept.
struct KernelDecomposition {
  std::map<std::pair<std::size_t, std::size_t>, PolyVec> family;
  std::size_t n_elements = 0;
  std::size_t k = 0;
  std::size_t n_vars = 0;

  PolyVec entry(std::size_t a, std::size_t b) const {
    auto it = family.find({a, b});
    return it == family.end() ? PolyVec(k, Polynomial(n_vars)) : it->second;
  }

  /// sum_b f_{a,b}
  PolyVec reconstruct(std::size_t a) const {
    PolyVec out(k, Polynomial(n_vars));
    for (std::size_t b = 0; b < n_elements; ++b) {
      const PolyVec e = entry(a, b);
      for (std::size_t t = 0; t < k; ++t) out[t] += e[t];
    }
    return out;
  }

  bool antisymmetric() const {
    for (const auto& [ab, p] : family) {
      const PolyVec q = entry(ab.second, ab.first);
      for (std::size_t t = 0; t < k; ++t)
        if (!(p[t] + q[t]).is_zero()) return false;
    }
    return true;
  }

  /// f_{a,b} as a section over U_a n U_b.
  Section section(const Cover& cover, std::size_t a, std::size_t b) const {
    const PointSet w = cover[a].members & cover[b].members;
    return from_polynomials(to_local(cover.space(), w, entry(a, b)), cover.space().dim(w), w);
  }
};

/// Splits a polynomial family with sum_a f_a o res = 0 into pairwise pieces
/// f_{a,b} = -f_{b,a} supported on U_a n U_b with f_a = sum_b f_{a,b}.
inline KernelDecomposition cosheaf_kernel_decompose(const Cover& cover, const std::vector<Section>& locals) {
  const auto& space = cover.space();
  if (locals.size() != cover.size()) throw InvalidInput("decomposition needs one local section per cover element");
  const std::size_t n = space.total_dim();
  const std::size_t k = locals.front().dim_out();

  std::vector<PolyVec> global;
  for (std::size_t a = 0; a < locals.size(); ++a) {
    if (locals[a].dim_in() != space.dim(cover[a].members) || locals[a].dim_out() != k)
      throw InvalidInput("local section " + std::to_string(a) + " has the wrong shape");
    global.push_back(to_global(space, cover[a].members, to_polynomials(locals[a])));
  }

  // Each monomial must live on some pairwise intersection.
  for (std::size_t a = 0; a < global.size(); ++a)
    for (const auto& comp : global[a])
      for (const auto& [e, c] : comp.terms()) {
        const PointSet supp = monomial_support(space, e);
        bool placed = false;
        for (std::size_t b = 0; b < cover.size() && !placed; ++b)
          placed = b != a && supp.subset_of(cover[a].members & cover[b].members);
        if (!placed)
          throw DecompositionFailed(a, "monomial of local section " + std::to_string(a) + " supported on " +
                                           supp.to_string() + " lies in no pairwise intersection");
      }

  for (std::size_t t = 0; t < k; ++t) {
    Polynomial total(n);
    for (const auto& g : global) total += g[t];
    if (!total.is_zero())
      throw DecompositionFailed(0, "locals do not sum to zero: residual " + total.to_string());
  }

  KernelDecomposition out;
  out.n_elements = cover.size();
  out.k = k;
  out.n_vars = n;
  // For each monomial, chain the elements carrying it: the piece sent from
  // a_t to a_{t+1} is the running coefficient sum c_1 + ... + c_t.
  for (std::size_t t = 0; t < k; ++t) {
    std::map<Exponents, std::vector<std::pair<std::size_t, Rational>>> carriers;
    for (std::size_t a = 0; a < global.size(); ++a)
      for (const auto& [e, c] : global[a][t].terms()) carriers[e].emplace_back(a, c);
    for (const auto& [e, list] : carriers) {
      Rational running = 0;
      for (std::size_t i = 0; i + 1 < list.size(); ++i) {
        running += list[i].second;
        if (running == 0) continue;
        const std::size_t a = list[i].first, b = list[i + 1].first;
        for (auto [x, y, s] : {std::tuple{a, b, Rational(running)}, std::tuple{b, a, Rational(-running)}}) {
          auto& slot = out.family[{x, y}];
          if (slot.empty()) slot.assign(k, Polynomial(n));
          slot[t].add_term(e, s);
        }
      }
    }
  }
  for (auto it = out.family.begin(); it != out.family.end();) {
    const bool zero = std::all_of(it->second.begin(), it->second.end(), [](const Polynomial& p) { return p.is_zero(); });
    it = zero ? out.family.erase(it) : std::next(it);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seeded families for the gluing and decomposition witnesses

/// Random polynomial map R^{n_vars} -> R^k with `n_terms` monomials per
/// component of total degree <= `degree`. Coefficients are small dyadic
/// rationals, exact in double.
inline PolyVec random_polynomials(std::size_t n_vars, std::size_t k, std::size_t degree, std::size_t n_terms,
                                  std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coeff(-3, 3), shift(0, 2);
  std::uniform_int_distribution<std::size_t> var(0, n_vars == 0 ? 0 : n_vars - 1), deg(0, degree);
  PolyVec out(k, Polynomial(n_vars));
  for (auto& p : out)
    for (std::size_t i = 0; i < n_terms; ++i) {
      Exponents e(n_vars, 0);
      if (n_vars > 0)
        for (std::size_t d = deg(rng); d > 0; --d) ++e[var(rng)];
      int c = coeff(rng);
      if (c == 0) c = 1;
      p.add_term(std::move(e), Rational(c) / Rational(1 << shift(rng)));
    }
  return out;
}

/// Glues `n_families` seeded compatible families (restrictions of random
/// global polynomial sections, alternating degree 1 and 3) and checks that
/// restricting the glued section gives back every local. Then breaks one
/// local by a constant and checks the rejection names the first pair.
inline WitnessReport glue_witness(const Cover& cover, std::size_t k, std::size_t n_families = 100,
                                  double tol = 1e-9, std::uint64_t seed = 0) {
  const auto& space = cover.space();
  const PointSet u = cover.covered();
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t f = 0; f < n_families; ++f) {
    const std::size_t degree = f % 2 == 0 ? 1 : 3;
    const Section g = from_polynomials(random_polynomials(space.dim(u), k, degree, 4, rng), space.dim(u), u);
    std::vector<Section> locals;
    for (const auto& e : cover.elements()) locals.push_back(restrict_to(space, g, u, e.members));
    const Section glued = glue_inclusion_exclusion(cover, locals, 20, tol, seed + f);
    for (std::size_t a = 0; a < cover.size(); ++a) {
      const PointSet& ua = cover[a].members;
      auto pts = gaussian_points(space.dim(ua), 20, seed + f * 131 + a);
      pts.push_back(Vec(space.dim(ua), 1.0));
      worst = std::max(worst, max_deviation(restrict_to(space, glued, u, ua), locals[a], pts, 0.0).max_deviation);
    }
  }

  json rejection = nullptr;
  bool rejected_correctly = true;
  if (cover.size() >= 2) {
    const Section g = from_polynomials(random_polynomials(space.dim(u), k, 1, 3, rng), space.dim(u), u);
    std::vector<Section> locals;
    for (const auto& e : cover.elements()) locals.push_back(restrict_to(space, g, u, e.members));
    const std::size_t broken = std::uniform_int_distribution<std::size_t>(0, cover.size() - 1)(rng);
    locals[broken] = locals[broken] + Section::constant(space.dim(cover[broken].members), Vec(k, 1.0));
    // A constant offset is visible on every overlap, the empty one included.
    const std::pair<std::size_t, std::size_t> expected = broken == 0 ? std::pair<std::size_t, std::size_t>{0, 1}
                                                                      : std::pair<std::size_t, std::size_t>{0, broken};
    rejected_correctly = false;
    try {
      glue_inclusion_exclusion(cover, locals, 20, tol, seed);
      rejection = {{"rejected", false}, {"broken_element", broken + 1}};
    } catch (const IncompatibleLocals& e) {
      const auto pair = e.offending_pair();
      rejected_correctly = pair == expected;
      rejection = {{"rejected", true},
                   {"broken_element", broken + 1},
                   {"offending_pair", {pair.first + 1, pair.second + 1}},
                   {"expected_pair", {expected.first + 1, expected.second + 1}},
                   {"deviation", e.deviation()}};
    }
  }

  WitnessReport r;
  r.claim = "rem2.9-glue";
  r.seed = seed;
  r.inputs = {{"cover", to_json(cover)}, {"k", k}, {"families", n_families}};
  r.measured = {{"max_restricted_deviation", worst}, {"incompatible", rejection}};
  r.verdict = worst <= tol && rejected_correctly;
  return r;
}

/// Pairwise-generated families: for random overlapping pairs (a, b) a random
/// polynomial p on U_a n U_b is added to f_a and subtracted from f_b, so the
/// family sums to zero. Each family is decomposed and checked exactly.
inline WitnessReport kernel_witness(const Cover& cover, std::size_t k, std::size_t n_families = 50,
                                    std::uint64_t seed = 0) {
  const auto& space = cover.space();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < cover.size(); ++a)
    for (std::size_t b = a + 1; b < cover.size(); ++b)
      if (!(cover[a].members & cover[b].members).empty()) pairs.emplace_back(a, b);
  if (pairs.empty()) throw PreconditionFailed("no two cover elements overlap");

  const std::size_t n = space.total_dim();
  std::mt19937_64 rng(seed);
  std::size_t reconstructed = 0, antisymmetric = 0, supported = 0, zero_sum = 0;
  for (std::size_t f = 0; f < n_families; ++f) {
    std::vector<PolyVec> global(cover.size(), PolyVec(k, Polynomial(n)));
    const std::size_t n_pairs = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    for (std::size_t i = 0; i < n_pairs; ++i) {
      const auto [a, b] = pairs[std::uniform_int_distribution<std::size_t>(0, pairs.size() - 1)(rng)];
      const PointSet w = cover[a].members & cover[b].members;
      const PolyVec p = to_global(space, w, random_polynomials(space.dim(w), k, 2, 3, rng));
      for (std::size_t t = 0; t < k; ++t) {
        global[a][t] += p[t];
        global[b][t] -= p[t];
      }
    }
    std::vector<Section> locals;
    for (std::size_t a = 0; a < cover.size(); ++a) {
      const PointSet& ua = cover[a].members;
      locals.push_back(from_polynomials(to_local(space, ua, global[a]), space.dim(ua), ua));
    }
    const KernelDecomposition d = cosheaf_kernel_decompose(cover, locals);

    bool rec = true, supp = true;
    PolyVec total(k, Polynomial(n));
    for (std::size_t a = 0; a < cover.size(); ++a) {
      const PolyVec r = d.reconstruct(a);
      for (std::size_t t = 0; t < k; ++t) {
        rec = rec && r[t] == global[a][t];
        total[t] += r[t];
      }
    }
    for (const auto& [ab, p] : d.family) {
      const PointSet w = cover[ab.first].members & cover[ab.second].members;
      for (const auto& comp : p)
        for (const auto& [e, c] : comp.terms()) supp = supp && monomial_support(space, e).subset_of(w);
    }
    reconstructed += rec;
    supported += supp;
    antisymmetric += d.antisymmetric();
    zero_sum += std::all_of(total.begin(), total.end(), [](const Polynomial& p) { return p.is_zero(); });
  }

  WitnessReport r;
  r.claim = "rem2.9-kernel";
  r.seed = seed;
  r.inputs = {{"cover", to_json(cover)}, {"k", k}, {"families", n_families}};
  r.measured = {{"reconstructed_exactly", reconstructed},
                {"antisymmetric", antisymmetric},
                {"supported_on_overlaps", supported},
                {"sum_is_zero", zero_sum}};
  r.verdict = reconstructed == n_families && antisymmetric == n_families && supported == n_families &&
              zero_sum == n_families;
  return r;
}

// ---------------------------------------------------------------------------
// Adversarial attack

enum class AttackMode { sparse, dense };

struct AttackSpec {
  std::size_t layer = 0;
  std::vector<Vec> m;                   ///< one offset per input element of the layer
  std::vector<std::vector<BigInt>> exact;  ///< the same offsets as exact integers
  double p = 2.0;
  double delta = 1.0;
  double displacement = 0.0;
};

struct AttackResult {
  AttackSpec spec;
  WitnessReport report;
};

/// (sum_a ||m_a||_p^p)^{1/p}
inline double attack_displacement(const std::vector<Vec>& m, double p) {
  double acc = 0.0;
  for (const auto& v : m)
    for (double x : v) acc += std::pow(std::abs(x), p);
  return std::pow(acc, 1.0 / p);
}

/// Incidence of layer `j` tensored with the identity on its output values:
/// row (b, t) picks coordinate t of every input aggregated into b.
inline IntMatrix aggregation_incidence(const Network& net, std::size_t j) {
  const Layer& l = net.layer(j);
  const std::size_t n_in = net.covers()[j].size();
  const std::size_t k = l.out_dim;
  IntMatrix m(l.aggregation.size() * k, n_in * k);
  for (std::size_t b = 0; b < l.aggregation.size(); ++b)
    for (auto a : l.aggregation[b])
      for (std::size_t t = 0; t < k; ++t) m(b * k + t, a * k + t) = 1;
  return m;
}

/// Offsets m_a with sum over each output's inputs equal to zero and
/// displacement above `delta`, checked on `n_inputs` random inputs.
inline AttackResult adversarial_attack(const Network& net, std::size_t j, double p, double delta, std::uint64_t seed,
                                       AttackMode mode = AttackMode::sparse, std::size_t n_inputs = 20,
                                       double tol = 1e-9) {
  if (j >= net.n_layers()) throw InvalidInput("attack targets a missing layer");
  if (!(p > 0.0)) throw InvalidInput("attack norm order must be positive");
  if (!(delta > 0.0)) throw InvalidInput("attack threshold must be positive");
  const Layer& l = net.layer(j);
  if (!l.factors_through_inclusion()) throw PreconditionFailed("attacked layer does not factor through inclusion");
  const StageAxioms ax = check_stage_axioms(net.space(), net.covers()[j], net.covers()[j + 1], j + 1);
  if (!ax.strictness) throw PreconditionFailed("attacked layer violates strictness");
  if (!ax.non_triviality) throw PreconditionFailed("attacked layer violates non-triviality");

  const IntMatrix incidence = aggregation_incidence(net, j);
  const auto basis = rational_null_space(incidence);
  const std::size_t k = l.out_dim;
  const std::size_t n_in = net.covers()[j].size();

  AttackResult res;
  auto& spec = res.spec;
  spec.layer = j;
  spec.p = p;
  spec.delta = delta;
  auto& r = res.report;
  r.claim = "thm4.2";
  r.seed = seed;
  r.inputs = {{"layer", j}, {"p", p}, {"delta", delta}, {"mode", mode == AttackMode::sparse ? "sparse" : "dense"},
              {"random_inputs", n_inputs}};
  r.measured["null_space_dim"] = basis.size();
  if (basis.empty()) {
    // Cannot happen under strictness; recorded as a falsification.
    r.measured["falsified"] = true;
    r.verdict = false;
    return res;
  }

  std::mt19937_64 rng(seed);
  std::vector<Rational> combo(incidence.cols);
  if (mode == AttackMode::sparse) {
    std::uniform_int_distribution<std::size_t> pick(0, basis.size() - 1);
    combo = basis[pick(rng)];
  } else {
    std::uniform_int_distribution<int> coef(-3, 3);
    bool nonzero = false;
    while (!nonzero) {
      std::fill(combo.begin(), combo.end(), Rational(0));
      for (const auto& b : basis) {
        const int c = coef(rng);
        for (std::size_t i = 0; i < combo.size(); ++i) combo[i] += b[i] * c;
      }
      nonzero = std::any_of(combo.begin(), combo.end(), [](const Rational& v) { return v != 0; });
    }
  }
  std::vector<BigInt> ints = primitive_integer_vector(combo);
  const auto lead = std::find_if(ints.begin(), ints.end(), [](const BigInt& v) { return v != 0; });
  if (*lead < 0)
    for (auto& v : ints) v = -v;

  std::vector<Vec> unit(n_in, Vec(k));
  for (std::size_t a = 0; a < n_in; ++a)
    for (std::size_t t = 0; t < k; ++t) unit[a][t] = ints[a * k + t].convert_to<double>();
  const double base_norm = attack_displacement(unit, p);
  long scale = static_cast<long>(std::floor(delta / base_norm)) + 1;
  while (static_cast<double>(scale) * base_norm <= delta) ++scale;

  spec.exact.assign(n_in, std::vector<BigInt>(k));
  spec.m.assign(n_in, Vec(k));
  std::vector<Rational> exact_flat(ints.size());
  for (std::size_t a = 0; a < n_in; ++a)
    for (std::size_t t = 0; t < k; ++t) {
      spec.exact[a][t] = ints[a * k + t] * scale;
      spec.m[a][t] = spec.exact[a][t].convert_to<double>();
      exact_flat[a * k + t] = Rational(spec.exact[a][t]);
    }
  spec.displacement = attack_displacement(spec.m, p);
  const auto sums = apply_exact(incidence, exact_flat);
  const bool constraint_exact = std::all_of(sums.begin(), sums.end(), [](const Rational& v) { return v == 0; });

  const Deviation dev = Deviation::zero(net.space());
  const Perturbation perturb{j, spec.m};
  double output_gap = 0.0, rep_gap_error = 0.0;
  for (const auto& x : gaussian_points(net.space().total_dim(), n_inputs, seed ^ 0xa77acULL)) {
    const ForwardResult clean = forward(net, dev, x);
    const ForwardResult attacked = forward(net, dev, x, &perturb);
    for (std::size_t t = 0; t < clean.output.size(); ++t)
      output_gap = std::max(output_gap, std::abs(clean.output[t] - attacked.output[t]));
    std::vector<Vec> diff = attacked.pre_aggregation[j];
    for (std::size_t a = 0; a < diff.size(); ++a)
      for (std::size_t t = 0; t < k; ++t) diff[a][t] -= clean.pre_aggregation[j][a][t];
    rep_gap_error = std::max(rep_gap_error, std::abs(attack_displacement(diff, p) - spec.displacement));
  }

  json m = json::array();
  for (const auto& row : spec.exact) {
    json jr = json::array();
    for (const auto& v : row) jr.push_back(v.convert_to<long long>());
    m.push_back(jr);
  }
  r.measured["m"] = m;
  r.measured["constraint_exact"] = constraint_exact;
  r.measured["displacement"] = spec.displacement;
  r.measured["displacement_exceeds_delta"] = spec.displacement > delta;
  r.measured["max_output_gap"] = output_gap;
  r.measured["max_representation_gap_error"] = rep_gap_error;
  r.verdict = constraint_exact && spec.displacement > delta && output_gap <= tol &&
              rep_gap_error <= tol * std::max(1.0, spec.displacement);
  return res;
}

// ---------------------------------------------------------------------------
// Dataset dependency

enum class DependencyCase { not_surjective, not_open, open_bijective, outside_hypotheses };

inline std::string_view dependency_case_name(DependencyCase c) {
  switch (c) {
    case DependencyCase::not_surjective: return "not-surjective";
    case DependencyCase::not_open: return "not-open";
    case DependencyCase::open_bijective: return "open-bijective";
    case DependencyCase::outside_hypotheses: return "outside-hypotheses";
  }
  return "?";
}

inline DependencyCase classify_activation(const Activation& f) {
  if (!f.traits.surjective) return DependencyCase::not_surjective;
  if (!f.traits.open) return DependencyCase::not_open;
  if (f.traits.bijective) return DependencyCase::open_bijective;
  return DependencyCase::outside_hypotheses;
}

struct DependencyOptions {
  std::size_t grid_side = 100;  ///< grid_side^2 points on a random plane
  double grid_radius = 10.0;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

/// Emits a global section no choice of deviations lets the network reach,
/// according to the case of its final activation, and probes it.
inline WitnessReport dataset_dependency(const Network& net, const DependencyOptions& opt = {}) {
  const Layer& last = net.layers().back();
  if (!last.factors_through_inclusion()) throw PreconditionFailed("last layer does not factor through inclusion");
  const Activation& f = *last.fti().activation;
  if (ActivationRegistry::instance().find(f.name) != &f) throw InvalidInput("unregistered activation '" + f.name + "'");

  const auto& space = net.space();
  const std::size_t dim = space.total_dim();
  const std::size_t k = net.out_dim();
  const DependencyCase c = classify_activation(f);

  WitnessReport r;
  r.claim = "thm4.3";
  r.seed = opt.seed;
  r.inputs = {{"activation", f.name}, {"out_dim", k}};
  r.measured["case"] = dependency_case_name(c);

  if (c == DependencyCase::not_surjective) {
    const double target = std::isfinite(f.traits.range_hi) ? f.traits.range_hi + 1.0 : f.traits.range_lo - 1.0;
    // Grid on the plane spanned by two random directions through the origin.
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec e1(dim), e2(dim);
    for (auto& v : e1) v = normal(rng);
    for (auto& v : e2) v = normal(rng);
    double n1 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) n1 += e1[i] * e1[i];
    for (std::size_t i = 0; i < dim; ++i) n2 += e2[i] * e2[i];
    const Deviation dev = Deviation::zero(space);
    double closest = std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    const std::size_t side = opt.grid_side;
    for (std::size_t a = 0; a < side; ++a)
      for (std::size_t b = 0; b < side; ++b) {
        const double s = side == 1 ? 0.0 : -opt.grid_radius + 2.0 * opt.grid_radius * a / (side - 1.0);
        const double t = side == 1 ? 0.0 : -opt.grid_radius + 2.0 * opt.grid_radius * b / (side - 1.0);
        Vec x(dim);
        for (std::size_t i = 0; i < dim; ++i) x[i] = s * e1[i] / std::sqrt(n1) + t * e2[i] / std::sqrt(n2);
        const Vec out = forward(net, dev, x).output;
        double dist = 0.0;
        for (double v : out) {
          dist = std::max(dist, std::abs(v - target));
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        closest = std::min(closest, dist);
      }
    r.inputs["grid_points"] = side * side;
    r.inputs["grid_radius"] = opt.grid_radius;
    r.measured["target_constant"] = target;
    r.measured["min_output"] = lo;
    r.measured["max_output"] = hi;
    r.measured["closest_approach"] = closest;
    r.measured["note"] = "no counterexample found at the probed resolution";
    r.verdict = closest > opt.tol;
    return r;
  }

  if (c == DependencyCase::open_bijective) {
    // Target F o h, h the product counterexample; F bijective reduces it to
    // asking the pre-activation sum to equal h, which is not separable.
    std::vector<PointSet> last_stage = net.covers()[net.n_layers() - 1].memberships();
    const auto pair = detail::uncovered_pair(last_stage, space.all_points());
    if (!pair) throw PreconditionFailed("every point pair lies in one element of the last aggregated stage");
    const std::size_t i = space.offset(pair->first), j = space.offset(pair->second);
    const Section h = product_counterexample(space, space.all_points(), k);
    Vec base(dim, 1.0);
    base[i] = base[j] = 0.0;
    const double target_md = detail::inf_norm(mixed_difference(h, i, j, base, 1.0));

    const Deviation dev = Deviation::zero(space);
    const std::size_t last_layer = net.n_layers() - 1;
    auto pre = [&](const Vec& x) {
      return forward(net, dev, x).pre_activation[last_layer].front();
    };
    double net_md = 0.0;
    for (const auto& b : gaussian_points(dim, 20, opt.seed)) {
      Vec xij = b, xi = b, xj = b;
      xij[i] += 1.0;
      xij[j] += 1.0;
      xi[i] += 1.0;
      xj[j] += 1.0;
      const Vec a1 = pre(xij), a2 = pre(xi), a3 = pre(xj), a4 = pre(b);
      for (std::size_t t = 0; t < k; ++t) net_md = std::max(net_md, std::abs(a1[t] - a2[t] - a3[t] + a4[t]));
    }
    r.measured["target"] = "activation of the product of all coordinates";
    r.measured["point_pair"] = {pair->first + 1, pair->second + 1};
    r.measured["target_mixed_difference"] = target_md;
    r.measured["max_network_mixed_difference"] = net_md;
    r.verdict = target_md == 1.0 && net_md <= 1e-9;
    return r;
  }

  if (c == DependencyCase::not_open) {
    r.measured["note"] = "right inverse of F is discontinuous; no explicit target is constructed";
    r.verdict = true;
    return r;
  }
  throw PreconditionFailed("activation '" + f.name + "' is an open surjection that is not injective");
}

// ---------------------------------------------------------------------------
// Pooled-feature collision

/// Two inputs differing by a rotation of the cells inside every window of a
/// first max-pooling layer: the pooled features and outputs coincide.
inline WitnessReport pooling_collision(const Network& net, std::uint64_t seed = 0) {
  const Layer& first = net.layer(0);
  const auto* g = std::get_if<General>(&first.kind);
  if (!g || !std::holds_alternative<MaxPool>(g->map)) throw PreconditionFailed("first layer is not max pooling");
  const auto& space = net.space();
  std::vector<std::size_t> seen(space.n_points(), 0);
  for (const auto& agg : first.aggregation)
    for (auto a : agg)
      if (seen[a]++) throw PreconditionFailed("pooling windows overlap");

  const Vec x = gaussian_points(space.total_dim(), 1, seed).front();
  Vec y(x.size());
  for (const auto& agg : first.aggregation)
    for (std::size_t i = 0; i < agg.size(); ++i) {
      const std::size_t from = agg[i], to = agg[(i + 1) % agg.size()];
      for (std::size_t c = 0; c < space.fiber(from); ++c) y[space.offset(to) + c] = x[space.offset(from) + c];
    }

  const Deviation dev = Deviation::zero(space);
  const ForwardResult fx = forward(net, dev, x), fy = forward(net, dev, y);
  double input_gap = 0.0, pooled_gap = 0.0, output_gap = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) input_gap = std::max(input_gap, std::abs(x[i] - y[i]));
  for (std::size_t b = 0; b < fx.stages[1].size(); ++b)
    for (std::size_t t = 0; t < fx.stages[1][b].size(); ++t)
      pooled_gap = std::max(pooled_gap, std::abs(fx.stages[1][b][t] - fy.stages[1][b][t]));
  for (std::size_t t = 0; t < fx.output.size(); ++t)
    output_gap = std::max(output_gap, std::abs(fx.output[t] - fy.output[t]));

  WitnessReport r;
  r.claim = "thm4.1";
  r.seed = seed;
  r.inputs = {{"windows", first.aggregation.size()}};
  r.measured = {{"input_gap", input_gap}, {"pooled_gap", pooled_gap}, {"output_gap", output_gap}};
  r.verdict = input_gap > 0.0 && pooled_gap == 0.0 && output_gap == 0.0;
  return r;
}

}  // namespace sheafnet
