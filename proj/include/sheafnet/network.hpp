#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sheafnet/activation.hpp"
#include "sheafnet/error.hpp"
#include "sheafnet/linalg.hpp"
#include "sheafnet/polynomial.hpp"
#include "sheafnet/section.hpp"
#include "sheafnet/topology.hpp"

namespace sheafnet {

/// Layer of the form F( sum over inputs of phi_a(v_a) ), F coordinatewise.
struct FactorsThroughInclusion {
  std::vector<Section> phi;  ///< one map per input element
  const Activation* activation = nullptr;
};

/// Coordinatewise maximum over the aggregated inputs.
struct MaxPool {};

/// Multi-head dot-product attention. Every input carries [q | k | v] with
/// heads*width entries per block; output beta attends from the query of
/// input `query_of[beta]` over its aggregated inputs.
struct Attention {
  std::size_t heads = 1;
  std::size_t width = 1;
  std::vector<std::size_t> query_of;
};

struct General {
  std::variant<MaxPool, Attention> map;
};

struct Layer {
  std::vector<std::vector<std::size_t>> aggregation;  ///< input indices feeding each output
  std::variant<FactorsThroughInclusion, General> kind;
  std::size_t out_dim = 0;

  bool factors_through_inclusion() const { return std::holds_alternative<FactorsThroughInclusion>(kind); }
  const FactorsThroughInclusion& fti() const {
    if (const auto* f = std::get_if<FactorsThroughInclusion>(&kind)) return *f;
    throw PreconditionFailed("layer does not factor through inclusion");
  }
  std::string kind_name() const {
    if (factors_through_inclusion()) return "factors-through-inclusion";
    return std::holds_alternative<MaxPool>(std::get<General>(kind).map) ? "max-pool" : "attention";
  }
};

/// Softmax weights of one attention head: row beta is a distribution over
/// the inputs aggregated into beta.
inline std::vector<Vec> attention_scores(const Attention& att, const std::vector<std::vector<std::size_t>>& aggregation,
                                         const std::vector<Vec>& inputs, std::size_t head) {
  const std::size_t hw = att.heads * att.width;
  const double scale = 1.0 / std::sqrt(static_cast<double>(att.width));
  std::vector<Vec> rows;
  for (std::size_t b = 0; b < aggregation.size(); ++b) {
    const Vec& q = inputs[att.query_of[b]];
    Vec logits;
    for (auto a : aggregation[b]) {
      const Vec& key = inputs[a];
      double dot = 0.0;
      for (std::size_t t = 0; t < att.width; ++t) dot += q[head * att.width + t] * key[hw + head * att.width + t];
      logits.push_back(dot * scale);
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (auto& l : logits) total += (l = std::exp(l - top));
    for (auto& l : logits) l /= total;
    rows.push_back(std::move(logits));
  }
  return rows;
}

/// A discrete deep learning technique: a cover sequence and one layer per
/// consecutive pair of stages.
class Network {
 public:
  Network(CoverSequence seq, std::vector<Layer> layers) : seq_(std::move(seq)), layers_(std::move(layers)) {
    if (seq_.size() < 2) throw InvalidInput("a network needs at least two stages");
    if (layers_.size() != seq_.size() - 1) throw InvalidInput("a network needs one layer per consecutive stage pair");
    for (std::size_t n = 0; n < layers_.size(); ++n) validate(n);
  }

  const CoverSequence& covers() const noexcept { return seq_; }
  const MarkedSpace& space() const noexcept { return seq_.space(); }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const Layer& layer(std::size_t n) const { return layers_.at(n); }
  std::size_t n_layers() const noexcept { return layers_.size(); }
  std::size_t out_dim() const { return layers_.back().out_dim; }

  /// Value dimension of element `a` of stage `s`.
  std::size_t value_dim(std::size_t s, std::size_t a) const {
    return s == 0 ? space().fiber(a) : layers_.at(s - 1).out_dim;
  }

 private:
  void validate(std::size_t n) const {
    const Layer& l = layers_[n];
    const Cover& in = seq_[n];
    const Cover& out = seq_[n + 1];
    const std::string where = "layer " + std::to_string(n) + ": ";
    if (l.out_dim == 0) throw InvalidInput(where + "output dimension must be positive");
    if (l.aggregation.size() != out.size()) throw InvalidInput(where + "aggregation size differs from output cover");
    for (std::size_t b = 0; b < out.size(); ++b) {
      if (l.aggregation[b].empty()) throw InvalidInput(where + "output " + out[b].id + " aggregates nothing");
      for (auto a : l.aggregation[b]) {
        if (a >= in.size()) throw InvalidInput(where + "aggregation index out of range");
        if (!in[a].members.subset_of(out[b].members))
          throw InvalidInput(where + in[a].id + " is not contained in " + out[b].id);
      }
    }
    if (const auto* f = std::get_if<FactorsThroughInclusion>(&l.kind)) {
      if (!f->activation) throw InvalidInput(where + "missing activation");
      if (f->phi.size() != in.size()) throw InvalidInput(where + "needs one map per input element");
      for (std::size_t a = 0; a < in.size(); ++a) {
        if (f->phi[a].dim_in() != value_dim(n, a) || f->phi[a].dim_out() != l.out_dim)
          throw InvalidInput(where + "map for " + in[a].id + " has the wrong shape");
      }
      return;
    }
    const auto& g = std::get<General>(l.kind);
    if (std::holds_alternative<MaxPool>(g.map)) {
      for (std::size_t a = 0; a < in.size(); ++a)
        if (value_dim(n, a) != l.out_dim) throw InvalidInput(where + "max pooling must preserve dimension");
    } else {
      const auto& att = std::get<Attention>(g.map);
      const std::size_t hw = att.heads * att.width;
      if (hw == 0) throw InvalidInput(where + "attention needs positive heads and width");
      if (l.out_dim != hw) throw InvalidInput(where + "attention output must have heads*width entries");
      if (att.query_of.size() != out.size()) throw InvalidInput(where + "attention needs one query per output");
      for (std::size_t a = 0; a < in.size(); ++a)
        if (value_dim(n, a) != 3 * hw) throw InvalidInput(where + "attention inputs must carry [q|k|v]");
      for (auto q : att.query_of)
        if (q >= in.size()) throw InvalidInput(where + "attention query index out of range");
    }
  }

  CoverSequence seq_;
  std::vector<Layer> layers_;
};

/// Pointwise deviations nu_i : R^{l_i} -> R^{l_i}; stage 0 sees x_i + nu_i(x_i).
struct Deviation {
  std::vector<Section> nu;

  static Deviation zero(const MarkedSpace& space) {
    Deviation d;
    for (std::size_t i = 0; i < space.n_points(); ++i)
      d.nu.push_back(Section::zero(space.fiber(i), space.fiber(i)));
    return d;
  }
  static Deviation constant(const MarkedSpace& space, const std::vector<Vec>& offsets) {
    if (offsets.size() != space.n_points()) throw InvalidInput("deviation needs one offset per marked point");
    Deviation d;
    for (std::size_t i = 0; i < space.n_points(); ++i) d.nu.push_back(Section::constant(space.fiber(i), offsets[i]));
    return d;
  }

  void check(const MarkedSpace& space) const {
    if (nu.size() != space.n_points()) throw InvalidInput("deviation needs one map per marked point");
    for (std::size_t i = 0; i < nu.size(); ++i)
      if (nu[i].dim_in() != space.fiber(i) || nu[i].dim_out() != space.fiber(i))
        throw InvalidInput("deviation map " + std::to_string(i + 1) + " has the wrong shape");
  }
};

/// Offsets added to the phi outputs of one factoring layer.
struct Perturbation {
  std::size_t layer = 0;
  std::vector<Vec> offsets;  ///< one per input element of that layer
};

struct ForwardResult {
  Vec output;
  std::vector<std::vector<Vec>> stages;           ///< value of every element of every stage
  std::vector<std::vector<Vec>> pre_aggregation;  ///< per layer: phi_a(v_a) (+ offset); empty for general layers
  std::vector<std::vector<Vec>> pre_activation;   ///< per layer: aggregated sums before F; empty for general layers
};

namespace detail {

inline std::vector<Vec> apply_general(const Layer& l, const General& g, const std::vector<Vec>& in) {
  std::vector<Vec> out(l.aggregation.size());
  if (std::holds_alternative<MaxPool>(g.map)) {
    for (std::size_t b = 0; b < out.size(); ++b) {
      out[b] = in[l.aggregation[b].front()];
      for (auto a : l.aggregation[b])
        for (std::size_t t = 0; t < out[b].size(); ++t) out[b][t] = std::max(out[b][t], in[a][t]);
    }
    return out;
  }
  const auto& att = std::get<Attention>(g.map);
  const std::size_t hw = att.heads * att.width;
  for (auto& o : out) o.assign(hw, 0.0);
  for (std::size_t h = 0; h < att.heads; ++h) {
    const auto scores = attention_scores(att, l.aggregation, in, h);
    for (std::size_t b = 0; b < out.size(); ++b)
      for (std::size_t i = 0; i < l.aggregation[b].size(); ++i) {
        const Vec& v = in[l.aggregation[b][i]];
        for (std::size_t t = 0; t < att.width; ++t)
          out[b][h * att.width + t] += scores[b][i] * v[2 * hw + h * att.width + t];
      }
  }
  return out;
}

}  // namespace detail

/// Stage-0 values x_i + nu_i(x_i) for a global input x.
inline std::vector<Vec> stage_zero(const Network& net, const Deviation& dev, std::span<const double> x) {
  const auto& space = net.space();
  if (x.size() != space.total_dim()) throw InvalidInput("forward: input dimension differs from sum of fiber dims");
  dev.check(space);
  std::vector<Vec> values;
  for (std::size_t i = 0; i < space.n_points(); ++i) {
    Vec xi(x.begin() + static_cast<std::ptrdiff_t>(space.offset(i)),
           x.begin() + static_cast<std::ptrdiff_t>(space.offset(i) + space.fiber(i)));
    const Vec shift = dev.nu[i](xi);
    for (std::size_t c = 0; c < xi.size(); ++c) xi[c] += shift[c];
    values.push_back(std::move(xi));
  }
  return values;
}

/// Applies layer `n` to the values of stage n; fills the optional traces.
inline std::vector<Vec> apply_layer(const Network& net, std::size_t n, const std::vector<Vec>& in,
                                    const Perturbation* perturb = nullptr, std::vector<Vec>* pre_agg = nullptr,
                                    std::vector<Vec>* pre_act = nullptr) {
  const Layer& l = net.layer(n);
  if (perturb && perturb->layer == n && !l.factors_through_inclusion())
    throw PreconditionFailed("perturbations apply only to factoring layers");
  if (const auto* g = std::get_if<General>(&l.kind)) return detail::apply_general(l, *g, in);

  const auto& f = std::get<FactorsThroughInclusion>(l.kind);
  std::vector<Vec> mapped(in.size());
  for (std::size_t a = 0; a < in.size(); ++a) mapped[a] = f.phi[a](in[a]);
  if (perturb && perturb->layer == n) {
    if (perturb->offsets.size() != in.size()) throw InvalidInput("perturbation needs one offset per input element");
    for (std::size_t a = 0; a < in.size(); ++a) {
      if (perturb->offsets[a].size() != l.out_dim) throw InvalidInput("perturbation offset has the wrong dimension");
      for (std::size_t t = 0; t < l.out_dim; ++t) mapped[a][t] += perturb->offsets[a][t];
    }
  }
  std::vector<Vec> sums(l.aggregation.size(), Vec(l.out_dim, 0.0));
  for (std::size_t b = 0; b < sums.size(); ++b)
    for (auto a : l.aggregation[b])
      for (std::size_t t = 0; t < l.out_dim; ++t) sums[b][t] += mapped[a][t];
  std::vector<Vec> out = sums;
  for (auto& v : out)
    for (auto& t : v) t = (*f.activation)(t);
  if (pre_agg) *pre_agg = std::move(mapped);
  if (pre_act) *pre_act = std::move(sums);
  return out;
}

inline ForwardResult forward(const Network& net, const Deviation& dev, std::span<const double> x,
                             const Perturbation* perturb = nullptr) {
  if (perturb && perturb->layer >= net.n_layers()) throw InvalidInput("perturbation targets a missing layer");
  ForwardResult r;
  r.stages.push_back(stage_zero(net, dev, x));
  r.pre_aggregation.resize(net.n_layers());
  r.pre_activation.resize(net.n_layers());
  for (std::size_t n = 0; n < net.n_layers(); ++n)
    r.stages.push_back(apply_layer(net, n, r.stages.back(), perturb, &r.pre_aggregation[n], &r.pre_activation[n]));
  r.output = r.stages.back().front();
  return r;
}

inline Vec forward_output(const Network& net, std::span<const double> x) {
  return forward(net, Deviation::zero(net.space()), x).output;
}

// ---------------------------------------------------------------------------
// Section form of a network

/// Every stage value as a section over its open set, built by extending
/// through the projection maps. Attention layers have no section form.
inline std::vector<std::vector<Section>> stage_sections(const Network& net, const Deviation& dev) {
  const auto& space = net.space();
  dev.check(space);
  std::vector<std::vector<Section>> out(1);
  for (std::size_t i = 0; i < space.n_points(); ++i)
    out[0].push_back((Section::identity(space.fiber(i)) + dev.nu[i]).over(PointSet{i}));

  for (std::size_t n = 0; n < net.n_layers(); ++n) {
    const Layer& l = net.layer(n);
    const Cover& in = net.covers()[n];
    const Cover& next = net.covers()[n + 1];
    const auto* fti = std::get_if<FactorsThroughInclusion>(&l.kind);
    if (!fti && std::holds_alternative<Attention>(std::get<General>(l.kind).map))
      throw PreconditionFailed("attention layers have no section form");
    std::vector<Section> stage;
    for (std::size_t b = 0; b < next.size(); ++b) {
      std::vector<Section> parts;
      for (auto a : l.aggregation[b]) {
        Section local = fti ? compose(fti->phi[a], out[n][a]) : out[n][a];
        parts.push_back(extend_to(space, local, in[a].members, next[b].members));
      }
      Section s = fti ? activate(*fti->activation, sum(parts)) : maximum(parts);
      stage.push_back(simplify(s).over(next[b].members));
    }
    out.push_back(std::move(stage));
  }
  return out;
}

/// The network output as one global section.
inline Section global_section(const Network& net, const Deviation& dev) { return stage_sections(net, dev).back()[0]; }

/// End-to-end matrix of a network whose maps are all linear with identity
/// activations; throws if the network is not linear.
inline Matrix linear_matrix(const Network& net) {
  const Section g = global_section(net, Deviation::zero(net.space()));
  const PolyVec p = to_polynomials(g);
  const std::size_t d = net.space().total_dim();
  Matrix m(p.size(), d);
  for (std::size_t r = 0; r < p.size(); ++r)
    for (const auto& [e, c] : p[r].terms()) {
      unsigned degree = 0;
      std::size_t var = 0;
      for (std::size_t v = 0; v < e.size(); ++v)
        if (e[v] > 0) {
          degree += e[v];
          var = v;
        }
      if (degree != 1) throw PreconditionFailed("network is not linear");
      m(r, var) = c.convert_to<double>();
    }
  return m;
}

// ---------------------------------------------------------------------------
// Factorization check

struct FactorsReport {
  bool applicable = false;      ///< layer is of the factoring kind
  bool agrees = false;          ///< both evaluation paths agree within tol
  double max_deviation = 0.0;
  double affine_fit_residual = 0.0;  ///< general layers: RMS residual of the best sum-of-affine fit
};

/// For a factoring layer, compares the direct layer evaluation with the
/// composite F o sum_a i_{U_a,U_b} o prod_a phi_a, realized on a space whose
/// points are the layer's input elements. For a general layer, fits each
/// output coordinate by a sum of affine maps of the inputs and reports the
/// least-squares residual.
inline FactorsReport factors_check(const Network& net, std::size_t n, std::size_t n_samples = 100, double tol = 1e-9,
                                   std::uint64_t seed = 0) {
  const Layer& l = net.layer(n);
  const Cover& in = net.covers()[n];
  const auto xs = gaussian_points(net.space().total_dim(), n_samples, seed);
  const Deviation dev = Deviation::zero(net.space());
  std::vector<std::vector<Vec>> inputs;
  for (const auto& x : xs) inputs.push_back(forward(net, dev, x).stages[n]);

  FactorsReport rep;
  if (const auto* f = std::get_if<FactorsThroughInclusion>(&l.kind)) {
    rep.applicable = true;
    std::vector<std::size_t> fibers;
    for (std::size_t a = 0; a < in.size(); ++a) fibers.push_back(net.value_dim(n, a));
    const MarkedSpace value_space(fibers);
    for (std::size_t b = 0; b < l.aggregation.size(); ++b) {
      const PointSet block(l.aggregation[b]);
      std::vector<Section> parts;
      for (auto a : block) parts.push_back(extend_to(value_space, f->phi[a].over(PointSet{a}), PointSet{a}, block));
      const Section composite = activate(*f->activation, sum(parts));
      for (const auto& vals : inputs) {
        Vec y;
        for (auto a : block) y.insert(y.end(), vals[a].begin(), vals[a].end());
        const Vec direct = apply_layer(net, n, vals)[b];
        const Vec via = composite(y);
        for (std::size_t t = 0; t < direct.size(); ++t)
          rep.max_deviation = std::max(rep.max_deviation, std::abs(direct[t] - via[t]));
      }
    }
    rep.agrees = rep.max_deviation <= tol;
    return rep;
  }

  for (std::size_t b = 0; b < l.aggregation.size(); ++b) {
    std::size_t cols = 1;
    for (auto a : l.aggregation[b]) cols += inputs.front()[a].size();
    Eigen::MatrixXd design(static_cast<Eigen::Index>(inputs.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      Eigen::Index c = 0;
      for (auto a : l.aggregation[b])
        for (double v : inputs[s][a]) design(static_cast<Eigen::Index>(s), c++) = v;
      design(static_cast<Eigen::Index>(s), c) = 1.0;
    }
    for (std::size_t t = 0; t < l.out_dim; ++t) {
      Eigen::VectorXd target(static_cast<Eigen::Index>(inputs.size()));
      for (std::size_t s = 0; s < inputs.size(); ++s)
        target(static_cast<Eigen::Index>(s)) = apply_layer(net, n, inputs[s])[b][t];
      const double rms = least_squares_residual(design, target) / std::sqrt(static_cast<double>(inputs.size()));
      rep.affine_fit_residual = std::max(rep.affine_fit_residual, rms);
    }
  }
  return rep;
}

}  // namespace sheafnet
