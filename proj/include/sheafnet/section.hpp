#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "sheafnet/activation.hpp"
#include "sheafnet/error.hpp"
#include "sheafnet/matrix.hpp"
#include "sheafnet/point_set.hpp"
#include "sheafnet/topology.hpp"

namespace sheafnet {

// Node kinds of a section's expression DAG. Every node yields a vector; the
// arguments of a node always have smaller ids, so id order is a topological
// order.

/// Selects input coordinates; a negative source yields a constant 0.
struct InputNode {
  std::vector<long> source;
};
struct ConstantNode {
  Vec values;
};
/// weights * arg + bias
struct AffineNode {
  Matrix weights;
  Vec bias;
  std::size_t arg = 0;
};
struct ActivationNode {
  const Activation* fn = nullptr;
  std::size_t arg = 0;
};
/// Coordinatewise product of equally sized arguments.
struct ProductNode {
  std::vector<std::size_t> args;
};
struct SumNode {
  std::vector<std::size_t> args;
};
struct MaxNode {
  std::vector<std::size_t> args;
};
struct ConcatNode {
  std::vector<std::size_t> args;
};

using NodeOp = std::variant<InputNode, ConstantNode, AffineNode, ActivationNode, ProductNode, SumNode, MaxNode,
                            ConcatNode>;

struct Node {
  NodeOp op;
  std::size_t dim = 0;
};

class Section;

/// Incrementally assembles a DAG over a fixed input dimension.
class DagBuilder {
 public:
  explicit DagBuilder(std::size_t dim_in) : dim_in_(dim_in) {}

  std::size_t dim_in() const noexcept { return dim_in_; }
  std::size_t dim(std::size_t id) const { return nodes_.at(id).dim; }

  std::size_t add(NodeOp op) {
    const std::size_t d = std::visit([this](const auto& n) { return measure(n); }, op);
    nodes_.push_back(Node{std::move(op), d});
    return nodes_.size() - 1;
  }

  std::size_t input(std::vector<long> source) { return add(InputNode{std::move(source)}); }
  std::size_t input_all() {
    std::vector<long> src(dim_in_);
    for (std::size_t i = 0; i < dim_in_; ++i) src[i] = static_cast<long>(i);
    return input(std::move(src));
  }
  std::size_t constant(Vec values) { return add(ConstantNode{std::move(values)}); }

  /// Copies `s` into this DAG, reading its inputs through `source`
  /// (defaults to the identity); returns the id of its output node.
  std::size_t import(const Section& s, const std::vector<long>* source = nullptr);

  Section finish(std::size_t output, std::optional<PointSet> support = std::nullopt) &&;

 private:
  std::size_t arg_dim(std::size_t id) const {
    if (id >= nodes_.size()) throw InvalidInput("DAG argument refers to a later node");
    return nodes_[id].dim;
  }
  std::size_t same_dims(const std::vector<std::size_t>& args) const {
    if (args.empty()) throw InvalidInput("n-ary node needs at least one argument");
    const std::size_t d = arg_dim(args.front());
    for (auto a : args)
      if (arg_dim(a) != d) throw InvalidInput("n-ary node arguments differ in dimension");
    return d;
  }
  std::size_t measure(const InputNode& n) const {
    for (long s : n.source)
      if (s >= static_cast<long>(dim_in_)) throw InvalidInput("input node index beyond section domain");
    return n.source.size();
  }
  std::size_t measure(const ConstantNode& n) const { return n.values.size(); }
  std::size_t measure(const AffineNode& n) const {
    if (n.weights.cols != arg_dim(n.arg)) throw InvalidInput("affine node weight columns do not match argument");
    if (!n.bias.empty() && n.bias.size() != n.weights.rows) throw InvalidInput("affine node bias has wrong length");
    return n.weights.rows;
  }
  std::size_t measure(const ActivationNode& n) const {
    if (!n.fn) throw InvalidInput("activation node without activation");
    return arg_dim(n.arg);
  }
  std::size_t measure(const ProductNode& n) const { return same_dims(n.args); }
  std::size_t measure(const SumNode& n) const { return same_dims(n.args); }
  std::size_t measure(const MaxNode& n) const { return same_dims(n.args); }
  std::size_t measure(const ConcatNode& n) const {
    std::size_t d = 0;
    for (auto a : n.args) d += arg_dim(a);
    return d;
  }

  std::size_t dim_in_;
  std::vector<Node> nodes_;
};

/// An evaluable function R^{d_U} -> R^k stored as an expression DAG,
/// optionally tagged with the open set U it is a section over.
class Section {
 public:
  Section() : Section(identity(0)) {}

  std::size_t dim_in() const noexcept { return dim_in_; }
  std::size_t dim_out() const { return (*nodes_)[output_].dim; }
  const std::vector<Node>& nodes() const noexcept { return *nodes_; }
  std::size_t output() const noexcept { return output_; }
  const std::optional<PointSet>& support() const noexcept { return support_; }

  /// Same function, tagged as a section over `u`.
  Section over(PointSet u) const {
    Section s = *this;
    s.support_ = std::move(u);
    return s;
  }

  Vec evaluate(std::span<const double> y) const {
    if (y.size() != dim_in_) throw InvalidInput("section evaluated at a point of the wrong dimension");
    const auto& nodes = *nodes_;
    std::vector<Vec> val(nodes.size());
    for (std::size_t i = 0; i <= output_; ++i) val[i] = eval_node(nodes[i], val, y);
    return std::move(val[output_]);
  }
  Vec operator()(std::span<const double> y) const { return evaluate(y); }
  Vec operator()(std::initializer_list<double> y) const { return evaluate(std::span<const double>(y.begin(), y.size())); }

  static Section identity(std::size_t d) {
    DagBuilder b(d);
    const auto out = b.input_all();
    return std::move(b).finish(out);
  }
  static Section coordinates(std::size_t dim_in, std::vector<long> source) {
    DagBuilder b(dim_in);
    const auto out = b.input(std::move(source));
    return std::move(b).finish(out);
  }
  static Section constant(std::size_t dim_in, Vec values) {
    DagBuilder b(dim_in);
    const auto out = b.constant(std::move(values));
    return std::move(b).finish(out);
  }
  static Section zero(std::size_t dim_in, std::size_t dim_out) { return constant(dim_in, Vec(dim_out, 0.0)); }

  bool is_constant() const { return std::holds_alternative<ConstantNode>((*nodes_)[output_].op); }

 private:
  friend class DagBuilder;

  Section(std::size_t dim_in, std::shared_ptr<const std::vector<Node>> nodes, std::size_t output,
          std::optional<PointSet> support)
      : dim_in_(dim_in), nodes_(std::move(nodes)), output_(output), support_(std::move(support)) {}

  static Vec eval_node(const Node& node, const std::vector<Vec>& val, std::span<const double> y) {
    return std::visit(
        [&](const auto& n) -> Vec {
          using T = std::decay_t<decltype(n)>;
          Vec out(node.dim, 0.0);
          if constexpr (std::is_same_v<T, InputNode>) {
            for (std::size_t t = 0; t < out.size(); ++t)
              out[t] = n.source[t] < 0 ? 0.0 : y[static_cast<std::size_t>(n.source[t])];
          } else if constexpr (std::is_same_v<T, ConstantNode>) {
            out = n.values;
          } else if constexpr (std::is_same_v<T, AffineNode>) {
            const Vec& x = val[n.arg];
            for (std::size_t r = 0; r < n.weights.rows; ++r) {
              double acc = 0.0;
              for (std::size_t c = 0; c < n.weights.cols; ++c) acc += n.weights(r, c) * x[c];
              out[r] = n.bias.empty() ? acc : acc + n.bias[r];
            }
          } else if constexpr (std::is_same_v<T, ActivationNode>) {
            const Vec& x = val[n.arg];
            for (std::size_t t = 0; t < out.size(); ++t) out[t] = (*n.fn)(x[t]);
          } else if constexpr (std::is_same_v<T, ProductNode>) {
            out = val[n.args[0]];
            for (std::size_t a = 1; a < n.args.size(); ++a)
              for (std::size_t t = 0; t < out.size(); ++t) out[t] *= val[n.args[a]][t];
          } else if constexpr (std::is_same_v<T, SumNode>) {
            out = val[n.args[0]];
            for (std::size_t a = 1; a < n.args.size(); ++a)
              for (std::size_t t = 0; t < out.size(); ++t) out[t] += val[n.args[a]][t];
          } else if constexpr (std::is_same_v<T, MaxNode>) {
            out = val[n.args[0]];
            for (std::size_t a = 1; a < n.args.size(); ++a)
              for (std::size_t t = 0; t < out.size(); ++t) out[t] = std::max(out[t], val[n.args[a]][t]);
          } else {
            std::size_t pos = 0;
            for (auto a : n.args)
              for (double v : val[a]) out[pos++] = v;
          }
          return out;
        },
        node.op);
  }

  std::size_t dim_in_ = 0;
  std::shared_ptr<const std::vector<Node>> nodes_;
  std::size_t output_ = 0;
  std::optional<PointSet> support_;
};

namespace detail {

template <typename F>
void for_each_arg(const NodeOp& op, F&& f) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, AffineNode> || std::is_same_v<T, ActivationNode>) {
          f(n.arg);
        } else if constexpr (std::is_same_v<T, ProductNode> || std::is_same_v<T, SumNode> ||
                             std::is_same_v<T, MaxNode> || std::is_same_v<T, ConcatNode>) {
          for (auto a : n.args) f(a);
        }
      },
      op);
}

template <typename F>
void remap_args(NodeOp& op, F&& f) {
  std::visit(
      [&](auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, AffineNode> || std::is_same_v<T, ActivationNode>) {
          n.arg = f(n.arg);
        } else if constexpr (std::is_same_v<T, ProductNode> || std::is_same_v<T, SumNode> ||
                             std::is_same_v<T, MaxNode> || std::is_same_v<T, ConcatNode>) {
          for (auto& a : n.args) a = f(a);
        }
      },
      op);
}

}  // namespace detail

inline std::size_t DagBuilder::import(const Section& s, const std::vector<long>* source) {
  if (!source && s.dim_in() != dim_in_) throw InvalidInput("imported section has a different input dimension");
  if (source && source->size() != s.dim_in()) throw InvalidInput("import source map has wrong length");
  const std::size_t base = nodes_.size();
  for (std::size_t i = 0; i <= s.output(); ++i) {
    NodeOp op = s.nodes()[i].op;
    if (auto* in = std::get_if<InputNode>(&op); in && source) {
      for (auto& v : in->source) v = v < 0 ? -1 : (*source)[static_cast<std::size_t>(v)];
    }
    detail::remap_args(op, [base](std::size_t a) { return a + base; });
    add(std::move(op));
  }
  return base + s.output();
}

inline Section DagBuilder::finish(std::size_t output, std::optional<PointSet> support) && {
  if (output >= nodes_.size()) throw InvalidInput("DAG output node does not exist");
  // Keep only nodes reachable from the output.
  std::vector<char> live(nodes_.size(), 0);
  live[output] = 1;
  for (std::size_t i = output + 1; i-- > 0;)
    if (live[i]) detail::for_each_arg(nodes_[i].op, [&](std::size_t a) { live[a] = 1; });
  std::vector<std::size_t> renumber(nodes_.size(), 0);
  auto kept = std::make_shared<std::vector<Node>>();
  for (std::size_t i = 0; i <= output; ++i) {
    if (!live[i]) continue;
    renumber[i] = kept->size();
    Node n = std::move(nodes_[i]);
    detail::remap_args(n.op, [&](std::size_t a) { return renumber[a]; });
    kept->push_back(std::move(n));
  }
  const std::size_t out = kept->size() - 1;
  return Section(dim_in_, std::move(kept), out, std::move(support));
}

// ---------------------------------------------------------------------------
// Combinators

namespace detail {
template <typename NodeT>
Section nary(const std::vector<Section>& args) {
  if (args.empty()) throw InvalidInput("combinator needs at least one section");
  DagBuilder b(args.front().dim_in());
  NodeT node;
  for (const auto& s : args) node.args.push_back(b.import(s));
  const auto out = b.add(std::move(node));
  return std::move(b).finish(out, args.front().support());
}
}  // namespace detail

inline Section affine(Matrix weights, Vec bias, const Section& arg) {
  DagBuilder b(arg.dim_in());
  const auto a = b.import(arg);
  const auto out = b.add(AffineNode{std::move(weights), std::move(bias), a});
  return std::move(b).finish(out, arg.support());
}

inline Section linear(Matrix weights, const Section& arg) { return affine(std::move(weights), {}, arg); }

inline Section activate(const Activation& fn, const Section& arg) {
  DagBuilder b(arg.dim_in());
  const auto a = b.import(arg);
  const auto out = b.add(ActivationNode{&fn, a});
  return std::move(b).finish(out, arg.support());
}
inline Section activate(std::string_view name, const Section& arg) { return activate(activation(name), arg); }

inline Section product(const std::vector<Section>& args) { return detail::nary<ProductNode>(args); }
inline Section sum(const std::vector<Section>& args) { return detail::nary<SumNode>(args); }
inline Section maximum(const std::vector<Section>& args) { return detail::nary<MaxNode>(args); }
inline Section concat(const std::vector<Section>& args) { return detail::nary<ConcatNode>(args); }

inline Section simplify(const Section& s);

/// outer o inner. Input nodes of `outer` become selections from the output
/// of `inner`; the result keeps inner's support.
inline Section compose(const Section& outer, const Section& inner) {
  if (outer.dim_in() != inner.dim_out()) throw InvalidInput("compose: inner codomain differs from outer domain");
  DagBuilder b(inner.dim_in());
  const auto feed = b.import(inner);
  std::vector<std::size_t> id(outer.output() + 1);
  for (std::size_t i = 0; i <= outer.output(); ++i) {
    NodeOp op = outer.nodes()[i].op;
    if (const auto* in = std::get_if<InputNode>(&op)) {
      Matrix sel(in->source.size(), inner.dim_out());
      for (std::size_t t = 0; t < in->source.size(); ++t)
        if (in->source[t] >= 0) sel(t, static_cast<std::size_t>(in->source[t])) = 1.0;
      id[i] = b.add(AffineNode{std::move(sel), {}, feed});
      continue;
    }
    detail::remap_args(op, [&](std::size_t a) { return id[a]; });
    id[i] = b.add(std::move(op));
  }
  return simplify(std::move(b).finish(id[outer.output()], inner.support()));
}

inline Section scaled(const Section& s, double factor) {
  Matrix w(s.dim_out(), s.dim_out());
  for (std::size_t i = 0; i < w.rows; ++i) w(i, i) = factor;
  return linear(std::move(w), s);
}

inline Section operator+(const Section& a, const Section& b) { return sum({a, b}); }
inline Section operator-(const Section& a, const Section& b) { return sum({a, scaled(b, -1.0)}); }

// ---------------------------------------------------------------------------
// Constant folding

/// Folds constant subexpressions and products with an all-zero factor.
inline Section simplify(const Section& s) {
  DagBuilder b(s.dim_in());
  const auto& nodes = s.nodes();
  std::vector<std::size_t> id(nodes.size());
  std::vector<std::optional<Vec>> known(nodes.size());
  const std::vector<double> no_input;

  for (std::size_t i = 0; i <= s.output(); ++i) {
    NodeOp op = nodes[i].op;
    detail::remap_args(op, [&](std::size_t a) { return id[a]; });

    bool all_const = !std::holds_alternative<InputNode>(op);
    bool zero_factor = false;
    detail::for_each_arg(nodes[i].op, [&](std::size_t a) {
      if (!known[a]) {
        all_const = false;
      } else if (std::holds_alternative<ProductNode>(nodes[i].op) &&
                 std::all_of(known[a]->begin(), known[a]->end(), [](double v) { return v == 0.0; })) {
        zero_factor = true;
      }
    });
    if (const auto* in = std::get_if<InputNode>(&op);
        in && std::all_of(in->source.begin(), in->source.end(), [](long v) { return v < 0; })) {
      known[i] = Vec(nodes[i].dim, 0.0);
    } else if (zero_factor) {
      known[i] = Vec(nodes[i].dim, 0.0);
    } else if (all_const) {
      // Evaluate the node on its constant arguments in a scratch DAG.
      DagBuilder scratch(0);
      NodeOp local = nodes[i].op;
      std::vector<std::size_t> local_id(i, 0);
      detail::for_each_arg(nodes[i].op, [&](std::size_t a) { local_id[a] = scratch.constant(*known[a]); });
      detail::remap_args(local, [&](std::size_t a) { return local_id[a]; });
      const auto out = scratch.add(std::move(local));
      known[i] = std::move(scratch).finish(out).evaluate(no_input);
    }

    id[i] = known[i] ? b.constant(*known[i]) : b.add(std::move(op));
  }
  return std::move(b).finish(id[s.output()], s.support());
}

// ---------------------------------------------------------------------------
// Coordinate maps between section spaces

enum class CoordMapKind { projection, zero_pad };

/// Linear map between the coordinate spaces of two nested open sets.
///
/// `gather[t]` names the source coordinate feeding target coordinate t, or
/// -1 when the target coordinate is filled with zero.
struct CoordMap {
  CoordMapKind kind = CoordMapKind::projection;
  PointSet source;
  PointSet target;
  std::size_t source_dim = 0;
  std::vector<long> gather;

  std::size_t target_dim() const noexcept { return gather.size(); }

  /// res_{V,U}: drops the coordinates of points of V outside U.
  static CoordMap projection(const MarkedSpace& space, const PointSet& v, const PointSet& u) {
    if (!u.subset_of(v)) throw InvalidInput("projection needs nested open sets (U inside V)");
    return build(space, CoordMapKind::projection, v, u);
  }

  /// i_{U,V}: pads the coordinates of points of V outside U with zeros.
  static CoordMap zero_pad(const MarkedSpace& space, const PointSet& u, const PointSet& v) {
    if (!u.subset_of(v)) throw InvalidInput("zero padding needs nested open sets (U inside V)");
    return build(space, CoordMapKind::zero_pad, u, v);
  }

  Vec apply(std::span<const double> y) const {
    if (y.size() != source_dim) throw InvalidInput("coordinate map applied to a vector of the wrong dimension");
    Vec out(gather.size(), 0.0);
    for (std::size_t t = 0; t < gather.size(); ++t)
      if (gather[t] >= 0) out[t] = y[static_cast<std::size_t>(gather[t])];
    return out;
  }

 private:
  static CoordMap build(const MarkedSpace& space, CoordMapKind kind, const PointSet& from, const PointSet& to) {
    space.check_subset(from);
    space.check_subset(to);
    CoordMap m;
    m.kind = kind;
    m.source = from;
    m.target = to;
    m.source_dim = space.dim(from);
    // Local offset of each point inside `from`.
    std::vector<long> local(space.n_points(), -1);
    long pos = 0;
    for (auto p : from) {
      local[p] = pos;
      pos += static_cast<long>(space.fiber(p));
    }
    for (auto p : to)
      for (std::size_t c = 0; c < space.fiber(p); ++c)
        m.gather.push_back(local[p] < 0 ? -1 : local[p] + static_cast<long>(c));
    return m;
  }
};

/// s composed with m: a section over m.source whose value at y is s(m(y)).
inline Section compose_coord(const Section& s, const CoordMap& m) {
  if (s.dim_in() != m.target_dim()) throw InvalidInput("compose_coord: section domain does not match map target");
  if (s.support() && *s.support() != m.target)
    throw InvalidInput("compose_coord: section lives over " + s.support()->to_string() + ", map targets " +
                       m.target.to_string());
  DagBuilder b(m.source_dim);
  const auto out = b.import(s, &m.gather);
  return simplify(std::move(b).finish(out, m.source));
}

/// Presheaf restriction f -> f o i_{U,V} of a section over V to U inside V.
inline Section restrict_to(const MarkedSpace& space, const Section& f, const PointSet& v, const PointSet& u) {
  return compose_coord(f.support() ? f : f.over(v), CoordMap::zero_pad(space, u, v));
}

/// Copresheaf inclusion f -> f o res_{V,U} of a section over U into V.
inline Section extend_to(const MarkedSpace& space, const Section& f, const PointSet& u, const PointSet& v) {
  return compose_coord(f.support() ? f : f.over(u), CoordMap::projection(space, v, u));
}

// ---------------------------------------------------------------------------
// Linear sections

/// Element of Hom(R^{d_U}, R^k): a k x d_U matrix.
struct LinearSection {
  Matrix matrix;
  std::optional<PointSet> support;

  Vec evaluate(std::span<const double> y) const { return matrix.apply(y); }

  Section to_section() const {
    DagBuilder b(matrix.cols);
    const auto in = b.input_all();
    const auto out = b.add(AffineNode{matrix, {}, in});
    return std::move(b).finish(out, support);
  }
};

// ---------------------------------------------------------------------------
// The product counterexample and sampling-based checks

/// Section over U whose k outputs all equal the product of its d_U inputs.
inline Section product_counterexample(const MarkedSpace& space, const PointSet& u, std::size_t k) {
  space.check_subset(u);
  const std::size_t d = space.dim(u);
  if (d < 2) throw InvalidInput("product counterexample needs d_U >= 2");
  if (k == 0) throw InvalidInput("product counterexample needs k >= 1");
  DagBuilder b(d);
  ProductNode prod;
  for (std::size_t i = 0; i < d; ++i) prod.args.push_back(b.input({static_cast<long>(i)}));
  const auto p = b.add(std::move(prod));
  const auto out = b.add(ConcatNode{std::vector<std::size_t>(k, p)});
  return std::move(b).finish(out, u);
}

/// `count` points of R^dim with i.i.d. standard normal coordinates.
inline std::vector<Vec> gaussian_points(std::size_t dim, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec> pts(count, Vec(dim));
  for (auto& p : pts)
    for (auto& v : p) v = normal(rng);
  return pts;
}

struct EqualityCheck {
  bool equal = false;
  double max_deviation = 0.0;
  Vec worst_point;
};

/// Max over `points` of ||a(y) - b(y)||_inf.
inline EqualityCheck max_deviation(const Section& a, const Section& b, const std::vector<Vec>& points, double tol) {
  if (a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out())
    throw InvalidInput("compared sections differ in domain or codomain dimension");
  EqualityCheck out;
  for (const auto& y : points) {
    const Vec fa = a(y);
    const Vec fb = b(y);
    for (std::size_t t = 0; t < fa.size(); ++t) {
      const double dev = std::abs(fa[t] - fb[t]);
      if (dev > out.max_deviation || std::isnan(dev)) {
        out.max_deviation = std::isnan(dev) ? std::numeric_limits<double>::infinity() : dev;
        out.worst_point = y;
      }
    }
  }
  out.equal = out.max_deviation <= tol;
  return out;
}

/// Randomized extensional equality at seeded standard-normal points.
inline EqualityCheck sections_equal(const Section& a, const Section& b, std::size_t n_samples = 100,
                                    double tol = 1e-9, std::uint64_t seed = 0) {
  return max_deviation(a, b, gaussian_points(a.dim_in(), n_samples, seed), tol);
}

/// s(base + h e_i + h e_j) - s(base + h e_i) - s(base + h e_j) + s(base).
inline Vec mixed_difference(const Section& s, std::size_t i, std::size_t j, std::span<const double> base, double h) {
  if (i == j) throw InvalidInput("mixed_difference needs two distinct coordinates");
  if (!(h > 0.0)) throw InvalidInput("mixed_difference needs h > 0");
  if (base.size() != s.dim_in() || i >= base.size() || j >= base.size())
    throw InvalidInput("mixed_difference: coordinate or base outside the section domain");
  Vec pij(base.begin(), base.end());
  pij[i] += h;
  pij[j] += h;
  Vec pi(base.begin(), base.end());
  pi[i] += h;
  Vec pj(base.begin(), base.end());
  pj[j] += h;
  const Vec a = s(pij), b = s(pi), c = s(pj), d = s(base);
  Vec out(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) out[t] = a[t] - b[t] - c[t] + d[t];
  return out;
}

}  // namespace sheafnet
