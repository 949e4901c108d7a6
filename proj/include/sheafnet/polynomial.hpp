#pragma once

#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "sheafnet/error.hpp"
#include "sheafnet/section.hpp"
#include "sheafnet/topology.hpp"

namespace sheafnet {

using Rational = boost::multiprecision::cpp_rational;

/// Exponent vector of a monomial, one entry per variable.
using Exponents = std::vector<unsigned>;

/// Sparse multivariate polynomial with exact rational coefficients.
class Polynomial {
 public:
  explicit Polynomial(std::size_t n_vars = 0) : n_vars_(n_vars) {}

  static Polynomial constant(std::size_t n_vars, const Rational& c) {
    Polynomial p(n_vars);
    p.add_term(Exponents(n_vars, 0), c);
    return p;
  }
  static Polynomial variable(std::size_t n_vars, std::size_t v) {
    if (v >= n_vars) throw InvalidInput("polynomial variable out of range");
    Exponents e(n_vars, 0);
    e[v] = 1;
    Polynomial p(n_vars);
    p.add_term(std::move(e), Rational(1));
    return p;
  }

  std::size_t n_vars() const noexcept { return n_vars_; }
  const std::map<Exponents, Rational>& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }

  void add_term(Exponents e, const Rational& c) {
    if (e.size() != n_vars_) throw InvalidInput("monomial has the wrong number of variables");
    if (c == 0) return;
    auto [it, fresh] = terms_.try_emplace(std::move(e), c);
    if (!fresh) {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }

  Rational coefficient(const Exponents& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? Rational(0) : it->second;
  }

  Polynomial& operator+=(const Polynomial& o) {
    check_vars(o);
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    check_vars(o);
    for (const auto& [e, c] : o.terms_) add_term(e, -c);
    return *this;
  }
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator-(const Polynomial& a) { return a * Rational(-1); }

  friend Polynomial operator*(const Polynomial& a, const Rational& s) {
    Polynomial out(a.n_vars_);
    if (s == 0) return out;
    for (const auto& [e, c] : a.terms_) out.terms_.emplace(e, c * s);
    return out;
  }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    a.check_vars(b);
    Polynomial out(a.n_vars_);
    for (const auto& [ea, ca] : a.terms_)
      for (const auto& [eb, cb] : b.terms_) {
        Exponents e(ea);
        for (std::size_t v = 0; v < e.size(); ++v) e[v] += eb[v];
        out.add_term(std::move(e), ca * cb);
      }
    return out;
  }

  friend bool operator==(const Polynomial&, const Polynomial&) = default;

  double evaluate(std::span<const double> y) const {
    if (y.size() != n_vars_) throw InvalidInput("polynomial evaluated at a point of the wrong dimension");
    double acc = 0.0;
    for (const auto& [e, c] : terms_) {
      double m = c.convert_to<double>();
      for (std::size_t v = 0; v < e.size(); ++v)
        for (unsigned k = 0; k < e[v]; ++k) m *= y[v];
      acc += m;
    }
    return acc;
  }

  /// Renames variable v to map[v] inside a space of `n_vars` variables.
  Polynomial relabel(std::size_t n_vars, const std::vector<std::size_t>& map) const {
    if (map.size() != n_vars_) throw InvalidInput("relabel map has the wrong length");
    Polynomial out(n_vars);
    for (const auto& [e, c] : terms_) {
      Exponents f(n_vars, 0);
      for (std::size_t v = 0; v < e.size(); ++v) {
        if (e[v] == 0) continue;
        if (map[v] >= n_vars) throw InvalidInput("relabel target out of range");
        f[map[v]] += e[v];
      }
      out.add_term(std::move(f), c);
    }
    return out;
  }

  std::string to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [e, c] : terms_) {
      if (!first) os << " + ";
      first = false;
      os << c;
      for (std::size_t v = 0; v < e.size(); ++v)
        if (e[v] > 0) os << "*y" << (v + 1) << (e[v] > 1 ? "^" + std::to_string(e[v]) : "");
    }
    return os.str();
  }

 private:
  void check_vars(const Polynomial& o) const {
    if (o.n_vars_ != n_vars_) throw InvalidInput("polynomials over different variable sets");
  }

  std::size_t n_vars_;
  std::map<Exponents, Rational> terms_;
};

/// Vector-valued polynomial map, one component per output.
using PolyVec = std::vector<Polynomial>;

/// Exact polynomial form of a section built from input, constant, affine,
/// product, sum, concat and identity-activation nodes. Double coefficients
/// convert to rationals without rounding.
inline PolyVec to_polynomials(const Section& s) {
  const std::size_t n = s.dim_in();
  const auto& nodes = s.nodes();
  std::vector<PolyVec> val(nodes.size());
  for (std::size_t i = 0; i <= s.output(); ++i) {
    val[i] = std::visit(
        [&](const auto& node) -> PolyVec {
          using T = std::decay_t<decltype(node)>;
          PolyVec out;
          if constexpr (std::is_same_v<T, InputNode>) {
            for (long src : node.source)
              out.push_back(src < 0 ? Polynomial(n) : Polynomial::variable(n, static_cast<std::size_t>(src)));
          } else if constexpr (std::is_same_v<T, ConstantNode>) {
            for (double v : node.values) out.push_back(Polynomial::constant(n, Rational(v)));
          } else if constexpr (std::is_same_v<T, AffineNode>) {
            const PolyVec& x = val[node.arg];
            for (std::size_t r = 0; r < node.weights.rows; ++r) {
              Polynomial acc = node.bias.empty() ? Polynomial(n) : Polynomial::constant(n, Rational(node.bias[r]));
              for (std::size_t c = 0; c < node.weights.cols; ++c)
                if (node.weights(r, c) != 0.0) acc += x[c] * Rational(node.weights(r, c));
              out.push_back(std::move(acc));
            }
          } else if constexpr (std::is_same_v<T, ActivationNode>) {
            if (node.fn->name != "identity")
              throw InvalidInput("section is not polynomial: activation '" + node.fn->name + "'");
            out = val[node.arg];
          } else if constexpr (std::is_same_v<T, ProductNode> || std::is_same_v<T, SumNode>) {
            out = val[node.args[0]];
            for (std::size_t a = 1; a < node.args.size(); ++a)
              for (std::size_t t = 0; t < out.size(); ++t) {
                if constexpr (std::is_same_v<T, ProductNode>)
                  out[t] = out[t] * val[node.args[a]][t];
                else
                  out[t] += val[node.args[a]][t];
              }
          } else if constexpr (std::is_same_v<T, MaxNode>) {
            throw InvalidInput("section is not polynomial: max node");
          } else {
            for (auto a : node.args) out.insert(out.end(), val[a].begin(), val[a].end());
          }
          return out;
        },
        nodes[i].op);
  }
  return std::move(val[s.output()]);
}

/// A section evaluating the polynomial map `p` (coefficients rounded to
/// double), tagged with `support` when given.
inline Section from_polynomials(const PolyVec& p, std::size_t dim_in, std::optional<PointSet> support = std::nullopt) {
  if (p.empty()) throw InvalidInput("polynomial map needs at least one component");
  DagBuilder b(dim_in);
  ConcatNode outputs;
  for (const auto& comp : p) {
    if (comp.n_vars() != dim_in) throw InvalidInput("polynomial component over the wrong variables");
    SumNode terms;
    for (const auto& [e, c] : comp.terms()) {
      ProductNode factors;
      factors.args.push_back(b.constant({c.convert_to<double>()}));
      for (std::size_t v = 0; v < e.size(); ++v)
        for (unsigned k = 0; k < e[v]; ++k) factors.args.push_back(b.input({static_cast<long>(v)}));
      terms.args.push_back(factors.args.size() == 1 ? factors.args[0] : b.add(std::move(factors)));
    }
    outputs.args.push_back(terms.args.empty() ? b.constant({0.0})
                                              : terms.args.size() == 1 ? terms.args[0] : b.add(std::move(terms)));
  }
  const auto out = outputs.args.size() == 1 ? outputs.args[0] : b.add(std::move(outputs));
  return std::move(b).finish(out, std::move(support));
}

/// Rewrites a polynomial map in the local coordinates of `u` into the
/// global coordinates of `space`.
inline PolyVec to_global(const MarkedSpace& space, const PointSet& u, const PolyVec& local) {
  const auto coords = space.coordinates(u);
  PolyVec out;
  out.reserve(local.size());
  for (const auto& p : local) out.push_back(p.relabel(space.total_dim(), coords));
  return out;
}

/// Inverse of to_global; throws if `global` uses a coordinate outside `u`.
inline PolyVec to_local(const MarkedSpace& space, const PointSet& u, const PolyVec& global) {
  const auto coords = space.coordinates(u);
  std::vector<std::size_t> local_of(space.total_dim(), coords.size());
  for (std::size_t t = 0; t < coords.size(); ++t) local_of[coords[t]] = t;
  PolyVec out;
  for (const auto& p : global) {
    Polynomial q(coords.size());
    for (const auto& [e, c] : p.terms()) {
      Exponents f(coords.size(), 0);
      for (std::size_t v = 0; v < e.size(); ++v) {
        if (e[v] == 0) continue;
        if (local_of[v] == coords.size())
          throw InvalidInput("polynomial depends on a coordinate outside " + u.to_string());
        f[local_of[v]] = e[v];
      }
      q.add_term(std::move(f), c);
    }
    out.push_back(std::move(q));
  }
  return out;
}

/// Set of marked points whose coordinates occur in monomial `e`.
inline PointSet monomial_support(const MarkedSpace& space, const Exponents& e) {
  std::vector<std::size_t> pts;
  for (std::size_t v = 0; v < e.size(); ++v)
    if (e[v] > 0) pts.push_back(space.point_of_coordinate(v));
  return PointSet(std::move(pts));
}

}  // namespace sheafnet
