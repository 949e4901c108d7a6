#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sheafnet/error.hpp"

namespace sheafnet {

/// Simple undirected graph on nodes 0..n-1 with small integer labels.
class Graph {
 public:
  Graph() = default;
  Graph(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> edges, std::vector<int> labels = {})
      : n_(n), edges_(std::move(edges)), labels_(std::move(labels)), adj_(n) {
    if (labels_.empty()) labels_.assign(n_, 0);
    if (labels_.size() != n_) throw InvalidInput("graph needs one label per node");
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (auto& [u, v] : edges_) {
      if (u >= n_ || v >= n_) throw InvalidInput("graph edge references a missing node");
      if (u == v) throw InvalidInput("graph input must not contain self-loops");
      if (!seen.insert(std::minmax(u, v)).second) throw InvalidInput("graph input must not repeat an edge");
      adj_[u].push_back(v);
      adj_[v].push_back(u);
    }
    for (auto& a : adj_) std::sort(a.begin(), a.end());
  }

  std::size_t n() const noexcept { return n_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept { return edges_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<std::size_t>& neighbors(std::size_t v) const { return adj_.at(v); }
  std::size_t degree(std::size_t v) const { return adj_.at(v).size(); }

  /// Same graph with node v renamed perm[v].
  Graph relabeled(const std::vector<std::size_t>& perm) const {
    if (perm.size() != n_) throw InvalidInput("relabeling must name every node");
    std::vector<std::pair<std::size_t, std::size_t>> e;
    for (auto [u, v] : edges_) e.emplace_back(perm[u], perm[v]);
    std::vector<int> l(n_);
    for (std::size_t v = 0; v < n_; ++v) l[perm[v]] = labels_[v];
    return Graph(n_, std::move(e), std::move(l));
  }

  static Graph cycle(std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> e;
    for (std::size_t i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
    return Graph(n, std::move(e));
  }
  static Graph path(std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
    return Graph(n, std::move(e));
  }
  /// Disjoint union, b's nodes shifted past a's.
  static Graph disjoint_union(const Graph& a, const Graph& b) {
    auto e = a.edges_;
    for (auto [u, v] : b.edges_) e.emplace_back(u + a.n_, v + a.n_);
    auto l = a.labels_;
    l.insert(l.end(), b.labels_.begin(), b.labels_.end());
    return Graph(a.n_ + b.n_, std::move(e), std::move(l));
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<int> labels_;
  std::vector<std::vector<std::size_t>> adj_;
};

// ---------------------------------------------------------------------------
// Directed double cover

struct Arc {
  std::size_t from = 0;
  std::size_t to = 0;
  std::size_t image = 0;  ///< edge of G' this arc projects to
};

/// G'' over G' = G plus a unit self-loop per node. Edges of G' are indexed
/// with the edges of G first and the loop at v at position |E| + v. Each
/// edge of G lifts to its two orientations; each loop lifts once, which is
/// where the projection ramifies.
struct DoubleCover {
  std::size_t n_nodes = 0;
  std::size_t n_base_edges = 0;  ///< |E(G')| = |E| + n
  std::vector<Arc> arcs;

  std::size_t loop_lifts() const {
    return static_cast<std::size_t>(std::count_if(arcs.begin(), arcs.end(), [](const Arc& a) { return a.from == a.to; }));
  }
  /// Number of arcs over each edge of G'.
  std::vector<std::size_t> sheets() const {
    std::vector<std::size_t> s(n_base_edges, 0);
    for (const auto& a : arcs) ++s[a.image];
    return s;
  }
};

inline DoubleCover double_cover(const Graph& g) {
  DoubleCover dc;
  dc.n_nodes = g.n();
  dc.n_base_edges = g.edges().size() + g.n();
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    const auto [u, v] = g.edges()[e];
    dc.arcs.push_back({u, v, e});
    dc.arcs.push_back({v, u, e});
  }
  for (std::size_t v = 0; v < g.n(); ++v) dc.arcs.push_back({v, v, g.edges().size() + v});
  return dc;
}

// ---------------------------------------------------------------------------
// Unfolding trees

/// Depth-k computation tree at a node: the children of every copy of v are
/// copies of all neighbors of v, so depth-t vertices are the walks of
/// length t from the root.
struct UnfoldingTree {
  struct Vertex {
    std::size_t node = 0;
    int label = 0;
    std::size_t level = 0;
    std::vector<std::size_t> children;
  };

  std::size_t root = 0;
  std::size_t depth = 0;
  std::vector<Vertex> vertices;  ///< vertices[0] is the root, breadth-first order

  std::vector<std::size_t> level_sizes() const {
    std::vector<std::size_t> s(depth + 1, 0);
    for (const auto& v : vertices) ++s[v.level];
    return s;
  }
};

inline UnfoldingTree unfolding_tree(const Graph& g, std::size_t v, std::size_t k) {
  if (v >= g.n()) throw InvalidInput("unfolding tree root is not a node of the graph");
  UnfoldingTree t;
  t.root = v;
  t.depth = k;
  t.vertices.push_back({v, g.labels()[v], 0, {}});
  for (std::size_t i = 0; i < t.vertices.size(); ++i) {
    if (t.vertices[i].level == k) continue;
    const std::size_t node = t.vertices[i].node;
    const std::size_t level = t.vertices[i].level + 1;
    for (auto w : g.neighbors(node)) {
      t.vertices[i].children.push_back(t.vertices.size());
      t.vertices.push_back({w, g.labels()[w], level, {}});
    }
  }
  return t;
}

/// AHU encoding "(label child child ...)" with children sorted, so two
/// labelled rooted trees get equal codes exactly when they are isomorphic.
inline std::string tree_canonical(const UnfoldingTree& t) {
  std::vector<std::string> code(t.vertices.size());
  for (std::size_t i = t.vertices.size(); i-- > 0;) {
    const auto& v = t.vertices[i];
    std::vector<std::string> kids;
    kids.reserve(v.children.size());
    for (auto c : v.children) kids.push_back(std::move(code[c]));
    std::sort(kids.begin(), kids.end());
    std::string s = "(" + std::to_string(v.label);
    for (auto& k : kids) s += k;
    s += ")";
    code[i] = std::move(s);
  }
  return code[0];
}

// ---------------------------------------------------------------------------
// 1-WL colour refinement

struct WLColoring {
  std::size_t rounds = 0;
  std::vector<std::vector<std::size_t>> colors;  ///< colors[t][v], t = 0..rounds
  std::size_t stable_round = 0;                  ///< first t whose partition the next round keeps

  std::size_t n_classes(std::size_t t) const {
    return std::set<std::size_t>(colors.at(t).begin(), colors.at(t).end()).size();
  }
};

/// Refines several graphs with one shared dictionary, so colours are
/// comparable across them. Signatures (colour, sorted neighbour colours) are
/// numbered in sorted order each round: injective and deterministic.
inline std::vector<WLColoring> wl_refine_joint(const std::vector<Graph>& graphs, std::size_t rounds) {
  std::vector<WLColoring> out(graphs.size());
  {
    std::set<int> labels;
    for (const auto& g : graphs) labels.insert(g.labels().begin(), g.labels().end());
    const std::vector<int> sorted(labels.begin(), labels.end());
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      out[i].rounds = rounds;
      std::vector<std::size_t> c(graphs[i].n());
      for (std::size_t v = 0; v < c.size(); ++v)
        c[v] = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), graphs[i].labels()[v]) -
                                        sorted.begin());
      out[i].colors.push_back(std::move(c));
    }
  }
  std::vector<bool> stable(graphs.size(), false);
  for (std::size_t t = 0; t < rounds; ++t) {
    using Signature = std::pair<std::size_t, std::vector<std::size_t>>;
    std::vector<std::vector<Signature>> sigs(graphs.size());
    std::map<Signature, std::size_t> dict;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const auto& prev = out[i].colors.back();
      for (std::size_t v = 0; v < graphs[i].n(); ++v) {
        std::vector<std::size_t> nb;
        for (auto w : graphs[i].neighbors(v)) nb.push_back(prev[w]);
        std::sort(nb.begin(), nb.end());
        sigs[i].emplace_back(prev[v], std::move(nb));
        dict.emplace(sigs[i].back(), 0);
      }
    }
    std::size_t next_id = 0;
    for (auto& [sig, id] : dict) id = next_id++;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      std::vector<std::size_t> c;
      for (const auto& s : sigs[i]) c.push_back(dict.at(s));
      const std::size_t before = out[i].n_classes(t);
      out[i].colors.push_back(std::move(c));
      if (!stable[i] && out[i].n_classes(t + 1) == before) {
        stable[i] = true;
        out[i].stable_round = t;
      }
    }
  }
  for (std::size_t i = 0; i < graphs.size(); ++i)
    if (!stable[i]) out[i].stable_round = rounds;
  return out;
}

inline WLColoring wl_refine(const Graph& g, std::size_t rounds) { return wl_refine_joint({g}, rounds).front(); }

/// True iff the partitions induced by `a` and `b` coincide.
template <typename A, typename B>
bool same_partition(const std::vector<A>& a, const std::vector<B>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t u = 0; u < a.size(); ++u)
    for (std::size_t v = u + 1; v < a.size(); ++v)
      if ((a[u] == a[v]) != (b[u] == b[v])) return false;
  return true;
}

/// Canonical codes of the depth-k unfolding trees at every node.
inline std::vector<std::string> unfolding_codes(const Graph& g, std::size_t k) {
  std::vector<std::string> codes;
  codes.reserve(g.n());
  for (std::size_t v = 0; v < g.n(); ++v) codes.push_back(tree_canonical(unfolding_tree(g, v, k)));
  return codes;
}

/// Round-k WL partition equals the partition by depth-k unfolding trees.
inline bool wl_equals_unfolding(const Graph& g, std::size_t k) {
  return same_partition(wl_refine(g, k).colors.back(), unfolding_codes(g, k));
}

struct GraphComparison {
  bool distinguishable = false;
  bool wl_distinguishable = false;  ///< joint WL colour histograms differ at round k
  std::map<std::string, std::pair<std::size_t, std::size_t>> histogram;  ///< tree code -> (count in g1, count in g2)
  std::string first_difference;  ///< a code whose counts differ, when distinguishable
};

inline GraphComparison compare_graphs(const Graph& g1, const Graph& g2, std::size_t k) {
  GraphComparison out;
  for (const auto& c : unfolding_codes(g1, k)) ++out.histogram[c].first;
  for (const auto& c : unfolding_codes(g2, k)) ++out.histogram[c].second;
  for (const auto& [code, counts] : out.histogram)
    if (counts.first != counts.second) {
      out.distinguishable = true;
      out.first_difference = code;
      break;
    }
  const auto wl = wl_refine_joint({g1, g2}, k);
  auto h1 = wl[0].colors.back(), h2 = wl[1].colors.back();
  std::sort(h1.begin(), h1.end());
  std::sort(h2.begin(), h2.end());
  out.wl_distinguishable = h1 != h2;
  return out;
}

}  // namespace sheafnet
