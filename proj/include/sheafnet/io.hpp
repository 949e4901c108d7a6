#pragma once

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "sheafnet/activation.hpp"
#include "sheafnet/error.hpp"
#include "sheafnet/graphs.hpp"
#include "sheafnet/network.hpp"
#include "sheafnet/section.hpp"
#include "sheafnet/topology.hpp"

// JSON documents use 1-based point, element and node indices; section
// coordinates inside a section body are 0-based local slots.

namespace sheafnet::io {

using json = nlohmann::ordered_json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidInput(what + ": " + e.what());
  }
}

inline json load_json(const std::string& path) { return parse_json(read_file(path), path); }

namespace detail {

template <typename F>
auto guarded(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw InvalidInput(what + ": " + e.what());
  }
}

inline std::size_t one_based(const json& v, std::size_t limit, const std::string& what) {
  const long long i = v.get<long long>();
  if (i < 1 || static_cast<std::size_t>(i) > limit) throw InvalidInput(what + " index " + std::to_string(i) + " out of range");
  return static_cast<std::size_t>(i - 1);
}

inline PointSet point_set(const json& arr, std::size_t n) {
  std::vector<std::size_t> pts;
  for (const auto& v : arr) pts.push_back(one_based(v, n, "point"));
  return PointSet(std::move(pts));
}

inline json points_json(const PointSet& s) {
  json j = json::array();
  for (auto p : s) j.push_back(p + 1);
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Spaces and covers

inline Structure structure_from_json(const json& j, std::size_t n) {
  const std::string type = j.value("type", "abstract");
  if (type == "abstract") return AbstractShape{};
  if (type == "line") return LineShape{};
  if (type == "grid") return GridShape{j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>()};
  if (type == "graph") {
    GraphShape g;
    for (const auto& e : j.at("edges"))
      g.edges.emplace_back(detail::one_based(e.at(0), n, "edge"), detail::one_based(e.at(1), n, "edge"));
    return g;
  }
  throw InvalidInput("unknown structure type '" + type + "'");
}

inline json structure_to_json(const Structure& s) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GridShape>) {
          return {{"type", "grid"}, {"rows", v.rows}, {"cols", v.cols}};
        } else if constexpr (std::is_same_v<T, GraphShape>) {
          json edges = json::array();
          for (auto [a, b] : v.edges) edges.push_back({a + 1, b + 1});
          return {{"type", "graph"}, {"edges", edges}};
        } else if constexpr (std::is_same_v<T, LineShape>) {
          return {{"type", "line"}};
        } else {
          return {{"type", "abstract"}};
        }
      },
      s);
}

inline MarkedSpace space_from_json(const json& j) {
  return detail::guarded("space", [&] {
    const std::size_t n = j.at("n_points").get<std::size_t>();
    if (n == 0) throw InvalidInput("n_points must be at least 1");
    std::vector<std::size_t> fibers = j.contains("fiber_dims") ? j.at("fiber_dims").get<std::vector<std::size_t>>()
                                                               : std::vector<std::size_t>(n, 1);
    if (fibers.size() != n) throw InvalidInput("fiber_dims must list one dimension per point");
    Structure st = j.contains("structure") ? structure_from_json(j.at("structure"), n) : Structure{AbstractShape{}};
    return MarkedSpace(std::move(fibers), std::move(st));
  });
}

inline json space_to_json(const MarkedSpace& s) {
  return {{"n_points", s.n_points()}, {"fiber_dims", s.fiber_dims()}, {"structure", structure_to_json(s.structure())}};
}

/// A marked space and a list of covers given by 1-based memberships.
struct CoverDocument {
  MarkedSpace space;
  std::vector<std::vector<PointSet>> covers;
};

inline CoverDocument cover_document_from_json(const json& j) {
  CoverDocument doc{space_from_json(j), {}};
  detail::guarded("covers", [&] {
    for (const auto& c : j.at("covers")) {
      std::vector<PointSet> elements;
      for (const auto& e : c) elements.push_back(detail::point_set(e, doc.space.n_points()));
      if (elements.empty()) throw InvalidInput("a cover needs at least one element");
      doc.covers.push_back(std::move(elements));
    }
    return 0;
  });
  if (doc.covers.empty()) throw InvalidInput("document lists no covers");
  return doc;
}

inline CoverDocument load_cover_document(const std::string& path) { return cover_document_from_json(load_json(path)); }

// ---------------------------------------------------------------------------
// Sections

inline json section_to_json(const Section& s) {
  json nodes = json::array();
  for (std::size_t i = 0; i < s.nodes().size(); ++i) {
    json node = std::visit(
        [](const auto& n) -> json {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, InputNode>) {
            return {{"op", "input"}, {"source", n.source}};
          } else if constexpr (std::is_same_v<T, ConstantNode>) {
            return {{"op", "constant"}, {"values", n.values}};
          } else if constexpr (std::is_same_v<T, AffineNode>) {
            json j = {{"op", "affine"}, {"rows", n.weights.rows}, {"cols", n.weights.cols},
                      {"weights", n.weights.data}, {"args", {n.arg}}};
            if (!n.bias.empty()) j["bias"] = n.bias;
            return j;
          } else if constexpr (std::is_same_v<T, ActivationNode>) {
            return {{"op", "activation"}, {"name", n.fn->name}, {"args", {n.arg}}};
          } else {
            const char* op = std::is_same_v<T, ProductNode> ? "product"
                             : std::is_same_v<T, SumNode>   ? "sum"
                             : std::is_same_v<T, MaxNode>   ? "max"
                                                            : "concat";
            return {{"op", op}, {"args", n.args}};
          }
        },
        s.nodes()[i].op);
    json with_id = {{"id", i}};
    with_id.update(node);
    nodes.push_back(std::move(with_id));
  }
  json j = {{"dim_in", s.dim_in()}, {"dim_out", s.dim_out()}};
  if (s.support()) j["domain"] = detail::points_json(*s.support());
  j["nodes"] = std::move(nodes);
  j["output"] = s.output();
  return j;
}

inline Section section_from_json(const json& j, std::size_t n_points = 0) {
  return detail::guarded("section", [&] {
    DagBuilder b(j.at("dim_in").get<std::size_t>());
    const auto& nodes = j.at("nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      if (n.contains("id") && n.at("id").get<std::size_t>() != i)
        throw InvalidInput("section node ids must be 0, 1, 2, ... in order");
      const std::string op = n.at("op").get<std::string>();
      auto args = [&] { return n.at("args").get<std::vector<std::size_t>>(); };
      auto arg = [&] {
        const auto a = args();
        if (a.size() != 1) throw InvalidInput("node '" + op + "' takes exactly one argument");
        return a.front();
      };
      if (op == "input") {
        b.input(n.at("source").get<std::vector<long>>());
      } else if (op == "constant") {
        b.constant(n.at("values").get<Vec>());
      } else if (op == "affine") {
        Matrix w(n.at("rows").get<std::size_t>(), n.at("cols").get<std::size_t>(), n.at("weights").get<Vec>());
        b.add(AffineNode{std::move(w), n.value("bias", Vec{}), arg()});
      } else if (op == "activation") {
        b.add(ActivationNode{&activation(n.at("name").get<std::string>()), arg()});
      } else if (op == "product") {
        b.add(ProductNode{args()});
      } else if (op == "sum") {
        b.add(SumNode{args()});
      } else if (op == "max") {
        b.add(MaxNode{args()});
      } else if (op == "concat") {
        b.add(ConcatNode{args()});
      } else {
        throw InvalidInput("unknown section node op '" + op + "'");
      }
    }
    std::optional<PointSet> support;
    if (j.contains("domain")) {
      if (n_points == 0) throw InvalidInput("section domain needs a marked space");
      support = detail::point_set(j.at("domain"), n_points);
    }
    return std::move(b).finish(j.at("output").get<std::size_t>(), std::move(support));
  });
}

// ---------------------------------------------------------------------------
// Networks

namespace detail {

/// "identity", {"matrix": [[...]], "bias": [...]}, or a full section body.
inline Section phi_from_json(const json& j, std::size_t dim_in, std::size_t dim_out) {
  if (j.is_string()) {
    if (j.get<std::string>() != "identity") throw InvalidInput("unknown map shorthand '" + j.get<std::string>() + "'");
    if (dim_in != dim_out) throw InvalidInput("identity map needs equal input and output dimensions");
    return Section::identity(dim_in);
  }
  if (j.contains("matrix")) {
    const auto rows = j.at("matrix").get<std::vector<Vec>>();
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols) throw InvalidInput("ragged matrix");
      for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = rows[r][c];
    }
    if (m.cols != dim_in) throw InvalidInput("map matrix has the wrong number of columns");
    return affine(std::move(m), j.value("bias", Vec{}), Section::identity(dim_in));
  }
  return section_from_json(j);
}

}  // namespace detail

inline Network network_from_json(const json& j) {
  const CoverDocument doc = cover_document_from_json(j);
  const CoverSequence seq(doc.space, doc.covers);
  return detail::guarded("network", [&] {
    const auto& layers_json = j.at("layers");
    if (layers_json.size() + 1 != seq.size()) throw InvalidInput("network needs one layer per consecutive cover pair");
    std::vector<Layer> layers;
    std::vector<std::size_t> in_dims(doc.space.fiber_dims());
    for (std::size_t n = 0; n < layers_json.size(); ++n) {
      const auto& lj = layers_json[n];
      const Cover& in = seq[n];
      const Cover& out = seq[n + 1];
      Layer l;
      if (lj.contains("aggregation")) {
        for (const auto& agg : lj.at("aggregation")) {
          std::vector<std::size_t> a;
          for (const auto& v : agg) a.push_back(detail::one_based(v, in.size(), "aggregated element"));
          l.aggregation.push_back(std::move(a));
        }
      } else {
        // Default: every input contained in the output.
        for (std::size_t b = 0; b < out.size(); ++b) {
          std::vector<std::size_t> a;
          for (std::size_t i = 0; i < in.size(); ++i)
            if (in[i].members.subset_of(out[b].members)) a.push_back(i);
          l.aggregation.push_back(std::move(a));
        }
      }
      const std::string kind = lj.value("kind", "fti");
      if (kind == "fti") {
        l.out_dim = lj.at("out_dim").get<std::size_t>();
        FactorsThroughInclusion f{{}, &activation(lj.value("activation", "identity"))};
        const json& phi = lj.at("phi");
        for (std::size_t a = 0; a < in.size(); ++a) {
          const json& pj = phi.is_array() ? phi.at(a) : phi;
          f.phi.push_back(detail::phi_from_json(pj, in_dims[a], l.out_dim));
        }
        l.kind = std::move(f);
      } else if (kind == "max") {
        l.out_dim = in_dims.front();
        l.kind = General{MaxPool{}};
      } else if (kind == "attention") {
        Attention att{lj.at("heads").get<std::size_t>(), lj.at("width").get<std::size_t>(), {}};
        if (lj.contains("query_of")) {
          for (const auto& q : lj.at("query_of")) att.query_of.push_back(detail::one_based(q, in.size(), "query"));
        } else {
          for (std::size_t b = 0; b < out.size(); ++b) att.query_of.push_back(b);
        }
        l.out_dim = att.heads * att.width;
        l.kind = General{att};
      } else {
        throw InvalidInput("unknown layer kind '" + kind + "'");
      }
      in_dims.assign(out.size(), l.out_dim);
      layers.push_back(std::move(l));
    }
    return Network(seq, std::move(layers));
  });
}

inline Network load_network(const std::string& path) { return network_from_json(load_json(path)); }

inline json network_to_json(const Network& net) {
  json j = space_to_json(net.space());
  json covers = json::array();
  for (const auto& c : net.covers().stages()) {
    json cj = json::array();
    for (const auto& e : c.elements()) cj.push_back(detail::points_json(e.members));
    covers.push_back(cj);
  }
  j["covers"] = covers;
  json layers = json::array();
  for (const auto& l : net.layers()) {
    json lj;
    json agg = json::array();
    for (const auto& a : l.aggregation) {
      json aj = json::array();
      for (auto i : a) aj.push_back(i + 1);
      agg.push_back(aj);
    }
    lj["aggregation"] = agg;
    if (const auto* f = std::get_if<FactorsThroughInclusion>(&l.kind)) {
      lj["kind"] = "fti";
      lj["activation"] = f->activation->name;
      lj["out_dim"] = l.out_dim;
      json phi = json::array();
      for (const auto& s : f->phi) phi.push_back(section_to_json(s));
      lj["phi"] = phi;
    } else if (const auto* att = std::get_if<Attention>(&std::get<General>(l.kind).map)) {
      lj["kind"] = "attention";
      lj["heads"] = att->heads;
      lj["width"] = att->width;
      json q = json::array();
      for (auto i : att->query_of) q.push_back(i + 1);
      lj["query_of"] = q;
    } else {
      lj["kind"] = "max";
    }
    layers.push_back(lj);
  }
  j["layers"] = layers;
  return j;
}

// ---------------------------------------------------------------------------
// Graphs

inline Graph graph_from_json(const json& j) {
  return detail::guarded("graph", [&] {
    const std::size_t n = j.at("n").get<std::size_t>();
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : j.at("edges"))
      edges.emplace_back(detail::one_based(e.at(0), n, "node"), detail::one_based(e.at(1), n, "node"));
    return Graph(n, std::move(edges), j.value("labels", std::vector<int>{}));
  });
}

inline json graph_to_json(const Graph& g) {
  json edges = json::array();
  for (auto [u, v] : g.edges()) edges.push_back({u + 1, v + 1});
  return {{"n", g.n()}, {"edges", edges}, {"labels", g.labels()}};
}

/// Whitespace edge list: one "u v" pair per line (1-based), '#' comments,
/// and an optional "n <count>" line for isolated trailing nodes.
inline Graph graph_from_edge_list(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  std::vector<std::pair<long long, long long>> raw;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "n") {
      if (!(ls >> n)) throw InvalidInput("edge list: malformed node count line");
      continue;
    }
    long long u = 0, v = 0;
    try {
      u = std::stoll(first);
    } catch (const std::exception&) {
      throw InvalidInput("edge list: cannot parse '" + line + "'");
    }
    if (!(ls >> v)) throw InvalidInput("edge list: line needs two node indices");
    if (u < 1 || v < 1) throw InvalidInput("edge list: node indices are 1-based");
    raw.emplace_back(u, v);
    n = std::max<std::size_t>(n, static_cast<std::size_t>(std::max(u, v)));
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (auto [u, v] : raw) edges.emplace_back(static_cast<std::size_t>(u - 1), static_cast<std::size_t>(v - 1));
  return Graph(n, std::move(edges));
}

/// JSON when the file parses as a JSON object, edge list otherwise.
inline Graph load_graph(const std::string& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return graph_from_json(parse_json(text, path));
  return graph_from_edge_list(text);
}

}  // namespace sheafnet::io
