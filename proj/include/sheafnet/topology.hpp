#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "sheafnet/error.hpp"
#include "sheafnet/point_set.hpp"

namespace sheafnet {

struct AbstractShape {
  friend bool operator==(const AbstractShape&, const AbstractShape&) = default;
};
struct GridShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  friend bool operator==(const GridShape&, const GridShape&) = default;
};
struct GraphShape {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  friend bool operator==(const GraphShape&, const GraphShape&) = default;
};
struct LineShape {
  friend bool operator==(const LineShape&, const LineShape&) = default;
};

/// Geometry tag carried along with a marked space. The combinatorial checks
/// never look at it; builders and IO do.
using Structure = std::variant<AbstractShape, GridShape, GraphShape, LineShape>;

inline std::string_view structure_name(const Structure& s) {
  static constexpr std::array<std::string_view, 4> names{"abstract", "grid", "graph", "line"};
  return names[s.index()];
}

/// Finite set of marked points x_1..x_N with fiber dimensions l_1..l_N.
///
/// Coordinates of the section spaces are laid out point by point in
/// ascending point order, each point contributing l_i consecutive slots.
class MarkedSpace {
 public:
  MarkedSpace() : MarkedSpace(std::vector<std::size_t>{1}) {}

  explicit MarkedSpace(std::vector<std::size_t> fiber_dims, Structure structure = AbstractShape{})
      : fibers_(std::move(fiber_dims)), structure_(std::move(structure)) {
    if (fibers_.empty()) throw InvalidInput("a marked space needs at least one point");
    offsets_.resize(fibers_.size() + 1, 0);
    for (std::size_t i = 0; i < fibers_.size(); ++i) {
      if (fibers_[i] == 0) throw InvalidInput("fiber dimensions must be positive");
      offsets_[i + 1] = offsets_[i] + fibers_[i];
    }
    if (const auto* g = std::get_if<GridShape>(&structure_)) {
      if (g->rows * g->cols != fibers_.size())
        throw InvalidInput("grid structure requires n_points = rows * cols");
    }
    if (const auto* g = std::get_if<GraphShape>(&structure_)) {
      for (auto [u, v] : g->edges)
        if (u >= fibers_.size() || v >= fibers_.size()) throw InvalidInput("graph edge references a missing point");
    }
  }

  static MarkedSpace uniform(std::size_t n, std::size_t fiber = 1, Structure structure = AbstractShape{}) {
    return MarkedSpace(std::vector<std::size_t>(n, fiber), std::move(structure));
  }

  static MarkedSpace grid(std::size_t rows, std::size_t cols, std::size_t fiber = 1) {
    return uniform(rows * cols, fiber, GridShape{rows, cols});
  }

  std::size_t n_points() const noexcept { return fibers_.size(); }
  const std::vector<std::size_t>& fiber_dims() const noexcept { return fibers_; }
  std::size_t fiber(std::size_t point) const { return fibers_.at(point); }
  const Structure& structure() const noexcept { return structure_; }
  PointSet all_points() const { return PointSet::range(fibers_.size()); }

  /// First global coordinate of `point`.
  std::size_t offset(std::size_t point) const { return offsets_.at(point); }
  std::size_t total_dim() const noexcept { return offsets_.back(); }

  /// d_U = sum of l_i over x_i in U.
  std::size_t dim(const PointSet& u) const {
    std::size_t d = 0;
    for (auto p : u) d += fiber(p);
    return d;
  }

  /// Global coordinate indices of U's section space, in layout order.
  std::vector<std::size_t> coordinates(const PointSet& u) const {
    std::vector<std::size_t> out;
    out.reserve(dim(u));
    for (auto p : u)
      for (std::size_t c = 0; c < fiber(p); ++c) out.push_back(offsets_[p] + c);
    return out;
  }

  /// Marked point owning global coordinate `coord`.
  std::size_t point_of_coordinate(std::size_t coord) const {
    if (coord >= total_dim()) throw InvalidInput("coordinate out of range");
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), coord);
    return static_cast<std::size_t>(it - offsets_.begin()) - 1;
  }

  /// (row, col) of a grid point.
  std::pair<std::size_t, std::size_t> cell(std::size_t point) const {
    const auto* g = std::get_if<GridShape>(&structure_);
    if (!g) throw InvalidInput("space has no grid structure");
    return {point / g->cols, point % g->cols};
  }

  void check_subset(const PointSet& u) const {
    if (!u.empty() && u.max() >= n_points()) throw InvalidInput("open set references a missing point");
  }

  friend bool operator==(const MarkedSpace& a, const MarkedSpace& b) {
    return a.fibers_ == b.fibers_ && a.structure_ == b.structure_;
  }

 private:
  std::vector<std::size_t> fibers_;
  std::vector<std::size_t> offsets_;
  Structure structure_;
};

/// An open set, seen through the marked points it contains.
struct OpenSet {
  std::string id;
  PointSet members;

  friend bool operator==(const OpenSet&, const OpenSet&) = default;
};

/// Finite family of open sets together with the space they live in.
class Cover {
 public:
  Cover(MarkedSpace space, std::vector<OpenSet> elements) : space_(std::move(space)), elements_(std::move(elements)) {
    if (elements_.empty()) throw InvalidInput("a cover needs at least one element");
    std::set<std::string_view> ids;
    for (const auto& e : elements_) {
      space_.check_subset(e.members);
      if (!ids.insert(e.id).second) throw InvalidInput("duplicate open-set id '" + e.id + "' in cover");
      covered_ = covered_ | e.members;
    }
  }

  const MarkedSpace& space() const noexcept { return space_; }
  const std::vector<OpenSet>& elements() const noexcept { return elements_; }
  const OpenSet& operator[](std::size_t i) const { return elements_.at(i); }
  std::size_t size() const noexcept { return elements_.size(); }
  const PointSet& covered() const noexcept { return covered_; }

  std::vector<PointSet> memberships() const {
    std::vector<PointSet> out;
    out.reserve(elements_.size());
    for (const auto& e : elements_) out.push_back(e.members);
    return out;
  }

 private:
  MarkedSpace space_;
  std::vector<OpenSet> elements_;
  PointSet covered_;
};

/// Builds a cover with ids `<prefix>0, <prefix>1, ...`.
inline Cover make_cover(const MarkedSpace& space, const std::vector<PointSet>& memberships,
                        std::string_view prefix = "U") {
  if (memberships.empty()) throw InvalidInput("make_cover: empty element list");
  std::vector<OpenSet> elements;
  elements.reserve(memberships.size());
  for (std::size_t i = 0; i < memberships.size(); ++i)
    elements.push_back(OpenSet{std::string(prefix) + std::to_string(i), memberships[i]});
  return Cover(space, std::move(elements));
}

/// Index subset of a cover, sorted ascending (a simplex of the nerve).
using Simplex = std::vector<std::size_t>;

/// Intersection lattice of a cover, up to a bounded simplex size.
class Nerve {
 public:
  Nerve(std::size_t cover_size, std::size_t max_order, std::map<Simplex, PointSet> faces)
      : cover_size_(cover_size), max_order_(max_order), faces_(std::move(faces)) {}

  std::size_t cover_size() const noexcept { return cover_size_; }
  std::size_t max_order() const noexcept { return max_order_; }
  const std::map<Simplex, PointSet>& faces() const noexcept { return faces_; }

  const PointSet& face(const Simplex& s) const {
    auto it = faces_.find(s);
    if (it == faces_.end()) throw InvalidInput("simplex outside the nerve's order bound");
    return it->second;
  }

  /// All simplices with exactly `order` vertices, in lexicographic order.
  std::vector<Simplex> simplices(std::size_t order) const {
    std::vector<Simplex> out;
    for (const auto& [s, _] : faces_)
      if (s.size() == order) out.push_back(s);
    return out;
  }

 private:
  std::size_t cover_size_;
  std::size_t max_order_;
  std::map<Simplex, PointSet> faces_;
};

namespace detail {
inline void extend_nerve(const Cover& cover, std::size_t max_order, Simplex& current, const PointSet& meet,
                         std::map<Simplex, PointSet>& out) {
  const std::size_t start = current.empty() ? 0 : current.back() + 1;
  for (std::size_t a = start; a < cover.size(); ++a) {
    current.push_back(a);
    PointSet next = current.size() == 1 ? cover[a].members : (meet & cover[a].members);
    if (current.size() < max_order) extend_nerve(cover, max_order, current, next, out);
    out.emplace(current, std::move(next));
    current.pop_back();
  }
}
}  // namespace detail

inline Nerve nerve(const Cover& cover, std::size_t max_order) {
  if (max_order == 0) throw InvalidInput("nerve: max_order must be at least 1");
  std::map<Simplex, PointSet> faces;
  Simplex current;
  detail::extend_nerve(cover, max_order, current, PointSet{}, faces);
  return Nerve(cover.size(), max_order, std::move(faces));
}

/// Stages C_0, ..., C_m, C_global of a discrete deep learning technique.
class CoverSequence {
 public:
  /// `stages` must include the global stage as its last entry.
  CoverSequence(const MarkedSpace& space, const std::vector<std::vector<PointSet>>& stages) : space_(space) {
    if (stages.empty()) throw InvalidInput("cover sequence has no stages");
    for (std::size_t s = 0; s < stages.size(); ++s) {
      const std::string prefix = "S" + std::to_string(s) + ".";
      stages_.push_back(make_cover(space, stages[s], prefix));
    }
    const Cover& first = stages_.front();
    if (first.size() != space.n_points())
      throw InvalidInput("stage 0 must have exactly one element per marked point");
    for (std::size_t i = 0; i < first.size(); ++i)
      if (first[i].members != PointSet{i})
        throw InvalidInput("stage 0 element " + std::to_string(i + 1) + " must isolate its marked point");
    const Cover& last = stages_.back();
    if (stages_.size() > 1 && (last.size() != 1 || last[0].members != space.all_points()))
      throw InvalidInput("the final stage must be the single global open set");
  }

  /// Appends the global stage to `stages`.
  static CoverSequence with_global(const MarkedSpace& space, std::vector<std::vector<PointSet>> stages) {
    stages.push_back({space.all_points()});
    return CoverSequence(space, stages);
  }

  const MarkedSpace& space() const noexcept { return space_; }
  const std::vector<Cover>& stages() const noexcept { return stages_; }
  const Cover& operator[](std::size_t s) const { return stages_.at(s); }
  std::size_t size() const noexcept { return stages_.size(); }

 private:
  MarkedSpace space_;
  std::vector<Cover> stages_;
};

enum class Axiom { locality = 0, strictness = 1, non_triviality = 2, distinctness = 3 };

inline std::string_view axiom_name(Axiom a) {
  static constexpr std::array<std::string_view, 4> names{"locality", "strictness", "non_triviality", "distinctness"};
  return names[static_cast<std::size_t>(a)];
}

/// Axiom verdicts for one consecutive pair (C_{n-1}, C_n).
struct StageAxioms {
  std::size_t stage = 0;  // n
  bool locality = false;
  bool strictness = false;
  bool non_triviality = false;
  bool distinctness = false;
  std::optional<std::size_t> uncovered_point;                     // locality witness
  std::optional<std::size_t> non_trivial_violator;                // element of C_n
  std::optional<std::pair<std::size_t, std::size_t>> duplicate;  // elements of C_n
  std::vector<std::vector<std::size_t>> subfamilies;              // inputs contained in each element

  bool holds(Axiom a) const {
    switch (a) {
      case Axiom::locality: return locality;
      case Axiom::strictness: return strictness;
      case Axiom::non_triviality: return non_triviality;
      case Axiom::distinctness: return distinctness;
    }
    return false;
  }
  bool all() const { return locality && strictness && non_triviality && distinctness; }
};

struct AxiomReport {
  std::vector<StageAxioms> stages;
  /// First stage n at which each axiom fails, indexed by Axiom.
  std::array<std::optional<std::size_t>, 4> first_violation{};

  bool all_hold() const {
    for (const auto& s : stages)
      if (!s.all()) return false;
    return true;
  }

  /// True when `a` holds at every pair except the final readout into C_global.
  bool internal_hold(Axiom a) const {
    for (std::size_t i = 0; i + 1 < stages.size(); ++i)
      if (!stages[i].holds(a)) return false;
    return true;
  }

  const StageAxioms& at_stage(std::size_t n) const {
    for (const auto& s : stages)
      if (s.stage == n) return s;
    throw InvalidInput("no axiom record for stage " + std::to_string(n));
  }
};

/// Axioms for one pair of consecutive covers; only memberships are consulted.
inline StageAxioms check_stage_axioms(const MarkedSpace& space, const Cover& prev, const Cover& next,
                                      std::size_t stage) {
  StageAxioms out;
  out.stage = stage;

  const PointSet uncovered = space.all_points() - next.covered();
  out.locality = !uncovered.empty();
  if (out.locality) out.uncovered_point = *uncovered.begin();

  out.strictness = prev.size() > next.size();

  out.non_triviality = true;
  for (std::size_t b = 0; b < next.size(); ++b) {
    std::vector<std::size_t> family;
    PointSet joined;
    for (std::size_t a = 0; a < prev.size(); ++a) {
      if (prev[a].members.subset_of(next[b].members)) {
        family.push_back(a);
        joined = joined | prev[a].members;
      }
    }
    const bool ok = !family.empty() && joined == next[b].members;
    if (!ok && out.non_triviality) {
      out.non_triviality = false;
      out.non_trivial_violator = b;
    }
    out.subfamilies.push_back(std::move(family));
  }

  out.distinctness = true;
  for (std::size_t a = 0; a < next.size() && out.distinctness; ++a)
    for (std::size_t b = a + 1; b < next.size(); ++b)
      if (next[a].members == next[b].members) {
        out.distinctness = false;
        out.duplicate = std::pair{a, b};
        break;
      }
  return out;
}

inline AxiomReport check_na_axioms(const CoverSequence& seq) {
  if (seq.size() < 2) throw InvalidInput("check_na_axioms: need at least two stages");
  AxiomReport report;
  for (std::size_t n = 1; n < seq.size(); ++n) {
    report.stages.push_back(check_stage_axioms(seq.space(), seq[n - 1], seq[n], n));
    const auto& s = report.stages.back();
    for (std::size_t a = 0; a < 4; ++a)
      if (!s.holds(static_cast<Axiom>(a)) && !report.first_violation[a]) report.first_violation[a] = n;
  }
  return report;
}

}  // namespace sheafnet
