#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <initializer_list>
#include <iterator>
#include <string>
#include <vector>

namespace sheafnet {

/// Sorted set of 0-based marked-point indices.
///
/// Open sets are modelled by the marked points they contain, so this is the
/// workhorse type for covers, nerves and coordinate layouts.
class PointSet {
 public:
  using const_iterator = std::vector<std::size_t>::const_iterator;

  PointSet() = default;
  PointSet(std::initializer_list<std::size_t> points) : points_(points) { normalize(); }
  explicit PointSet(std::vector<std::size_t> points) : points_(std::move(points)) { normalize(); }

  /// {0, 1, ..., n-1}
  static PointSet range(std::size_t n) {
    std::vector<std::size_t> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = i;
    PointSet s;
    s.points_ = std::move(pts);
    return s;
  }

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const_iterator begin() const noexcept { return points_.begin(); }
  const_iterator end() const noexcept { return points_.end(); }
  const std::vector<std::size_t>& points() const noexcept { return points_; }
  std::size_t max() const { return points_.back(); }

  bool contains(std::size_t p) const { return std::binary_search(points_.begin(), points_.end(), p); }

  bool subset_of(const PointSet& other) const {
    return std::includes(other.points_.begin(), other.points_.end(), points_.begin(), points_.end());
  }

  /// Position of `p` inside the sorted set; `p` must be a member.
  std::size_t rank_of(std::size_t p) const {
    return static_cast<std::size_t>(std::lower_bound(points_.begin(), points_.end(), p) - points_.begin());
  }

  friend PointSet operator|(const PointSet& a, const PointSet& b) {
    PointSet out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out.points_));
    return out;
  }
  friend PointSet operator&(const PointSet& a, const PointSet& b) {
    PointSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out.points_));
    return out;
  }
  friend PointSet operator-(const PointSet& a, const PointSet& b) {
    PointSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out.points_));
    return out;
  }

  friend bool operator==(const PointSet&, const PointSet&) = default;
  friend auto operator<=>(const PointSet&, const PointSet&) = default;

  /// Human-readable form with 1-based indices, e.g. "{1,2}".
  std::string to_string() const {
    std::string s = "{";
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(points_[i] + 1);
    }
    return s + "}";
  }

 private:
  void normalize() {
    std::sort(points_.begin(), points_.end());
    points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
  }

  std::vector<std::size_t> points_;
};

}  // namespace sheafnet
