#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sheafnet/error.hpp"
#include "sheafnet/linalg.hpp"
#include "sheafnet/topology.hpp"

// Finite linear algebra of the Hom sheaf U -> Hom(R^{d_U}, R^k).
//
// A section over U is a k x d_U matrix, vectorized row-major. Restriction to
// U' inside U keeps the columns belonging to points of U', so every structure
// map is a 0/1 selection matrix and every coboundary has entries in {-1,0,1}.

namespace sheafnet {

/// Dimension of Hom(R^{d_U}, R^k).
inline std::size_t hom_dim(const MarkedSpace& space, const PointSet& u, std::size_t k) { return k * space.dim(u); }

/// Matrix of the restriction Hom(R^{d_V}, R^k) -> Hom(R^{d_U}, R^k).
inline IntMatrix restriction_matrix(const MarkedSpace& space, const PointSet& v, const PointSet& u, std::size_t k) {
  if (!u.subset_of(v))
    throw InvalidInput("restriction_matrix: " + u.to_string() + " is not contained in " + v.to_string());
  const std::size_t dv = space.dim(v);
  const std::size_t du = space.dim(u);
  // Column of V's local layout for each of U's local coordinates.
  std::vector<std::size_t> v_col;
  {
    std::size_t pos = 0;
    std::vector<std::size_t> start(space.n_points(), 0);
    for (auto p : v) {
      start[p] = pos;
      pos += space.fiber(p);
    }
    for (auto p : u)
      for (std::size_t c = 0; c < space.fiber(p); ++c) v_col.push_back(start[p] + c);
  }
  IntMatrix m(k * du, k * dv);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < du; ++c) m(r * du + c, r * dv + v_col[c]) = 1;
  return m;
}

/// Cochains C^q = product over q-simplices S of Hom(faces(S)), with the
/// alternating coboundaries delta_q : C^q -> C^{q+1}.
class CechComplex {
 public:
  CechComplex(const Cover& cover, std::size_t k, std::size_t max_degree)
      : k_(k), nerve_(nerve(cover, max_degree + 2)) {
    if (k == 0) throw InvalidInput("Hom sheaf needs k >= 1");
    const auto& space = cover.space();
    for (std::size_t q = 0; q <= max_degree + 1; ++q) {
      simplices_.push_back(nerve_.simplices(q + 1));
      std::vector<std::size_t> offsets;
      std::size_t total = 0;
      for (const auto& s : simplices_.back()) {
        offsets.push_back(total);
        total += hom_dim(space, nerve_.face(s), k);
      }
      offsets_.push_back(std::move(offsets));
      dims_.push_back(total);
    }
    for (std::size_t q = 0; q <= max_degree; ++q) deltas_.push_back(build_delta(space, q));
  }

  std::size_t max_degree() const noexcept { return deltas_.size() - 1; }
  std::size_t k() const noexcept { return k_; }
  const Nerve& nerve_data() const noexcept { return nerve_; }

  /// dim C^q for 0 <= q <= max_degree + 1.
  std::size_t cochain_dim(std::size_t q) const { return dims_.at(q); }
  const std::vector<Simplex>& simplices(std::size_t q) const { return simplices_.at(q); }
  const IntMatrix& delta(std::size_t q) const { return deltas_.at(q); }

 private:
  IntMatrix build_delta(const MarkedSpace& space, std::size_t q) const {
    IntMatrix d(dims_[q + 1], dims_[q]);
    const auto& lower = simplices_[q];
    for (std::size_t t = 0; t < simplices_[q + 1].size(); ++t) {
      const Simplex& big = simplices_[q + 1][t];
      const PointSet& big_face = nerve_.face(big);
      for (std::size_t i = 0; i < big.size(); ++i) {
        Simplex small = big;
        small.erase(small.begin() + static_cast<std::ptrdiff_t>(i));
        const auto it = std::lower_bound(lower.begin(), lower.end(), small);
        const std::size_t s = static_cast<std::size_t>(it - lower.begin());
        const IntMatrix block = restriction_matrix(space, nerve_.face(small), big_face, k_);
        const std::int64_t sign = (i % 2 == 0) ? 1 : -1;
        for (std::size_t r = 0; r < block.rows; ++r)
          for (std::size_t c = 0; c < block.cols; ++c)
            if (block(r, c) != 0) d(offsets_[q + 1][t] + r, offsets_[q][s] + c) += sign * block(r, c);
      }
    }
    return d;
  }

  std::size_t k_;
  Nerve nerve_;
  std::vector<std::vector<Simplex>> simplices_;
  std::vector<std::vector<std::size_t>> offsets_;
  std::vector<std::size_t> dims_;
  std::vector<IntMatrix> deltas_;
};

struct CohomologyResult {
  std::vector<std::size_t> h;     ///< h^0 .. h^max_degree
  std::vector<std::size_t> dims;  ///< dim C^0 .. dim C^max_degree
  std::vector<std::size_t> ranks; ///< rank delta_0 .. delta_max_degree
  bool delta_squared_zero = true;
  bool float_ranks_agree = true;

  /// h^q = 0 for every q >= 1.
  bool acyclic() const {
    for (std::size_t q = 1; q < h.size(); ++q)
      if (h[q] != 0) return false;
    return true;
  }
};

/// Cech cohomology of the Hom sheaf on `cover`, degrees 0..max_degree.
inline CohomologyResult cech_cohomology(const Cover& cover, std::size_t k, std::size_t max_degree) {
  if (max_degree < 1) throw InvalidInput("cech_cohomology needs max_degree >= 1");
  const CechComplex cx(cover, k, max_degree);
  CohomologyResult res;
  for (std::size_t q = 0; q <= max_degree; ++q) {
    const std::size_t r = exact_rank(cx.delta(q));
    res.ranks.push_back(r);
    res.dims.push_back(cx.cochain_dim(q));
    if (float_rank(cx.delta(q)) != r) res.float_ranks_agree = false;
  }
  for (std::size_t q = 0; q < max_degree; ++q)
    if (!(cx.delta(q + 1) * cx.delta(q)).is_zero()) res.delta_squared_zero = false;
  for (std::size_t q = 0; q <= max_degree; ++q) {
    const std::size_t below = q == 0 ? 0 : res.ranks[q - 1];
    res.h.push_back(res.dims[q] - res.ranks[q] - below);
  }
  return res;
}

/// Ranks along 0 -> F(U) -> prod F(U_a) -> prod F(U_a n U_b) and along the
/// dual extension sequence prod F(U_a n U_b) -> prod F(U_a) -> F(U) -> 0.
struct ExactnessReport {
  std::size_t dim_global = 0;    ///< dim F(U), U the union of the cover
  std::size_t dim_locals = 0;    ///< dim prod F(U_a)
  std::size_t dim_overlaps = 0;  ///< dim prod F(U_a n U_b)
  std::size_t rank_restrict = 0; ///< rank of F(U) -> prod F(U_a)
  std::size_t rank_delta = 0;    ///< rank of prod F(U_a) -> prod F(U_a n U_b)
  std::size_t kernel_delta = 0;
  std::size_t cokernel_extend = 0; ///< dim F(U) minus rank of the summed extensions

  bool injective = false;
  bool middle_exact = false;
  bool cosheaf_surjective = false;
  bool cosheaf_middle_exact = false;
  bool float_ranks_agree = true;

  bool passes() const { return injective && middle_exact && cosheaf_surjective && cosheaf_middle_exact; }
};

inline ExactnessReport sheaf_axiom_check(const Cover& cover, std::size_t k) {
  const auto& space = cover.space();
  const PointSet u = cover.covered();
  const CechComplex cx(cover, k, 0);

  std::vector<IntMatrix> blocks;
  for (const auto& e : cover.elements()) blocks.push_back(restriction_matrix(space, u, e.members, k));
  const IntMatrix restrict_all = vstack(blocks, hom_dim(space, u, k));
  const IntMatrix& delta = cx.delta(0);
  // Extensions are zero padding of columns: the transposes of restrictions.
  const IntMatrix extend_all = restrict_all.transpose();
  const IntMatrix delta_dual = delta.transpose();

  ExactnessReport r;
  r.dim_global = restrict_all.cols;
  r.dim_locals = cx.cochain_dim(0);
  r.dim_overlaps = cx.cochain_dim(1);
  r.rank_restrict = exact_rank(restrict_all);
  r.rank_delta = exact_rank(delta);
  r.kernel_delta = r.dim_locals - r.rank_delta;
  const std::size_t rank_extend = exact_rank(extend_all);
  const std::size_t rank_delta_dual = exact_rank(delta_dual);
  r.cokernel_extend = r.dim_global - rank_extend;

  r.injective = r.rank_restrict == r.dim_global;
  r.middle_exact = r.rank_restrict == r.kernel_delta && (delta * restrict_all).is_zero();
  r.cosheaf_surjective = r.cokernel_extend == 0;
  r.cosheaf_middle_exact = rank_delta_dual == r.dim_locals - rank_extend && (extend_all * delta_dual).is_zero();
  r.float_ranks_agree = float_rank(restrict_all) == r.rank_restrict && float_rank(delta) == r.rank_delta;
  return r;
}

/// True iff every restriction V -> U in `pairs` is surjective.
inline bool flasque_check(const MarkedSpace& space, std::size_t k,
                          const std::vector<std::pair<PointSet, PointSet>>& pairs) {
  for (const auto& [v, u] : pairs) {
    const IntMatrix m = restriction_matrix(space, v, u, k);
    if (exact_rank(m) != m.rows) return false;
  }
  return true;
}

}  // namespace sheafnet
