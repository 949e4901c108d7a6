#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include "sheafnet/error.hpp"
#include "sheafnet/matrix.hpp"

namespace sheafnet {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Dense row-major integer matrix (restriction blocks, coboundaries, incidences).
struct IntMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int64_t> data;

  IntMatrix() = default;
  IntMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

  std::int64_t& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::int64_t operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  IntMatrix transpose() const {
    IntMatrix t(cols, rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  /// Exact product; throws on int64 overflow.
  friend IntMatrix operator*(const IntMatrix& a, const IntMatrix& b) {
    if (a.cols != b.rows) throw InvalidInput("integer matrix product dimension mismatch");
    IntMatrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t k = 0; k < a.cols; ++k) {
        const std::int64_t aik = a(i, k);
        if (aik == 0) continue;
        for (std::size_t j = 0; j < b.cols; ++j) {
          std::int64_t prod = 0;
          if (__builtin_mul_overflow(aik, b(k, j), &prod) || __builtin_add_overflow(out(i, j), prod, &out(i, j)))
            throw Error("integer matrix product overflowed");
        }
      }
    return out;
  }

  bool is_zero() const {
    return std::all_of(data.begin(), data.end(), [](std::int64_t v) { return v == 0; });
  }

  friend bool operator==(const IntMatrix&, const IntMatrix&) = default;
};

/// Stacks blocks vertically; all blocks must share a column count.
inline IntMatrix vstack(const std::vector<IntMatrix>& blocks, std::size_t cols) {
  std::size_t rows = 0;
  for (const auto& b : blocks) {
    if (b.cols != cols) throw InvalidInput("vstack: column count mismatch");
    rows += b.rows;
  }
  IntMatrix out(rows, cols);
  std::size_t r0 = 0;
  for (const auto& b : blocks) {
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(r0 * cols));
    r0 += b.rows;
  }
  return out;
}

namespace detail {

// Fraction-free elimination. Every intermediate entry is a minor of the
// input, so it stays exact; returns nullopt if int64 would overflow.
inline std::optional<std::size_t> bareiss_rank_i64(std::vector<std::int64_t> a, std::size_t rows, std::size_t cols) {
  std::size_t rank = 0;
  std::int64_t prev = 1;
  for (std::size_t c = 0; c < cols && rank < rows; ++c) {
    std::size_t piv = rank;
    while (piv < rows && a[piv * cols + c] == 0) ++piv;
    if (piv == rows) continue;
    if (piv != rank)
      for (std::size_t k = 0; k < cols; ++k) std::swap(a[piv * cols + k], a[rank * cols + k]);
    const std::int64_t p = a[rank * cols + c];
    for (std::size_t r = rank + 1; r < rows; ++r) {
      const std::int64_t f = a[r * cols + c];
      for (std::size_t k = c; k < cols; ++k) {
        __int128 v = static_cast<__int128>(p) * a[r * cols + k] - static_cast<__int128>(f) * a[rank * cols + k];
        v /= prev;
        if (v > INT64_MAX || v < INT64_MIN) return std::nullopt;
        a[r * cols + k] = static_cast<std::int64_t>(v);
      }
    }
    prev = p;
    ++rank;
  }
  return rank;
}

inline std::size_t bareiss_rank_big(const IntMatrix& m) {
  std::vector<BigInt> a(m.data.begin(), m.data.end());
  const std::size_t rows = m.rows, cols = m.cols;
  std::size_t rank = 0;
  BigInt prev = 1;
  for (std::size_t c = 0; c < cols && rank < rows; ++c) {
    std::size_t piv = rank;
    while (piv < rows && a[piv * cols + c] == 0) ++piv;
    if (piv == rows) continue;
    if (piv != rank)
      for (std::size_t k = 0; k < cols; ++k) std::swap(a[piv * cols + k], a[rank * cols + k]);
    const BigInt p = a[rank * cols + c];
    for (std::size_t r = rank + 1; r < rows; ++r) {
      const BigInt f = a[r * cols + c];
      for (std::size_t k = c; k < cols; ++k) a[r * cols + k] = (p * a[r * cols + k] - f * a[rank * cols + k]) / prev;
    }
    prev = p;
    ++rank;
  }
  return rank;
}

}  // namespace detail

/// Exact rank over the rationals.
inline std::size_t exact_rank(const IntMatrix& m) {
  if (m.rows == 0 || m.cols == 0) return 0;
  // Eliminate along the shorter side.
  const bool flip = m.rows > m.cols;
  const IntMatrix& src = m;
  IntMatrix t;
  if (flip) t = m.transpose();
  const IntMatrix& a = flip ? t : src;
  if (auto r = detail::bareiss_rank_i64(a.data, a.rows, a.cols)) return *r;
  return detail::bareiss_rank_big(a);
}

/// Numerical rank via SVD: singular values above tol * max(1, sigma_max).
inline std::size_t float_rank(const IntMatrix& m, double tol = 1e-9) {
  if (m.rows == 0 || m.cols == 0) return 0;
  Eigen::MatrixXd a(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
        static_cast<double>(m(r, c));
  // BDCSVD in Eigen 3.4 can index out of range while deflating some
  // rank-deficient 0/1 matrices; Jacobi is slower but robust at these sizes.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  const double cut = tol * std::max(1.0, s.size() > 0 ? s(0) : 0.0);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++rank;
  return rank;
}

/// Basis of the right null space over Q, read off the reduced row echelon
/// form: one vector per free column, with a 1 in that column.
inline std::vector<std::vector<Rational>> rational_null_space(const IntMatrix& m) {
  std::vector<std::vector<Rational>> a(m.rows, std::vector<Rational>(m.cols));
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) a[r][c] = m(r, c);

  std::vector<std::size_t> pivot_cols;
  std::size_t row = 0;
  for (std::size_t c = 0; c < m.cols && row < m.rows; ++c) {
    std::size_t piv = row;
    while (piv < m.rows && a[piv][c] == 0) ++piv;
    if (piv == m.rows) continue;
    std::swap(a[piv], a[row]);
    const Rational p = a[row][c];
    for (auto& v : a[row]) v /= p;
    for (std::size_t r = 0; r < m.rows; ++r) {
      if (r == row || a[r][c] == 0) continue;
      const Rational f = a[r][c];
      for (std::size_t k = c; k < m.cols; ++k) a[r][k] -= f * a[row][k];
    }
    pivot_cols.push_back(c);
    ++row;
  }

  std::vector<char> is_pivot(m.cols, 0);
  for (auto c : pivot_cols) is_pivot[c] = 1;
  std::vector<std::vector<Rational>> basis;
  for (std::size_t free = 0; free < m.cols; ++free) {
    if (is_pivot[free]) continue;
    std::vector<Rational> v(m.cols);
    v[free] = 1;
    for (std::size_t i = 0; i < pivot_cols.size(); ++i) v[pivot_cols[i]] = -a[i][free];
    basis.push_back(std::move(v));
  }
  return basis;
}

/// Smallest integer multiple of a rational vector (denominators cleared,
/// common factor removed).
inline std::vector<BigInt> primitive_integer_vector(const std::vector<Rational>& v) {
  BigInt lcm = 1;
  for (const auto& x : v) lcm = boost::multiprecision::lcm(lcm, boost::multiprecision::denominator(x));
  std::vector<BigInt> out;
  out.reserve(v.size());
  BigInt g = 0;
  for (const auto& x : v) {
    out.push_back(boost::multiprecision::numerator(x) * (lcm / boost::multiprecision::denominator(x)));
    g = boost::multiprecision::gcd(g, out.back());
  }
  if (g > 1)
    for (auto& x : out) x /= g;
  return out;
}

/// Exact product of an integer matrix with a rational vector.
inline std::vector<Rational> apply_exact(const IntMatrix& m, const std::vector<Rational>& v) {
  if (v.size() != m.cols) throw InvalidInput("apply_exact: dimension mismatch");
  std::vector<Rational> out(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c)
      if (m(r, c) != 0) out[r] += v[c] * m(r, c);
  return out;
}

/// Least-squares fit A x ~ b; returns the residual norm ||A x - b||_2.
inline double least_squares_residual(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
  return (a * x - b).norm();
}

}  // namespace sheafnet
