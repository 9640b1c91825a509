#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "featline/errors.hpp"

namespace featline {

/// Dense real matrix stored row-major.
///
/// A default-constructed Mat is the empty 0x0 matrix; every other Mat has
/// positive dimensions.
class Mat {
 public:
  Mat() = default;

  Mat(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    if (rows == 0 || cols == 0) {
      throw ShapeError("matrix dimensions must be positive, got " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    }
    data_.assign(rows * cols, 0.0);
  }

  Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
      : Mat(rows, cols) {
    if (data.size() != rows * cols) {
      throw ShapeError("expected " + std::to_string(rows * cols) +
                       " entries, got " + std::to_string(data.size()));
    }
    data_ = std::move(data);
  }

  Mat(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    *this = Mat(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged initializer list");
      std::copy(row.begin(), row.end(), data_.begin() + i * c);
      ++i;
    }
  }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  /// Column vector (n x 1).
  static Mat column(std::vector<double> values) {
    const std::size_t n = values.size();
    return Mat(n, 1, std::move(values));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool same_shape(const Mat& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  double& operator()(std::size_t i, std::size_t j) noexcept {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::span<double> row(std::size_t i) noexcept {
    return std::span<double>(data_).subspan(i * cols_, cols_);
  }
  std::span<const double> row(std::size_t i) const noexcept {
    return std::span<const double>(data_).subspan(i * cols_, cols_);
  }

  bool operator==(const Mat&) const = default;

  Mat& operator+=(const Mat& o) {
    require_same_shape(o, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Mat& operator-=(const Mat& o) {
    require_same_shape(o, "-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Mat& operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
  }

  /// this += s * o
  Mat& add_scaled(const Mat& o, double s) {
    require_same_shape(o, "add_scaled");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * o.data_[k];
    return *this;
  }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  void require_same_shape(const Mat& o, const char* op) const {
    if (!same_shape(o)) {
      throw ShapeError(std::string(op) + ": " + shape_string() + " vs " +
                       o.shape_string());
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Mat operator+(Mat a, const Mat& b) { return a += b; }
inline Mat operator-(Mat a, const Mat& b) { return a -= b; }
inline Mat operator*(Mat a, double s) { return a *= s; }
inline Mat operator*(double s, Mat a) { return a *= s; }

inline Mat transpose(const Mat& a) {
  if (a.empty()) return {};
  Mat t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// a * b
inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows() || a.empty() || b.empty()) {
    throw ShapeError("matmul: " + a.shape_string() + " * " + b.shape_string());
  }
  Mat c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

/// aᵀ * b without forming the transpose.
inline Mat matmul_tn(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.empty() || b.empty()) {
    throw ShapeError("matmul_tn: " + a.shape_string() + "ᵀ * " +
                     b.shape_string());
  }
  Mat c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto out = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aki * brow[j];
    }
  }
  return c;
}

/// a * bᵀ without forming the transpose.
inline Mat matmul_nt(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols() || a.empty() || b.empty()) {
    throw ShapeError("matmul_nt: " + a.shape_string() + " * " +
                     b.shape_string() + "ᵀ");
  }
  Mat c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
  return c;
}

/// Frobenius inner product Σ a_ij·b_ij.
inline double frob_inner(const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("frob_inner: " + a.shape_string() + " vs " +
                     b.shape_string());
  }
  const auto x = a.data();
  const auto y = b.data();
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
  return s;
}

inline double frob_norm(const Mat& a) { return std::sqrt(frob_inner(a, a)); }

inline double trace(const Mat& a) {
  if (a.rows() != a.cols()) throw ShapeError("trace of " + a.shape_string());
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
  return s;
}

inline bool all_finite(const Mat& a) noexcept {
  return std::all_of(a.data().begin(), a.data().end(),
                     [](double v) { return std::isfinite(v); });
}

/// (a + aᵀ) / 2
inline Mat symmetrize(const Mat& a) {
  if (a.rows() != a.cols()) {
    throw ShapeError("symmetrize of " + a.shape_string());
  }
  Mat s = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  return s;
}

/// First k columns of m.
inline Mat leading_columns(const Mat& m, std::size_t k) {
  if (k == 0 || k > m.cols()) {
    throw ShapeError("cannot take " + std::to_string(k) + " columns of " +
                     m.shape_string());
  }
  Mat out(m.rows(), k);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < k; ++j) out(i, j) = m(i, j);
  return out;
}

inline Mat column_of(const Mat& m, std::size_t j) {
  Mat out(m.rows(), 1);
  for (std::size_t i = 0; i < m.rows(); ++i) out(i, 0) = m(i, j);
  return out;
}

/// Modified Gram-Schmidt (two passes) over the columns, in order, so the
/// span of every leading block of columns is preserved.
inline Mat orthonormalize_columns(const Mat& m) {
  Mat q = m;
  for (std::size_t j = 0; j < q.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t p = 0; p < j; ++p) {
        double dot = 0.0;
        for (std::size_t i = 0; i < q.rows(); ++i) dot += q(i, p) * q(i, j);
        for (std::size_t i = 0; i < q.rows(); ++i) q(i, j) -= dot * q(i, p);
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < q.rows(); ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) throw DomainError("columns are linearly dependent");
    for (std::size_t i = 0; i < q.rows(); ++i) q(i, j) /= norm;
  }
  return q;
}

/// Eigen-decomposition of a symmetric (or symmetric-definite) problem.
///
/// Eigenvalues are sorted in descending algebraic order and column k of
/// `vectors` pairs with `values[k]`. In every column the entry of largest
/// magnitude is non-negative (lowest index wins ties).
struct EigenResult {
  std::vector<double> values;
  Mat vectors;
};

namespace detail {

// Householder reduction of a symmetric matrix to tridiagonal form. On exit v
// holds the accumulated orthogonal transform, d the diagonal and e the
// subdiagonal (e[0] = 0).
inline void tridiagonalize(std::vector<double>& v, std::size_t n,
                           std::vector<double>& d, std::vector<double>& e) {
  auto V = [&](std::size_t i, std::size_t j) -> double& { return v[i * n + j]; };
  for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += V(k, j) * d[k];
          e[k] += V(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) {
          V(k, j) -= (f * e[k] + g * d[k]);
        }
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    V(n - 1, i) = V(i, i);
    V(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = V(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += V(k, i + 1) * V(k, j);
        for (std::size_t k = 0; k <= i; ++k) V(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = V(n - 1, j);
    V(n - 1, j) = 0.0;
  }
  V(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL iterations on the tridiagonal form, accumulating into v.
inline void tridiagonal_ql(std::vector<double>& v, std::size_t n,
                           std::vector<double>& d, std::vector<double>& e) {
  auto V = [&](std::size_t i, std::size_t j) -> double& { return v[i * n + j]; };
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  constexpr double eps = 0x1p-52;
  const int max_iter = 60 + 30 * static_cast<int>(n);
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > max_iter) {
          throw DomainError("symmetric QL iteration did not converge");
        }
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = c, c3 = c;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          for (std::size_t k = 0; k < n; ++k) {
            h = V(k, ii + 1);
            V(k, ii + 1) = s * V(k, ii) + c * h;
            V(k, ii) = c * V(k, ii) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

// Makes the largest-magnitude entry of every column non-negative.
inline void normalize_signs(Mat& vectors) {
  for (std::size_t j = 0; j < vectors.cols(); ++j) {
    std::size_t best = 0;
    double best_abs = -1.0;
    for (std::size_t i = 0; i < vectors.rows(); ++i) {
      const double a = std::abs(vectors(i, j));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (vectors(best, j) < 0.0) {
      for (std::size_t i = 0; i < vectors.rows(); ++i) vectors(i, j) = -vectors(i, j);
    }
  }
}

inline void require_square_finite(const Mat& m, const char* what) {
  if (m.empty() || m.rows() != m.cols()) {
    throw ShapeError(std::string(what) + " needs a square matrix, got " +
                     m.shape_string());
  }
  if (!all_finite(m)) {
    throw DomainError(std::string(what) + " input has non-finite entries");
  }
}

// Lower-triangular Cholesky factor; returns false if a pivot is not positive.
inline bool cholesky(const Mat& b, Mat& g) {
  const std::size_t n = b.rows();
  g = Mat(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = b(j, j);
    for (std::size_t k = 0; k < j; ++k) s -= g(j, k) * g(j, k);
    if (!(s > 0.0)) return false;
    const double gjj = std::sqrt(s);
    g(j, j) = gjj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = b(i, j);
      for (std::size_t k = 0; k < j; ++k) t -= g(i, k) * g(j, k);
      g(i, j) = t / gjj;
    }
  }
  return true;
}

// Solves g·x = rhs column-wise for lower-triangular g.
inline Mat forward_solve(const Mat& g, const Mat& rhs) {
  const std::size_t n = g.rows();
  Mat x = rhs;
  for (std::size_t c = 0; c < rhs.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= g(i, k) * x(k, c);
      x(i, c) = s / g(i, i);
    }
  }
  return x;
}

// Solves gᵀ·x = rhs column-wise for lower-triangular g.
inline Mat backward_solve_transposed(const Mat& g, const Mat& rhs) {
  const std::size_t n = g.rows();
  Mat x = rhs;
  for (std::size_t c = 0; c < rhs.cols(); ++c) {
    for (std::size_t i = n; i-- > 0;) {
      double s = x(i, c);
      for (std::size_t k = i + 1; k < n; ++k) s -= g(k, i) * x(k, c);
      x(i, c) = s / g(i, i);
    }
  }
  return x;
}

}  // namespace detail

/// Full spectrum of a symmetric matrix (Householder tridiagonalization
/// followed by implicit QL). The input is symmetrized before solving.
inline EigenResult sym_eig(const Mat& m) {
  detail::require_square_finite(m, "sym_eig");
  const std::size_t n = m.rows();
  const Mat s = symmetrize(m);

  std::vector<double> v(s.data().begin(), s.data().end());
  std::vector<double> d(n, 0.0);
  std::vector<double> e(n, 0.0);
  if (n == 1) {
    d[0] = s(0, 0);
    v[0] = 1.0;
  } else {
    detail::tridiagonalize(v, n, d, e);
    detail::tridiagonal_ql(v, n, d, e);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });

  EigenResult result;
  result.values.resize(n);
  result.vectors = Mat(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    result.values[k] = d[src];
    for (std::size_t i = 0; i < n; ++i) result.vectors(i, k) = v[i * n + src];
  }
  detail::normalize_signs(result.vectors);
  return result;
}

/// Generalized symmetric-definite problem a·v = λ·b·v.
///
/// Reduced through the Cholesky factor b = G·Gᵀ to the ordinary problem
/// G⁻¹·a·G⁻ᵀ and back-transformed, so the returned columns are
/// b-orthonormal. Throws ConditioningError when the smallest eigenvalue of b
/// is not above 1e-10·‖b‖.
inline EigenResult gen_sym_eig(const Mat& a, const Mat& b) {
  detail::require_square_finite(a, "gen_sym_eig");
  detail::require_square_finite(b, "gen_sym_eig");
  if (!a.same_shape(b)) {
    throw ShapeError("gen_sym_eig: " + a.shape_string() + " vs metric " +
                     b.shape_string());
  }
  const Mat bs = symmetrize(b);
  const double smallest = sym_eig(bs).values.back();
  const double threshold = 1e-10 * frob_norm(bs);
  Mat g;
  if (!(smallest > threshold) || !detail::cholesky(bs, g)) {
    throw ConditioningError(
        "metric matrix is not positive definite (smallest eigenvalue " +
            std::to_string(smallest) + ", threshold " +
            std::to_string(threshold) + ")",
        smallest);
  }

  // c = G⁻¹ a G⁻ᵀ
  const Mat left = detail::forward_solve(g, symmetrize(a));
  const Mat c = transpose(detail::forward_solve(g, transpose(left)));
  EigenResult reduced = sym_eig(c);

  EigenResult result;
  result.values = std::move(reduced.values);
  result.vectors = detail::backward_solve_transposed(g, reduced.vectors);
  detail::normalize_signs(result.vectors);
  return result;
}

}  // namespace featline
