#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "featline/bdfla.hpp"
#include "featline/dataset.hpp"
#include "featline/errors.hpp"
#include "featline/matcore.hpp"

namespace featline {

enum class MapKind { pca, lda, udnfla };

/// Affine map x ↦ basisᵀ·(x − mean) on column vectors.
struct LinearMap {
  Mat basis;  // input_dim × output_dim
  Mat mean;   // input_dim × 1
  MapKind kind = MapKind::pca;
  std::vector<double> eigenvalues;  // paired with basis columns

  std::size_t input_dim() const noexcept { return basis.rows(); }
  std::size_t output_dim() const noexcept { return basis.cols(); }

  Mat apply(const Mat& x) const { return matmul_tn(basis, x - mean); }
  Mat reconstruct(const Mat& y) const { return mean + matmul(basis, y); }
};

/// Keeps the first d basis columns. Every fit here returns nested bases, so
/// truncating a larger fit equals fitting with d directly.
inline LinearMap truncate(const LinearMap& map, std::size_t d) {
  LinearMap out = map;
  out.basis = leading_columns(map.basis, d);
  out.eigenvalues.resize(d);
  return out;
}

enum class MapSide { rows, cols };

/// One-sided projection X ↦ basisᵀ·X on matrix samples.
struct SideMap {
  Mat basis;  // D1 × d, orthonormal columns
  MapSide side = MapSide::rows;
  std::vector<double> eigenvalues;

  Mat apply(const Mat& x) const { return matmul_tn(basis, x); }
};

inline SideMap truncate(const SideMap& map, std::size_t d) {
  SideMap out = map;
  out.basis = leading_columns(map.basis, d);
  out.eigenvalues.resize(d);
  return out;
}

struct EnergyFraction {
  double value = 0.97;
};
struct TargetDim {
  std::size_t value = 1;
};
using PcaTarget = std::variant<EnergyFraction, TargetDim>;

namespace detail {

inline void require_columns(std::span<const Mat> v, std::size_t min_count, const char* who) {
  if (v.size() < min_count) {
    throw InsufficientDataError(std::string(who) + " needs at least " + std::to_string(min_count) +
                                " samples, got " + std::to_string(v.size()));
  }
  for (const auto& x : v) {
    if (x.cols() != 1 || x.rows() != v[0].rows()) {
      throw ShapeError(std::string(who) + " expects equal-length column vectors, got " +
                       x.shape_string());
    }
  }
}

inline Mat mean_of(std::span<const Mat> xs) {
  Mat m = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) m += xs[i];
  m *= 1.0 / static_cast<double>(xs.size());
  return m;
}

// dim × N matrix whose columns are x_i − mean.
inline Mat centered_columns(std::span<const Mat> xs, const Mat& mean) {
  Mat c(xs[0].rows(), xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j)
    for (std::size_t i = 0; i < c.rows(); ++i) c(i, j) = xs[j](i, 0) - mean(i, 0);
  return c;
}

inline std::map<int, std::vector<std::size_t>> group_labels(std::span<const int> labels) {
  std::map<int, std::vector<std::size_t>> g;
  for (std::size_t i = 0; i < labels.size(); ++i) g[labels[i]].push_back(i);
  return g;
}

}  // namespace detail

/// PCA on column vectors. The covariance is (1/N)·Σ(x − x̄)(x − x̄)ᵀ; when
/// the input dimension exceeds N the N×N Gram matrix is decomposed instead.
/// Only directions with eigenvalue above 1e-12·λ_max count towards the rank.
inline LinearMap pca_fit(std::span<const Mat> vectors, PcaTarget target) {
  detail::require_columns(vectors, 2, "pca_fit");
  const std::size_t dim = vectors[0].rows();
  const std::size_t n = vectors.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  LinearMap map;
  map.kind = MapKind::pca;
  map.mean = detail::mean_of(vectors);
  const Mat xc = detail::centered_columns(vectors, map.mean);

  EigenResult eig;
  const bool gram = dim > n;
  if (gram) {
    eig = sym_eig(matmul_tn(xc, xc) * inv_n);
  } else {
    eig = sym_eig(matmul_nt(xc, xc) * inv_n);
  }

  const double top = eig.values.empty() ? 0.0 : eig.values.front();
  std::size_t rank = 0;
  while (rank < eig.values.size() && top > 0.0 && eig.values[rank] > 1e-12 * top) ++rank;

  std::size_t d = 0;
  if (const auto* e = std::get_if<EnergyFraction>(&target)) {
    if (!(e->value > 0.0 && e->value <= 1.0)) {
      throw ConfigError("PCA energy fraction must lie in (0, 1]");
    }
    if (rank == 0) throw DomainError("zero-variance input: every vector is identical");
    double total = 0.0;
    for (std::size_t k = 0; k < rank; ++k) total += eig.values[k];
    double cum = 0.0;
    while (d < rank) {
      cum += eig.values[d++];
      if (cum >= e->value * total) break;
    }
  } else {
    d = std::get<TargetDim>(target).value;
    if (d == 0) throw ConfigError("PCA target dimension must be positive");
    if (d > rank) {
      throw InsufficientDataError("PCA target dimension " + std::to_string(d) +
                                  " exceeds covariance rank " + std::to_string(rank));
    }
  }

  map.eigenvalues.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(d));
  if (gram) {
    // v_k = Xc·u_k / √(N·λ_k)
    Mat basis = matmul(xc, leading_columns(eig.vectors, d));
    for (std::size_t k = 0; k < d; ++k) {
      const double s = 1.0 / std::sqrt(static_cast<double>(n) * eig.values[k]);
      for (std::size_t i = 0; i < dim; ++i) basis(i, k) *= s;
    }
    map.basis = orthonormalize_columns(basis);
    detail::normalize_signs(map.basis);
  } else {
    map.basis = leading_columns(eig.vectors, d);
  }
  return map;
}

/// Fisher LDA: top-d generalized eigenvectors of (S_b, S_w), both scaled by
/// 1/N. d is limited to classes − 1.
inline LinearMap lda_fit(std::span<const Mat> vectors, std::span<const int> labels, std::size_t d) {
  detail::require_columns(vectors, 2, "lda_fit");
  if (labels.size() != vectors.size()) throw ShapeError("lda_fit: label count mismatch");
  const auto groups = detail::group_labels(labels);
  if (groups.size() < 2) throw InsufficientDataError("lda_fit needs at least 2 classes");
  if (d == 0 || d > groups.size() - 1) {
    throw DomainError("LDA dimension " + std::to_string(d) + " outside [1, classes − 1 = " +
                      std::to_string(groups.size() - 1) + "]");
  }
  const std::size_t dim = vectors[0].rows();
  const double inv_n = 1.0 / static_cast<double>(vectors.size());

  LinearMap map;
  map.kind = MapKind::lda;
  map.mean = detail::mean_of(vectors);
  Mat sw(dim, dim), sb(dim, dim);
  for (const auto& [label, members] : groups) {
    Mat mc(dim, 1);
    for (std::size_t i : members) mc += vectors[i];
    mc *= 1.0 / static_cast<double>(members.size());
    for (std::size_t i : members) {
      const Mat dv = vectors[i] - mc;
      sw += matmul_nt(dv, dv);
    }
    const Mat db = mc - map.mean;
    sb.add_scaled(matmul_nt(db, db), static_cast<double>(members.size()));
  }
  sw *= inv_n;
  sb *= inv_n;

  EigenResult eig;
  try {
    eig = gen_sym_eig(sb, sw);
  } catch (const ConditioningError& e) {
    throw ConditioningError(
        "within-class scatter is singular; reduce dimension with PCA first (" +
            std::string(e.what()) + ")",
        e.smallest_eigenvalue());
  }
  map.basis = leading_columns(eig.vectors, d);
  map.eigenvalues.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(d));
  return map;
}

/// Matrices of the uncorrelated feature-line discriminant problem.
struct UdnflaProblem {
  Mat within;   // A: Σ (x_i − x*)(x_i − x*)ᵀ / (N·N_i) over same-class lines
  Mat between;  // B: same over other-class lines with 1/(N·M_i)
  Mat total;    // S_t: (1/N)·Σ (x_i − x̄)(x_i − x̄)ᵀ
  Mat mean;
};

inline UdnflaProblem udnfla_problem(std::span<const Mat> vectors, std::span<const int> labels,
                                    AnchorLines anchor_lines = AnchorLines::exclude) {
  detail::require_columns(vectors, 2, "udnfla_fit");
  if (labels.size() != vectors.size()) throw ShapeError("udnfla_fit: label count mismatch");
  const auto train = LabeledDataset::from(vectors, labels);
  const auto assignments = assign_lines(train, anchor_lines);
  // Vectors are D×1 matrices, so the row-side scatter with r = [1] is
  // exactly Σ w·(x_i − x*)(x_i − x*)ᵀ.
  const auto s = scatter_row_side(train, assignments, Mat::identity(1));

  UdnflaProblem p;
  p.within = s.within;
  p.between = s.between;
  p.mean = detail::mean_of(vectors);
  const Mat xc = detail::centered_columns(vectors, p.mean);
  p.total = matmul_nt(xc, xc) * (1.0 / static_cast<double>(vectors.size()));
  return p;
}

/// Minimizes tr(Wᵀ(A − B)W) subject to Wᵀ·S_t·W = I: the d generalized
/// eigenvectors of (A − B, S_t) with the smallest eigenvalues, smallest first.
inline LinearMap udnfla_fit(const UdnflaProblem& p, std::size_t d) {
  const std::size_t dim = p.total.rows();
  if (d == 0 || d > dim) {
    throw DomainError("UDNFLA dimension " + std::to_string(d) + " outside [1, " +
                      std::to_string(dim) + "]");
  }
  const auto eig = gen_sym_eig(p.within - p.between, p.total);
  LinearMap map;
  map.kind = MapKind::udnfla;
  map.mean = p.mean;
  map.basis = Mat(dim, d);
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t src = dim - 1 - k;
    for (std::size_t i = 0; i < dim; ++i) map.basis(i, k) = eig.vectors(i, src);
    map.eigenvalues.push_back(eig.values[src]);
  }
  return map;
}

inline LinearMap udnfla_fit(std::span<const Mat> vectors, std::span<const int> labels, std::size_t d,
                            AnchorLines anchor_lines = AnchorLines::exclude) {
  return udnfla_fit(udnfla_problem(vectors, labels, anchor_lines), d);
}

namespace detail {

inline void require_matrices(std::span<const Mat> xs, std::size_t min_count, const char* who) {
  if (xs.size() < min_count) {
    throw InsufficientDataError(std::string(who) + " needs at least " + std::to_string(min_count) +
                                " samples");
  }
  for (const auto& x : xs) {
    if (!x.same_shape(xs[0])) throw ShapeError(std::string(who) + ": mixed sample shapes");
  }
}

}  // namespace detail

/// 2D-PCA on the row dimension: top-d eigenvectors of
/// (1/N)·Σ (X − X̄)(X − X̄)ᵀ. Features are basisᵀ·X (d × D2).
inline SideMap twod_pca_fit(std::span<const Mat> samples, std::size_t d) {
  detail::require_matrices(samples, 2, "twod_pca_fit");
  const std::size_t rows = samples[0].rows();
  if (d == 0 || d > rows) {
    throw DomainError("2D-PCA dimension " + std::to_string(d) + " outside [1, " + std::to_string(rows) + "]");
  }
  const Mat mean = detail::mean_of(samples);
  Mat cov(rows, rows);
  for (const auto& x : samples) {
    const Mat c = x - mean;
    cov += matmul_nt(c, c);
  }
  cov *= 1.0 / static_cast<double>(samples.size());
  const auto eig = sym_eig(cov);
  SideMap map;
  map.basis = leading_columns(eig.vectors, d);
  map.eigenvalues.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(d));
  return map;
}

/// 2D-LDA on the row dimension: top-d generalized eigenvectors of the
/// one-sided image scatters (S_b, S_w), orthonormalized in order.
inline SideMap twod_lda_fit(std::span<const Mat> samples, std::span<const int> labels, std::size_t d) {
  detail::require_matrices(samples, 2, "twod_lda_fit");
  if (labels.size() != samples.size()) throw ShapeError("twod_lda_fit: label count mismatch");
  const auto groups = detail::group_labels(labels);
  if (groups.size() < 2) throw InsufficientDataError("twod_lda_fit needs at least 2 classes");
  const std::size_t rows = samples[0].rows();
  if (d == 0 || d > rows) {
    throw DomainError("2D-LDA dimension " + std::to_string(d) + " outside [1, " + std::to_string(rows) + "]");
  }
  const Mat mean = detail::mean_of(samples);
  Mat sw(rows, rows), sb(rows, rows);
  for (const auto& [label, members] : groups) {
    Mat mc(samples[0].rows(), samples[0].cols());
    for (std::size_t i : members) mc += samples[i];
    mc *= 1.0 / static_cast<double>(members.size());
    for (std::size_t i : members) {
      const Mat c = samples[i] - mc;
      sw += matmul_nt(c, c);
    }
    const Mat db = mc - mean;
    sb.add_scaled(matmul_nt(db, db), static_cast<double>(members.size()));
  }
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  sw *= inv_n;
  sb *= inv_n;

  EigenResult eig;
  try {
    eig = gen_sym_eig(sb, sw);
  } catch (const ConditioningError& e) {
    throw ConditioningError(
        "2D within-class scatter is singular (" + std::string(e.what()) + ")",
        e.smallest_eigenvalue());
  }
  SideMap map;
  map.basis = orthonormalize_columns(leading_columns(eig.vectors, d));
  detail::normalize_signs(map.basis);
  map.eigenvalues.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(d));
  return map;
}

}  // namespace featline
