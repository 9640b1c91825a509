#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "featline/dataset.hpp"
#include "featline/errors.hpp"
#include "featline/featureline.hpp"
#include "featline/matcore.hpp"

namespace featline {

enum class LineKind { within, between };

/// Projection of sample `anchor` onto the line through m and n, stored in
/// factored form X_m + mu·(X_n − X_m).
struct LineAssignment {
  std::size_t anchor = 0;
  std::size_t m = 0;
  std::size_t n = 0;
  double mu = 0.0;
  LineKind kind = LineKind::within;

  bool operator==(const LineAssignment&) const = default;
};

/// Every (anchor, line) pair entering the feature-line scatters.
///
/// Each residual D = X_i − X_m − μ(X_n − X_m) is a linear combination of at
/// most three samples, D = Σ_k c_k X_k. The weighted sums of c·cᵀ over all
/// within (between) assignments are kept as N×N coefficient matrices, so a
/// scatter Σ w·D·P·Dᵀ collapses to Σ_{k,k'} C_{kk'}·X_k·P·X_k'ᵀ.
struct LineAssignments {
  std::vector<LineAssignment> items;        // by anchor; within before between
  std::vector<std::size_t> within_count;    // N_i
  std::vector<std::size_t> between_count;   // M_i
  std::size_t degenerate_skipped = 0;       // distinct degenerate lines
  Mat within_coef;                          // Σ c·cᵀ / (N·N_i)
  Mat between_coef;                         // Σ c·cᵀ / (N·M_i)

  std::size_t sample_count() const noexcept { return within_count.size(); }

  double weight(const LineAssignment& a) const {
    const double n = static_cast<double>(sample_count());
    const std::size_t k = a.kind == LineKind::within ? within_count[a.anchor]
                                                     : between_count[a.anchor];
    return 1.0 / (n * static_cast<double>(k));
  }
};

/// Whether a sample's within-class lines include those through itself.
/// Such lines have zero residual and only dilute the 1/N_i weight.
enum class AnchorLines { exclude, include };

/// Assigns every training sample to its same-class lines (by default only
/// those not passing through it) and to all other-class lines. μ is
/// computed once in image space and never depends on the projection maps.
inline LineAssignments assign_lines(const LabeledDataset& train,
                                    AnchorLines anchor_lines = AnchorLines::exclude) {
  if (train.class_count() < 2) {
    throw InsufficientDataError("feature-line scatters need at least 2 classes");
  }
  for (const auto& [label, members] : train.classes()) {
    if (members.size() < 3) {
      throw InsufficientDataError("class " + std::to_string(label) + " has " +
                                  std::to_string(members.size()) + " samples, need 3");
    }
  }

  const LineSet all = enumerate_lines(train);
  const std::size_t n = train.size();

  struct LineDir {
    FeatureLine line;
    Mat dir;
    double len2;
  };
  std::vector<LineDir> dirs;
  dirs.reserve(all.total());
  for (const auto& [label, group] : all.by_class) {
    for (const auto& line : group) {
      Mat d = train.matrix(line.n) - train.matrix(line.m);
      const double len2 = frob_inner(d, d);
      dirs.push_back({line, std::move(d), len2});
    }
  }

  LineAssignments out;
  out.degenerate_skipped = all.degenerate_skipped;
  out.within_count.assign(n, 0);
  out.between_count.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Mat& xi = train.matrix(i);
    const int li = train.label(i);
    for (int pass = 0; pass < 2; ++pass) {
      const LineKind kind = pass == 0 ? LineKind::within : LineKind::between;
      for (const auto& ld : dirs) {
        const bool same = ld.line.label == li;
        if (same != (kind == LineKind::within)) continue;
        if (same && anchor_lines == AnchorLines::exclude && (ld.line.m == i || ld.line.n == i)) continue;
        const double mu = frob_inner(xi - train.matrix(ld.line.m), ld.dir) / ld.len2;
        out.items.push_back({i, ld.line.m, ld.line.n, mu, kind});
        ++(kind == LineKind::within ? out.within_count[i] : out.between_count[i]);
      }
    }
    if (out.within_count[i] == 0) {
      throw InsufficientDataError("sample " + std::to_string(i) +
                                  " has no usable within-class lines");
    }
    if (out.between_count[i] == 0) {
      throw InsufficientDataError("sample " + std::to_string(i) +
                                  " has no usable between-class lines");
    }
  }

  out.within_coef = Mat(n, n);
  out.between_coef = Mat(n, n);
  for (const auto& a : out.items) {
    Mat& c = a.kind == LineKind::within ? out.within_coef : out.between_coef;
    const double w = out.weight(a);
    const std::size_t idx[3] = {a.anchor, a.m, a.n};
    const double coef[3] = {1.0, -(1.0 - a.mu), -a.mu};
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) c(idx[p], idx[q]) += w * coef[p] * coef[q];
  }
  return out;
}

/// Within/between pair of scatter matrices.
struct ScatterPair {
  Mat within;
  Mat between;
};

namespace detail {

inline void require_consistent(const LabeledDataset& train, const LineAssignments& a) {
  if (a.sample_count() != train.size() || a.within_coef.rows() != train.size()) {
    throw ShapeError("line assignments were built for " + std::to_string(a.sample_count()) +
                     " samples, training set has " + std::to_string(train.size()));
  }
}

// Σ_{k,k'} C_{kk'}·A_k·B_k'ᵀ over the projected samples, i.e. with
// Z = C·A stacked: Σ_k A_k·Z_kᵀ (transposed = false) or Σ_k A_kᵀ·Z_k.
inline Mat coefficient_scatter(const Mat& coef, const std::vector<Mat>& projected, bool transposed) {
  const std::size_t n = projected.size();
  const std::size_t r = projected[0].rows(), c = projected[0].cols();
  const std::size_t out_dim = transposed ? c : r;
  Mat acc(out_dim, out_dim);
  Mat z(r, c);
  for (std::size_t k = 0; k < n; ++k) {
    std::fill(z.data().begin(), z.data().end(), 0.0);
    for (std::size_t kp = 0; kp < n; ++kp) {
      const double w = coef(k, kp);
      if (w != 0.0) z.add_scaled(projected[kp], w);
    }
    acc += transposed ? matmul_tn(projected[k], z) : matmul_nt(projected[k], z);
  }
  return symmetrize(acc);
}

}  // namespace detail

/// Row-side scatters (D1×D1) for a fixed column map r:
/// Σ w·D·r·rᵀ·Dᵀ over within and between assignments.
inline ScatterPair scatter_row_side(const LabeledDataset& train, const LineAssignments& assignments,
                                    const Mat& r) {
  detail::require_consistent(train, assignments);
  if (r.rows() != train.cols()) {
    throw ShapeError("column map has " + std::to_string(r.rows()) + " rows, samples have " +
                     std::to_string(train.cols()) + " columns");
  }
  std::vector<Mat> y;
  y.reserve(train.size());
  for (const auto& s : train.samples()) y.push_back(matmul(s.pixels, r));
  return {detail::coefficient_scatter(assignments.within_coef, y, false),
          detail::coefficient_scatter(assignments.between_coef, y, false)};
}

/// Column-side scatters (D2×D2) for a fixed row map l:
/// Σ w·Dᵀ·l·lᵀ·D over within and between assignments.
inline ScatterPair scatter_col_side(const LabeledDataset& train, const LineAssignments& assignments,
                                    const Mat& l) {
  detail::require_consistent(train, assignments);
  if (l.rows() != train.rows()) {
    throw ShapeError("row map has " + std::to_string(l.rows()) + " rows, samples have " +
                     std::to_string(train.rows()) + " rows");
  }
  std::vector<Mat> u;
  u.reserve(train.size());
  for (const auto& s : train.samples()) u.push_back(matmul_tn(l, s.pixels));
  return {detail::coefficient_scatter(assignments.within_coef, u, true),
          detail::coefficient_scatter(assignments.between_coef, u, true)};
}

struct FeatureLineScatter {
  double within = 0.0;   // S_wFL
  double between = 0.0;  // S_bFL
};

/// S_wFL and S_bFL summed term by term: the weighted squared norms of
/// lᵀ·D·r over every assignment, with D rebuilt from its stored μ.
inline FeatureLineScatter fl_scatter_direct(const LabeledDataset& train,
                                            const LineAssignments& assignments, const Mat& l,
                                            const Mat& r) {
  detail::require_consistent(train, assignments);
  if (l.rows() != train.rows() || r.rows() != train.cols()) {
    throw ShapeError("maps " + l.shape_string() + ", " + r.shape_string() +
                     " do not fit samples of " + train.matrix(0).shape_string());
  }
  FeatureLineScatter s;
  for (const auto& a : assignments.items) {
    Mat d = train.matrix(a.anchor) - train.matrix(a.m);
    d.add_scaled(train.matrix(a.n) - train.matrix(a.m), -a.mu);
    const Mat f = matmul(matmul_tn(l, d), r);
    (a.kind == LineKind::within ? s.within : s.between) += assignments.weight(a) * frob_inner(f, f);
  }
  return s;
}

/// J(l, r) = S_bFL − S_wFL, evaluated from the per-line sums.
inline double criterion_j(const LabeledDataset& train, const LineAssignments& assignments,
                          const Mat& l, const Mat& r) {
  const auto s = fl_scatter_direct(train, assignments, l, r);
  return s.between - s.within;
}

struct BdflaConfig {
  std::size_t d1 = 1;
  std::size_t d2 = 1;
  std::size_t t_max = 10;
  double epsilon = 1e-6;

  void validate(std::size_t rows, std::size_t cols) const {
    if (d1 < 1 || d1 > rows) {
      throw ConfigError("d1 = " + std::to_string(d1) + " outside [1, " + std::to_string(rows) + "]");
    }
    if (d2 < 1 || d2 > cols) {
      throw ConfigError("d2 = " + std::to_string(d2) + " outside [1, " + std::to_string(cols) + "]");
    }
    if (t_max < 1) throw ConfigError("t_max must be at least 1");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  }
};

struct BdflaModel {
  Mat l_map;  // D1 × d1, orthonormal columns
  Mat r_map;  // D2 × d2, orthonormal columns
  std::size_t iterations_run = 0;
  std::vector<double> j_history;
  bool converged = false;
  BdflaConfig config;

  std::size_t input_rows() const noexcept { return l_map.rows(); }
  std::size_t input_cols() const noexcept { return r_map.rows(); }
};

/// Alternating eigen-solves with precomputed assignments.
///
/// Starting from R = I, each iteration takes L as the top-d1 eigenvectors
/// of (g_b − g_w)(R) and then R as the top-d2 eigenvectors of
/// (h_b − h_w)(L), in algebraic eigenvalue order. J is recorded after each
/// R update. From the second iteration on, the loop stops once
/// ‖Lᵗ − Lᵗ⁻¹‖² + ‖Rᵗ − Rᵗ⁻¹‖² < epsilon.
inline BdflaModel fit(const LabeledDataset& train, const LineAssignments& assignments,
                      const BdflaConfig& cfg) {
  cfg.validate(train.rows(), train.cols());
  detail::require_consistent(train, assignments);

  BdflaModel model;
  model.config = cfg;
  Mat l_prev = Mat::identity(train.rows());
  Mat r_prev = Mat::identity(train.cols());
  for (std::size_t t = 1; t <= cfg.t_max; ++t) {
    const auto row = scatter_row_side(train, assignments, r_prev);
    const Mat g = row.between - row.within;
    if (!all_finite(g)) throw DomainError("non-finite row-side scatter at iteration " + std::to_string(t));
    Mat l = leading_columns(sym_eig(g).vectors, cfg.d1);

    const auto col = scatter_col_side(train, assignments, l);
    const Mat h = col.between - col.within;
    if (!all_finite(h)) throw DomainError("non-finite column-side scatter at iteration " + std::to_string(t));
    const auto eig = sym_eig(h);
    Mat r = leading_columns(eig.vectors, cfg.d2);

    double j = 0.0;
    for (std::size_t k = 0; k < cfg.d2; ++k) j += eig.values[k];
    model.j_history.push_back(j);
    model.iterations_run = t;

    const bool check = t >= 2;
    const double delta = check ? frob_inner(l - l_prev, l - l_prev) + frob_inner(r - r_prev, r - r_prev) : 0.0;
    l_prev = std::move(l);
    r_prev = std::move(r);
    if (check && delta < cfg.epsilon) {
      model.converged = true;
      break;
    }
  }
  model.l_map = std::move(l_prev);
  model.r_map = std::move(r_prev);
  return model;
}

inline BdflaModel fit(const LabeledDataset& train, const BdflaConfig& cfg) {
  cfg.validate(train.rows(), train.cols());
  return fit(train, assign_lines(train), cfg);
}

/// Bilinear feature lᵀ·image·r.
inline Mat extract(const BdflaModel& model, const Mat& image) {
  if (image.rows() != model.input_rows() || image.cols() != model.input_cols()) {
    throw ShapeError("image " + image.shape_string() + " vs model input " +
                     std::to_string(model.input_rows()) + "x" + std::to_string(model.input_cols()));
  }
  return matmul(matmul_tn(model.l_map, image), model.r_map);
}

}  // namespace featline
