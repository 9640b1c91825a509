#pragma once

// Random generators and brute-force oracles shared by the test suites. The
// oracles deliberately avoid the library's fast paths (coefficient-matrix
// scatters, Gram-expanded line distances) so they can check them.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "featline/featline.hpp"

namespace featline::testing {

inline Mat random_mat(SplitMix64& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                      double hi = 1.0) {
  Mat m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

inline Mat random_symmetric(SplitMix64& rng, std::size_t n, double scale = 1.0) {
  return symmetrize(random_mat(rng, n, n)) * scale;
}

/// Well-conditioned SPD matrix: AᵀA + n·I.
inline Mat random_spd(SplitMix64& rng, std::size_t n) {
  const Mat a = random_mat(rng, n, n);
  return matmul_tn(a, a) + Mat::identity(n) * static_cast<double>(n) * 0.1;
}

inline Mat random_orthonormal(SplitMix64& rng, std::size_t rows, std::size_t cols) {
  return orthonormalize_columns(random_mat(rng, rows, cols));
}

inline LabeledDataset random_dataset(SplitMix64& rng, std::size_t classes, std::size_t per_class,
                                     std::size_t rows, std::size_t cols) {
  std::vector<ImageSample> s;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t k = 0; k < per_class; ++k)
      s.push_back({random_mat(rng, rows, cols), static_cast<int>(c)});
  return LabeledDataset(std::move(s));
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// ‖VᵀV − I‖_max
inline double orthonormality_error(const Mat& v) {
  return max_abs_diff(matmul_tn(v, v), Mat::identity(v.cols()));
}

/// max over pairs of ‖M·v − λ·v‖
inline double max_eigen_residual(const Mat& m, const EigenResult& e) {
  double worst = 0.0;
  for (std::size_t k = 0; k < e.values.size(); ++k) {
    const Mat v = column_of(e.vectors, k);
    worst = std::max(worst, frob_norm(matmul(m, v) - v * e.values[k]));
  }
  return worst;
}

/// Σ w·D·r·rᵀ·Dᵀ accumulated line by line from explicit residual matrices.
inline ScatterPair oracle_row_scatter(const LabeledDataset& train, const LineAssignments& a, const Mat& r) {
  ScatterPair s{Mat(train.rows(), train.rows()), Mat(train.rows(), train.rows())};
  for (const auto& it : a.items) {
    const Mat proj = project_onto_line(train.matrix(it.anchor), train.matrix(it.m), train.matrix(it.n)).point;
    const Mat dr = matmul(train.matrix(it.anchor) - proj, r);
    (it.kind == LineKind::within ? s.within : s.between).add_scaled(matmul_nt(dr, dr), a.weight(it));
  }
  return s;
}

inline ScatterPair oracle_col_scatter(const LabeledDataset& train, const LineAssignments& a, const Mat& l) {
  ScatterPair s{Mat(train.cols(), train.cols()), Mat(train.cols(), train.cols())};
  for (const auto& it : a.items) {
    const Mat proj = project_onto_line(train.matrix(it.anchor), train.matrix(it.m), train.matrix(it.n)).point;
    const Mat ld = matmul_tn(l, train.matrix(it.anchor) - proj);
    (it.kind == LineKind::within ? s.within : s.between).add_scaled(matmul_tn(ld, ld), a.weight(it));
  }
  return s;
}

/// Classic vector NFL over plain std::vector<double> points: every
/// same-class pair, closed-form projection, ties to the first line in
/// (label, m, n) order.
struct VectorNflOracle {
  std::vector<std::vector<double>> points;
  std::vector<int> labels;

  int classify(const std::vector<double>& q) const {
    double best = std::numeric_limits<double>::infinity();
    int best_label = -1;
    int max_label = 0;
    for (int l : labels) max_label = std::max(max_label, l);
    for (int label = 0; label <= max_label; ++label) {
      for (std::size_t m = 0; m < points.size(); ++m) {
        if (labels[m] != label) continue;
        for (std::size_t n = m + 1; n < points.size(); ++n) {
          if (labels[n] != label) continue;
          double num = 0.0, den = 0.0;
          for (std::size_t k = 0; k < q.size(); ++k) {
            const double e = points[n][k] - points[m][k];
            num += (q[k] - points[m][k]) * e;
            den += e * e;
          }
          if (den == 0.0) continue;
          const double mu = num / den;
          double d2 = 0.0;
          for (std::size_t k = 0; k < q.size(); ++k) {
            const double p = points[m][k] + mu * (points[n][k] - points[m][k]);
            d2 += (q[k] - p) * (q[k] - p);
          }
          const double d = std::sqrt(d2);
          if (d < best) {
            best = d;
            best_label = label;
          }
        }
      }
    }
    return best_label;
  }
};

/// Two-class 4×4 images: class signal (±1 checker pattern) lives only in
/// rows 1–2 × columns 1–2; Gaussian noise σ everywhere.
inline LabeledDataset block_signal_dataset(SplitMix64& rng, std::size_t per_class, double sigma) {
  std::vector<ImageSample> s;
  for (int c = 0; c < 2; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      Mat x(4, 4);
      for (double& v : x.data()) v = sigma * rng.normal();
      const double a = c == 0 ? 1.0 : -1.0;
      x(1, 1) += a;
      x(2, 2) += a;
      x(1, 2) -= a;
      x(2, 1) -= a;
      s.push_back({x, c});
    }
  }
  return LabeledDataset(std::move(s));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path fresh_temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("featline-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Writes a small smooth-pattern PGM dataset: `classes` directories of
/// `per_class` rows×cols images whose class-specific pattern drifts slowly
/// with the sample index (mimicking pose sequences).
inline void write_synthetic_pgm_dataset(const std::filesystem::path& root, std::size_t classes,
                                        std::size_t per_class, std::size_t rows, std::size_t cols,
                                        std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (std::size_t c = 0; c < classes; ++c) {
    char dirname[32];
    std::snprintf(dirname, sizeof dirname, "obj%02zu", c + 1);
    const auto dir = root / dirname;
    std::filesystem::create_directories(dir);
    const double fr = 1.0 + static_cast<double>(c % 3);
    const double fc = 1.0 + static_cast<double>(c / 3);
    const double phase = 0.7 * static_cast<double>(c);
    for (std::size_t k = 0; k < per_class; ++k) {
      const double shift = 0.35 * static_cast<double>(k);
      Mat img(rows, cols);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
          const double y = static_cast<double>(i) / static_cast<double>(rows);
          const double x = static_cast<double>(j) / static_cast<double>(cols);
          const double v = 0.5 + 0.3 * std::sin(6.28318 * fr * y + phase + shift) *
                                     std::cos(6.28318 * fc * x - 0.5 * shift) +
                           0.05 * rng.uniform(-1.0, 1.0);
          img(i, j) = std::clamp(v, 0.0, 1.0);
        }
      }
      char name[32];
      std::snprintf(name, sizeof name, "img%03zu.pgm", k);
      std::ofstream(dir / name, std::ios::binary) << encode_pgm(img, 255, true);
    }
  }
}

}  // namespace featline::testing
