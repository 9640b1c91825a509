#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "featline/dataset.hpp"
#include "featline/errors.hpp"
#include "featline/matcore.hpp"

namespace featline {

/// Lines whose endpoints are closer than this (Frobenius) are degenerate.
inline constexpr double kDegenerateLineNorm = 1e-12;

/// Line through prototypes m and n (m < n) of the same class.
struct FeatureLine {
  std::size_t m = 0;
  std::size_t n = 0;
  int label = 0;

  bool operator==(const FeatureLine&) const = default;
};

struct LineProjection {
  double mu = 0.0;
  Mat point;
  double dist = 0.0;
};

inline bool is_degenerate_line(const Mat& xm, const Mat& xn) {
  return frob_norm(xn - xm) <= kDegenerateLineNorm;
}

/// Closest point to q on the line xm + μ·(xn − xm), μ unrestricted.
inline LineProjection project_onto_line(const Mat& q, const Mat& xm, const Mat& xn) {
  if (!q.same_shape(xm) || !q.same_shape(xn)) {
    throw ShapeError("project_onto_line: " + q.shape_string() + ", " +
                     xm.shape_string() + ", " + xn.shape_string());
  }
  const Mat dir = xn - xm;
  const double len2 = frob_inner(dir, dir);
  if (std::sqrt(len2) <= kDegenerateLineNorm) {
    throw DegenerateLineError("endpoints coincide");
  }
  LineProjection p;
  p.mu = frob_inner(q - xm, dir) / len2;
  p.point = xm;
  p.point.add_scaled(dir, p.mu);
  p.dist = frob_norm(q - p.point);
  return p;
}

/// Feature lines grouped by class label; within a group, pairs are in
/// lexicographic (m, n) order.
struct LineSet {
  std::map<int, std::vector<FeatureLine>> by_class;
  std::size_t degenerate_skipped = 0;

  std::size_t total() const noexcept {
    std::size_t t = 0;
    for (const auto& [label, lines] : by_class) t += lines.size();
    return t;
  }
};

/// All same-class prototype pairs. When `exclude_index` is set, lines with
/// that sample as an endpoint are left out.
inline LineSet enumerate_lines(const LabeledDataset& train,
                               std::optional<std::size_t> exclude_index = std::nullopt) {
  LineSet out;
  for (const auto& [label, members] : train.classes()) {
    const std::size_t usable =
        members.size() - ((exclude_index && std::binary_search(members.begin(), members.end(),
                                                               *exclude_index))
                              ? 1
                              : 0);
    if (usable < 2) {
      throw InsufficientDataError("class " + std::to_string(label) + " has " +
                                  std::to_string(usable) + " usable samples, need 2");
    }
    auto& group = out.by_class[label];
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const std::size_t m = members[a], n = members[b];
        if (exclude_index && (m == *exclude_index || n == *exclude_index)) continue;
        if (is_degenerate_line(train.matrix(m), train.matrix(n))) {
          ++out.degenerate_skipped;
          continue;
        }
        group.push_back({m, n, label});
      }
    }
  }
  return out;
}

struct NflDecision {
  int label = 0;
  double best_dist = 0.0;
  FeatureLine line;
};

/// Nearest-feature-line rule: the label of the line at minimal distance.
/// Lines are scanned in (label, m, n) order and only a strictly smaller
/// distance replaces the incumbent, so ties go to the earliest line.
inline NflDecision nfl_classify(const Mat& q, const LabeledDataset& train, const LineSet& lines) {
  if (!train.empty() && (q.rows() != train.rows() || q.cols() != train.cols())) {
    throw ShapeError("query " + q.shape_string() + " vs training samples " +
                     std::to_string(train.rows()) + "x" + std::to_string(train.cols()));
  }
  NflDecision best;
  best.best_dist = std::numeric_limits<double>::infinity();
  bool found = false;
  for (const auto& [label, group] : lines.by_class) {
    for (const auto& line : group) {
      const auto p = project_onto_line(q, train.matrix(line.m), train.matrix(line.n));
      if (!found || p.dist < best.best_dist) {
        best = {label, p.dist, line};
        found = true;
      }
    }
  }
  if (!found) throw NoUsableLinesError("every feature line is degenerate");
  return best;
}

/// Batch form of nfl_classify for repeated queries against one training set.
///
/// Squared line distances are expanded through prototype inner products,
///   ‖q − x_m‖² − ⟨q − x_m, x_n − x_m⟩² / ‖x_n − x_m‖²,
/// so a query costs N inner products plus O(1) per line.
class NflIndex {
 public:
  NflIndex(const LabeledDataset& train, const LineSet& lines)
      : rows_(train.rows()), cols_(train.cols()), dim_(train.rows() * train.cols()) {
    const std::size_t n = train.size();
    protos_.reserve(n * dim_);
    for (const auto& s : train.samples()) {
      protos_.insert(protos_.end(), s.pixels.data().begin(), s.pixels.data().end());
    }
    sqnorm_.resize(n);
    for (std::size_t i = 0; i < n; ++i) sqnorm_[i] = dot(proto(i), proto(i));

    for (const auto& [label, group] : lines.by_class) {
      for (const auto& line : group) {
        const double mn = dot(proto(line.m), proto(line.n));
        Entry e;
        e.line = line;
        e.dir2 = sqnorm_[line.n] - 2.0 * mn + sqnorm_[line.m];
        e.base_dot_dir = mn - sqnorm_[line.m];
        entries_.push_back(e);
      }
    }
    if (entries_.empty()) throw NoUsableLinesError("every feature line is degenerate");
  }

  NflDecision classify(const Mat& q) const {
    if (q.rows() != rows_ || q.cols() != cols_) {
      throw ShapeError("query " + q.shape_string() + " vs index " + std::to_string(rows_) +
                       "x" + std::to_string(cols_));
    }
    const auto qd = q.data();
    const double qq = dot(qd, qd);
    std::vector<double> g(sqnorm_.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = dot(qd, proto(i));

    double best2 = std::numeric_limits<double>::infinity();
    const Entry* best = nullptr;
    for (const auto& e : entries_) {
      const std::size_t m = e.line.m, n = e.line.n;
      const double to_base = qq - 2.0 * g[m] + sqnorm_[m];
      const double along = (g[n] - g[m]) - e.base_dot_dir;
      const double d2 = std::max(0.0, to_base - along * along / e.dir2);
      if (best == nullptr || d2 < best2) {
        best2 = d2;
        best = &e;
      }
    }
    return {best->line.label, std::sqrt(best2), best->line};
  }

 private:
  struct Entry {
    FeatureLine line;
    double dir2 = 0.0;          // ‖x_n − x_m‖²
    double base_dot_dir = 0.0;  // ⟨x_m, x_n − x_m⟩
  };

  std::span<const double> proto(std::size_t i) const {
    return std::span<const double>(protos_).subspan(i * dim_, dim_);
  }

  static double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  }

  std::size_t rows_, cols_, dim_;
  std::vector<double> protos_;
  std::vector<double> sqnorm_;
  std::vector<Entry> entries_;
};

}  // namespace featline
