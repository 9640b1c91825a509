#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "featline/baselines.hpp"
#include "featline/bdfla.hpp"
#include "featline/config.hpp"
#include "featline/dataset.hpp"
#include "featline/errors.hpp"
#include "featline/featureline.hpp"

namespace featline {

struct RateResult {
  double rate = 0.0;
  std::size_t degenerate_skipped = 0;
};

/// NFL accuracy of test features against lines through the training
/// features. Vector features are passed as D×1 matrices.
inline RateResult evaluate_nfl(std::span<const Mat> train, std::span<const int> train_labels,
                               std::span<const Mat> test, std::span<const int> test_labels) {
  if (test.size() != test_labels.size()) throw ShapeError("test feature/label count mismatch");
  if (test.empty()) throw InsufficientDataError("empty test set");
  const auto train_set = LabeledDataset::from(train, train_labels);
  const auto lines = enumerate_lines(train_set);
  const NflIndex index(train_set, lines);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (index.classify(test[i]).label == test_labels[i]) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(test.size()), lines.degenerate_skipped};
}

inline double recognition_rate(std::span<const Mat> train, std::span<const int> train_labels,
                               std::span<const Mat> test, std::span<const int> test_labels) {
  return evaluate_nfl(train, train_labels, test, test_labels).rate;
}

/// rates[run][grid point]; a missing entry is a failed grid point.
using RateTable = std::vector<std::vector<std::optional<double>>>;

/// Mean over runs of each run's best rate. Failed grid points are ignored
/// and runs without any successful point are left out; NaN if none remain.
inline double compute_amrr(const RateTable& rates) {
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& run : rates) {
    std::optional<double> best;
    for (const auto& r : run)
      if (r && (!best || *r > *best)) best = r;
    if (best) {
      sum += *best;
      ++used;
    }
  }
  return used == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(used);
}

/// Index of the grid point with the highest mean rate across runs (first
/// wins ties), or nullopt if every point failed everywhere.
inline std::optional<std::size_t> best_grid_index(const RateTable& rates) {
  if (rates.empty()) return std::nullopt;
  std::optional<std::size_t> best;
  double best_mean = -1.0;
  for (std::size_t g = 0; g < rates[0].size(); ++g) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& run : rates) {
      if (run[g]) {
        sum += *run[g];
        ++count;
      }
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    if (!best || mean > best_mean) {
      best = g;
      best_mean = mean;
    }
  }
  return best;
}

struct EvalReport {
  Method method = Method::pca;
  std::vector<GridPoint> grid;
  RateTable rates;                       // [run][grid point]
  double amrr_percent = 0.0;
  std::optional<std::size_t> best_index;  // into grid
  std::size_t skipped_degenerate_lines = 0;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;  // first few, for diagnostics
};

struct ExperimentReport {
  std::vector<EvalReport> methods;
  std::size_t runs = 0;
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
  std::size_t per_class_train = 0;
  std::uint64_t seed = 0;
  double pca_energy = 0.0;
  std::size_t samples = 0;
  std::size_t classes = 0;

  const EvalReport* find(Method m) const {
    for (const auto& r : methods)
      if (r.method == m) return &r;
    return nullptr;
  }
};

/// "100" for vector methods, "15x48" (d × D2) for one-sided maps and
/// "14x8" for BDFLA.
inline std::string format_dim(Method m, const GridPoint& p, std::size_t image_cols) {
  if (is_vector_method(m)) return std::to_string(p.d1);
  if (m == Method::bdfla) return std::to_string(p.d1) + "x" + std::to_string(p.d2);
  return std::to_string(p.d1) + "x" + std::to_string(image_cols);
}

using ProgressFn = std::function<void(const std::string&)>;

namespace detail {

inline constexpr std::size_t kMaxFailureMessages = 8;

struct RunContext {
  const DatasetSplit* split;
  std::vector<int> train_labels;
  std::vector<int> test_labels;
};

class MethodRecorder {
 public:
  MethodRecorder(EvalReport& report, std::size_t run) : report_(report), run_(run) {}

  void success(std::size_t g, const RateResult& r) {
    report_.rates[run_][g] = r.rate;
    report_.skipped_degenerate_lines += r.degenerate_skipped;
  }

  void failure(std::size_t g, const std::string& why) {
    report_.rates[run_][g].reset();
    ++report_.failures;
    if (report_.failure_messages.size() < kMaxFailureMessages) {
      const auto& p = report_.grid[g];
      const std::string dim = std::to_string(p.d1) + (p.d2 ? "x" + std::to_string(p.d2) : "");
      report_.failure_messages.push_back("run " + std::to_string(run_) + " dim " + dim + ": " + why);
    }
  }

 private:
  EvalReport& report_;
  std::size_t run_;
};

template <typename MapT>
std::vector<Mat> apply_all(const MapT& map, std::span<const Mat> xs) {
  std::vector<Mat> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(map.apply(x));
  return out;
}

// Fits once at the largest usable dimension, then evaluates every grid
// point on a truncation of that fit.
template <typename MapT, typename FitFn>
void scan_nested(EvalReport& report, std::size_t run, std::size_t capacity, FitFn&& fit,
                 std::span<const Mat> train, std::span<const Mat> test, const RunContext& ctx) {
  MethodRecorder rec(report, run);
  std::size_t want = 0;
  for (const auto& p : report.grid) want = std::max(want, p.d1);
  const std::size_t dmax = std::min(want, capacity);

  std::optional<MapT> full;
  std::string fit_error;
  if (dmax == 0) {
    fit_error = "no usable dimension";
  } else {
    try {
      full = fit(dmax);
    } catch (const Error& e) {
      fit_error = e.what();
    }
  }
  for (std::size_t g = 0; g < report.grid.size(); ++g) {
    const std::size_t d = report.grid[g].d1;
    if (!full) {
      rec.failure(g, fit_error);
      continue;
    }
    if (d > dmax) {
      rec.failure(g, "dimension " + std::to_string(d) + " exceeds capacity " + std::to_string(dmax));
      continue;
    }
    try {
      const MapT map = truncate(*full, d);
      const auto ftrain = apply_all(map, train);
      const auto ftest = apply_all(map, test);
      rec.success(g, evaluate_nfl(ftrain, ctx.train_labels, ftest, ctx.test_labels));
    } catch (const Error& e) {
      rec.failure(g, e.what());
    }
  }
}

inline std::vector<GridPoint> clamp_lda_grid(const std::vector<GridPoint>& grid, std::size_t classes) {
  std::vector<GridPoint> out;
  const std::size_t cap = classes > 1 ? classes - 1 : 1;
  for (const auto& p : grid) out.push_back({std::min(p.d1, cap), 0});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

/// Seeded multi-run benchmark on an already loaded dataset.
///
/// Run r splits with seed + r. Vector methods work on column-stacked
/// images; LDA and UDNFLA first project onto the PCA subspace keeping
/// pca_energy of the variance, while PCA itself is scanned directly. Every
/// grid point is scored by NFL accuracy and failures are recorded, not
/// fatal. Execution is sequential, so output depends only on cfg.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const LabeledDataset& data,
                                       const ProgressFn& progress = {}) {
  cfg.validate();
  if (data.rows() != cfg.image_rows || data.cols() != cfg.image_cols) {
    throw ShapeError("dataset images are " + std::to_string(data.rows()) + "x" +
                     std::to_string(data.cols()) + ", config expects " +
                     std::to_string(cfg.image_rows) + "x" + std::to_string(cfg.image_cols));
  }
  const auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };

  ExperimentReport out;
  out.runs = cfg.runs;
  out.image_rows = cfg.image_rows;
  out.image_cols = cfg.image_cols;
  out.per_class_train = cfg.per_class_train;
  out.seed = cfg.seed;
  out.pca_energy = cfg.pca_energy;
  out.samples = data.size();
  out.classes = data.class_count();

  for (Method m : cfg.methods) {
    EvalReport r;
    r.method = m;
    r.grid = m == Method::lda ? detail::clamp_lda_grid(cfg.grids.at(m), data.class_count())
                              : cfg.grids.at(m);
    r.rates.assign(cfg.runs, std::vector<std::optional<double>>(r.grid.size()));
    out.methods.push_back(std::move(r));
  }
  const auto report_for = [&](Method m) -> EvalReport& {
    for (auto& r : out.methods)
      if (r.method == m) return r;
    throw std::logic_error("method not configured");
  };
  const auto wants = [&](Method m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
  };

  for (std::size_t run = 0; run < cfg.runs; ++run) {
    const auto split = split_random(data, cfg.per_class_train, cfg.seed + run);
    {
      const std::set<std::size_t> train_idx(split.train_indices.begin(), split.train_indices.end());
      for (std::size_t i : split.test_indices) {
        if (train_idx.count(i) != 0) {
          throw std::logic_error("split overlap: sample " + std::to_string(i) + " in run " +
                                 std::to_string(run));
        }
      }
    }
    detail::RunContext ctx{&split, split.train.labels(), split.test.labels()};
    say("run " + std::to_string(run + 1) + "/" + std::to_string(cfg.runs));

    const auto train_imgs = split.train.matrices();
    const auto test_imgs = split.test.matrices();

    if (wants(Method::pca) || wants(Method::lda) || wants(Method::udnfla)) {
      std::vector<Mat> train_vec, test_vec;
      for (const auto& x : train_imgs) train_vec.push_back(vectorize(x));
      for (const auto& x : test_imgs) test_vec.push_back(vectorize(x));

      if (wants(Method::pca)) {
        say("  pca");
        std::size_t cap = 0;
        std::optional<LinearMap> full;
        std::string err;
        try {
          full = pca_fit(train_vec, EnergyFraction{1.0});
          cap = full->output_dim();
        } catch (const Error& e) {
          err = e.what();
        }
        detail::scan_nested<LinearMap>(
            report_for(Method::pca), run, cap,
            [&](std::size_t d) {
              if (!full) throw DomainError(err);
              return truncate(*full, d);
            },
            train_vec, test_vec, ctx);
      }

      if (wants(Method::lda) || wants(Method::udnfla)) {
        std::optional<LinearMap> pre;
        std::string pre_err;
        try {
          pre = pca_fit(train_vec, EnergyFraction{cfg.pca_energy});
        } catch (const Error& e) {
          pre_err = e.what();
        }
        std::vector<Mat> train_red, test_red;
        if (pre) {
          train_red = detail::apply_all(*pre, train_vec);
          test_red = detail::apply_all(*pre, test_vec);
        }
        const std::size_t pre_dim = pre ? pre->output_dim() : 0;

        if (wants(Method::lda)) {
          say("  lda");
          const std::size_t cap = std::min(pre_dim, data.class_count() - 1);
          detail::scan_nested<LinearMap>(
              report_for(Method::lda), run, cap,
              [&](std::size_t d) {
                if (!pre) throw DomainError(pre_err);
                return lda_fit(train_red, ctx.train_labels, d);
              },
              train_red, test_red, ctx);
        }
        if (wants(Method::udnfla)) {
          say("  udnfla");
          detail::scan_nested<LinearMap>(
              report_for(Method::udnfla), run, pre_dim,
              [&](std::size_t d) {
                if (!pre) throw DomainError(pre_err);
                return udnfla_fit(train_red, ctx.train_labels, d, cfg.anchor_lines);
              },
              train_red, test_red, ctx);
        }
      }
    }

    if (wants(Method::twod_pca)) {
      say("  2dpca");
      detail::scan_nested<SideMap>(
          report_for(Method::twod_pca), run, cfg.image_rows,
          [&](std::size_t d) { return twod_pca_fit(train_imgs, d); }, train_imgs, test_imgs, ctx);
    }
    if (wants(Method::twod_lda)) {
      say("  2dlda");
      detail::scan_nested<SideMap>(
          report_for(Method::twod_lda), run, cfg.image_rows,
          [&](std::size_t d) { return twod_lda_fit(train_imgs, ctx.train_labels, d); }, train_imgs,
          test_imgs, ctx);
    }

    if (wants(Method::bdfla)) {
      auto& rep = report_for(Method::bdfla);
      detail::MethodRecorder rec(rep, run);
      std::optional<LineAssignments> assignments;
      std::string err;
      try {
        assignments = assign_lines(split.train, cfg.anchor_lines);
      } catch (const Error& e) {
        err = e.what();
      }
      for (std::size_t g = 0; g < rep.grid.size(); ++g) {
        const auto& p = rep.grid[g];
        if (!assignments) {
          rec.failure(g, err);
          continue;
        }
        say("  bdfla " + format_dim(Method::bdfla, p, cfg.image_cols));
        try {
          BdflaConfig bc = cfg.bdfla;
          bc.d1 = p.d1;
          bc.d2 = p.d2;
          const auto model = fit(split.train, *assignments, bc);
          std::vector<Mat> ftrain, ftest;
          for (const auto& x : train_imgs) ftrain.push_back(extract(model, x));
          for (const auto& x : test_imgs) ftest.push_back(extract(model, x));
          rec.success(g, evaluate_nfl(ftrain, ctx.train_labels, ftest, ctx.test_labels));
        } catch (const Error& e) {
          rec.failure(g, e.what());
        }
      }
    }
  }

  for (auto& r : out.methods) {
    r.amrr_percent = 100.0 * compute_amrr(r.rates);
    r.best_index = best_grid_index(r.rates);
  }
  return out;
}

/// Loads cfg.dataset_root and runs the benchmark.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
  const auto data = load_directory(cfg.dataset_root, cfg.image_rows, cfg.image_cols);
  return run_experiment(cfg, data, progress);
}

// ---------------------------------------------------------------------------
// Report emission

enum class ReportFormat { csv, long_csv, table };

namespace detail {

inline std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace detail

/// csv:      method,amrr_percent,best_dim,runs,grid  (grid = point count)
/// long_csv: method,run,dim,rate  (failed points omitted)
/// table:    aligned text with run metadata
inline std::string emit_report(const ExperimentReport& report, ReportFormat format) {
  std::ostringstream out;
  const auto best_dim = [&](const EvalReport& r) {
    return r.best_index ? format_dim(r.method, r.grid[*r.best_index], report.image_cols) : std::string("-");
  };
  switch (format) {
    case ReportFormat::csv:
      out << "method,amrr_percent,best_dim,runs,grid\n";
      for (const auto& r : report.methods) {
        out << method_name(r.method) << ',' << detail::fixed(r.amrr_percent, 2) << ',' << best_dim(r) << ','
            << report.runs << ',' << r.grid.size() << '\n';
      }
      break;
    case ReportFormat::long_csv:
      out << "method,run,dim,rate\n";
      for (const auto& r : report.methods) {
        for (std::size_t run = 0; run < r.rates.size(); ++run) {
          for (std::size_t g = 0; g < r.grid.size(); ++g) {
            if (!r.rates[run][g]) continue;
            out << method_name(r.method) << ',' << run << ','
                << format_dim(r.method, r.grid[g], report.image_cols) << ','
                << detail::fixed(*r.rates[run][g], 6) << '\n';
          }
        }
      }
      break;
    case ReportFormat::table: {
      out << "images " << report.image_rows << "x" << report.image_cols << ", " << report.samples
          << " samples in " << report.classes << " classes, " << report.per_class_train
          << " train/class, " << report.runs << " runs, seed " << report.seed << "\n";
      out << "vector methods lda/udnfla use PCA pre-reduction at " << detail::fixed(100.0 * report.pca_energy, 1)
          << "% energy\n\n";
      char line[160];
      std::snprintf(line, sizeof line, "%-8s %9s %10s %9s %10s\n", "method", "AMRR(%)", "dimension",
                    "failures", "degenerate");
      out << line;
      for (const auto& r : report.methods) {
        std::snprintf(line, sizeof line, "%-8s %9s %10s %9zu %10zu\n", std::string(method_name(r.method)).c_str(),
                      detail::fixed(r.amrr_percent, 2).c_str(), best_dim(r).c_str(), r.failures,
                      r.skipped_degenerate_lines);
        out << line;
      }
      break;
    }
  }
  return out.str();
}

}  // namespace featline
