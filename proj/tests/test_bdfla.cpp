#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "featline/bdfla.hpp"
#include "featline/model_io.hpp"
#include "test_support.hpp"

using namespace featline;
using featline::testing::block_signal_dataset;
using featline::testing::max_abs_diff;
using featline::testing::oracle_col_scatter;
using featline::testing::oracle_row_scatter;
using featline::testing::random_dataset;
using featline::testing::random_mat;
using featline::testing::random_orthonormal;
using featline::testing::rel_diff;

namespace {

LabeledDataset transposed(const LabeledDataset& d) {
  return d.map([](const Mat& m) { return transpose(m); });
}

double min_eigenvalue(const Mat& m) { return sym_eig(m).values.back(); }

}  // namespace

TEST(AssignLines, CountsForTwoByThree) {
  SplitMix64 rng(21);
  const auto train = random_dataset(rng, 2, 3, 3, 2);
  const auto a = assign_lines(train);
  EXPECT_EQ(a.items.size(), 24u);
  for (std::size_t i = 0; i < train.size(); ++i) {
    EXPECT_EQ(a.within_count[i], 1u);
    EXPECT_EQ(a.between_count[i], 3u);
  }
  for (const auto& it : a.items) {
    if (it.kind == LineKind::within) {
      EXPECT_NE(it.anchor, it.m);
      EXPECT_NE(it.anchor, it.n);
      EXPECT_EQ(train.label(it.m), train.label(it.anchor));
    } else {
      EXPECT_NE(train.label(it.m), train.label(it.anchor));
    }
  }
}

TEST(AssignLines, IncludingAnchorLinesDilutesWithinScatter) {
  // With 3 samples per class, each anchor keeps 1 line or sees all 3; the two
  // extra lines pass through it and add nothing but weight.
  SplitMix64 rng(43);
  const auto train = random_dataset(rng, 2, 3, 3, 2);
  const auto ex = assign_lines(train);
  const auto in = assign_lines(train, AnchorLines::include);
  EXPECT_EQ(in.items.size(), 36u);
  for (std::size_t i = 0; i < train.size(); ++i) EXPECT_EQ(in.within_count[i], 3u);
  const auto se = fl_scatter_direct(train, ex, Mat::identity(3), Mat::identity(2));
  const auto si = fl_scatter_direct(train, in, Mat::identity(3), Mat::identity(2));
  EXPECT_LT(rel_diff(si.within, se.within / 3.0), 1e-12);
  EXPECT_EQ(si.between, se.between);
  const Mat r = random_mat(rng, 2, 2);
  EXPECT_LT(max_abs_diff(scatter_row_side(train, in, r).within, oracle_row_scatter(train, in, r).within), 1e-12);
}

TEST(AssignLines, WeightsSumToOnePerKind) {
  SplitMix64 rng(22);
  const auto train = random_dataset(rng, 3, 4, 2, 3);
  const auto a = assign_lines(train);
  double w = 0.0, b = 0.0;
  for (const auto& it : a.items) (it.kind == LineKind::within ? w : b) += a.weight(it);
  EXPECT_NEAR(w, 1.0, 1e-12);
  EXPECT_NEAR(b, 1.0, 1e-12);
}

TEST(AssignLines, Errors) {
  SplitMix64 rng(23);
  EXPECT_THROW(assign_lines(random_dataset(rng, 1, 5, 2, 2)), InsufficientDataError);
  EXPECT_THROW(assign_lines(random_dataset(rng, 2, 2, 2, 2)), InsufficientDataError);

  // every line of class 0 is degenerate
  std::vector<ImageSample> s;
  for (int k = 0; k < 3; ++k) s.push_back({Mat{{1, 2}, {3, 4}}, 0});
  for (int k = 0; k < 3; ++k) s.push_back({random_mat(rng, 2, 2), 1});
  EXPECT_THROW(assign_lines(LabeledDataset(std::move(s))), Error);
}

TEST(Scatter, ZeroMapGivesZero) {
  SplitMix64 rng(24);
  const auto train = random_dataset(rng, 2, 4, 3, 4);
  const auto a = assign_lines(train);
  const auto row = scatter_row_side(train, a, Mat(4, 2));
  EXPECT_EQ(frob_norm(row.within), 0.0);
  EXPECT_EQ(frob_norm(row.between), 0.0);
  const auto col = scatter_col_side(train, a, Mat(3, 1));
  EXPECT_EQ(frob_norm(col.within), 0.0);
  EXPECT_EQ(frob_norm(col.between), 0.0);
}

TEST(Scatter, ScalarImagesHaveZeroResiduals) {
  // In one dimension every non-degenerate line is the whole axis.
  SplitMix64 rng(25);
  const auto train = random_dataset(rng, 2, 4, 1, 1);
  const auto a = assign_lines(train);
  const auto row = scatter_row_side(train, a, Mat::identity(1));
  EXPECT_NEAR(row.within(0, 0), 0.0, 1e-13);
  EXPECT_NEAR(row.between(0, 0), 0.0, 1e-13);
}

TEST(Scatter, MatchesPerLineOracle) {
  SplitMix64 rng(26);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t rows = 2 + rng.below(4), cols = 2 + rng.below(4);
    const auto train = random_dataset(rng, 2 + rng.below(2), 3 + rng.below(2), rows, cols);
    const auto a = assign_lines(train);
    const Mat r = random_mat(rng, cols, 1 + rng.below(cols));
    const Mat l = random_mat(rng, rows, 1 + rng.below(rows));
    const auto fast_row = scatter_row_side(train, a, r);
    const auto slow_row = oracle_row_scatter(train, a, r);
    const double scale = std::max(1.0, frob_norm(slow_row.between));
    EXPECT_LT(max_abs_diff(fast_row.within, slow_row.within), 1e-10 * scale);
    EXPECT_LT(max_abs_diff(fast_row.between, slow_row.between), 1e-10 * scale);
    const auto fast_col = scatter_col_side(train, a, l);
    const auto slow_col = oracle_col_scatter(train, a, l);
    EXPECT_LT(max_abs_diff(fast_col.within, slow_col.within), 1e-10 * scale);
    EXPECT_LT(max_abs_diff(fast_col.between, slow_col.between), 1e-10 * scale);
  }
}

TEST(Scatter, PositiveSemidefinite) {
  SplitMix64 rng(27);
  for (int trial = 0; trial < 10; ++trial) {
    const auto train = random_dataset(rng, 3, 4, 4, 5);
    const auto a = assign_lines(train);
    const auto row = scatter_row_side(train, a, random_mat(rng, 5, 3));
    const auto col = scatter_col_side(train, a, random_mat(rng, 4, 2));
    for (const Mat* m : {&row.within, &row.between, &col.within, &col.between}) {
      EXPECT_GE(min_eigenvalue(*m), -1e-12 * std::max(1.0, frob_norm(*m)));
    }
  }
}

TEST(Scatter, TraceWithIdentityEqualsDirectSum) {
  SplitMix64 rng(28);
  const auto train = random_dataset(rng, 3, 4, 3, 5);
  const auto a = assign_lines(train);
  const auto row = scatter_row_side(train, a, Mat::identity(5));
  const auto col = scatter_col_side(train, a, Mat::identity(3));
  const auto direct = fl_scatter_direct(train, a, Mat::identity(3), Mat::identity(5));
  EXPECT_LT(rel_diff(trace(row.within), direct.within), 1e-12);
  EXPECT_LT(rel_diff(trace(row.between), direct.between), 1e-12);
  EXPECT_LT(rel_diff(trace(col.within), direct.within), 1e-12);
  EXPECT_LT(rel_diff(trace(col.between), direct.between), 1e-12);
}

TEST(Scatter, TransposeDuality) {
  SplitMix64 rng(29);
  const auto train = random_dataset(rng, 2, 4, 3, 5);
  const auto flipped = transposed(train);
  const auto a = assign_lines(train);
  const auto at = assign_lines(flipped);
  const Mat r = random_mat(rng, 5, 2);
  const auto row = scatter_row_side(train, a, r);
  const auto col = scatter_col_side(flipped, at, r);
  EXPECT_LT(max_abs_diff(row.within, col.within), 1e-12);
  EXPECT_LT(max_abs_diff(row.between, col.between), 1e-12);
}

TEST(Scatter, ShapeErrors) {
  SplitMix64 rng(30);
  const auto train = random_dataset(rng, 2, 3, 3, 4);
  const auto a = assign_lines(train);
  EXPECT_THROW(scatter_row_side(train, a, Mat(3, 1)), ShapeError);
  EXPECT_THROW(scatter_col_side(train, a, Mat(4, 1)), ShapeError);
  const auto other = random_dataset(rng, 2, 4, 3, 4);
  EXPECT_THROW(scatter_row_side(other, a, Mat(4, 1)), ShapeError);
}

TEST(CriterionJ, ZeroMapsGiveZero) {
  SplitMix64 rng(31);
  const auto train = random_dataset(rng, 2, 3, 3, 3);
  EXPECT_EQ(criterion_j(train, assign_lines(train), Mat(3, 2), Mat(3, 2)), 0.0);
}

TEST(CriterionJ, TraceFormAndRotationInvariance) {
  SplitMix64 rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const auto train = random_dataset(rng, 3, 4, 5, 6);
    const auto a = assign_lines(train);
    const Mat l = random_orthonormal(rng, 5, 3), r = random_orthonormal(rng, 6, 2);
    const double j = criterion_j(train, a, l, r);

    const auto col = scatter_col_side(train, a, l);
    const double via_trace = trace(matmul_tn(r, matmul(col.between - col.within, r)));
    EXPECT_LT(rel_diff(j, via_trace), 1e-9);

    const Mat q1 = random_orthonormal(rng, 3, 3), q2 = random_orthonormal(rng, 2, 2);
    EXPECT_LT(rel_diff(criterion_j(train, a, matmul(l, q1), matmul(r, q2)), j), 1e-9);
  }
}

TEST(BdflaConfig, Validation) {
  EXPECT_NO_THROW((BdflaConfig{3, 4}.validate(3, 4)));
  EXPECT_THROW((BdflaConfig{0, 1}.validate(3, 4)), ConfigError);
  EXPECT_THROW((BdflaConfig{4, 1}.validate(3, 4)), ConfigError);
  EXPECT_THROW((BdflaConfig{1, 5}.validate(3, 4)), ConfigError);
  EXPECT_THROW((BdflaConfig{1, 1, 0}.validate(3, 4)), ConfigError);
  EXPECT_THROW((BdflaConfig{1, 1, 10, 0.0}.validate(3, 4)), ConfigError);
}

TEST(Fit, SingleIteration) {
  SplitMix64 rng(33);
  const auto train = random_dataset(rng, 2, 4, 4, 4);
  const auto m = fit(train, BdflaConfig{2, 2, 1});
  EXPECT_EQ(m.iterations_run, 1u);
  EXPECT_EQ(m.j_history.size(), 1u);
  EXPECT_FALSE(m.converged);
  EXPECT_LT(featline::testing::orthonormality_error(m.l_map), 1e-12);
  EXPECT_LT(featline::testing::orthonormality_error(m.r_map), 1e-12);
}

TEST(Fit, FullDimensionsRecoverIdentityCriterion) {
  SplitMix64 rng(34);
  const auto train = random_dataset(rng, 3, 4, 4, 5);
  const auto a = assign_lines(train);
  const auto m = fit(train, a, BdflaConfig{4, 5});
  const double j_identity = criterion_j(train, a, Mat::identity(4), Mat::identity(5));
  for (double j : m.j_history) EXPECT_LT(rel_diff(j, j_identity), 1e-9);
}

TEST(Fit, HistoryMatchesCriterionAtEachIterate) {
  SplitMix64 rng(35);
  const auto train = random_dataset(rng, 3, 4, 5, 4);
  const auto a = assign_lines(train);
  const auto full = fit(train, a, BdflaConfig{2, 2, 5, 1e-300});
  ASSERT_EQ(full.iterations_run, 5u);
  for (std::size_t t = 1; t <= 5; ++t) {
    const auto m = fit(train, a, BdflaConfig{2, 2, t, 1e-300});
    EXPECT_EQ(m.j_history.back(), full.j_history[t - 1]);
    EXPECT_LT(rel_diff(m.j_history.back(), criterion_j(train, a, m.l_map, m.r_map)), 1e-9);
  }
}

TEST(Fit, Deterministic) {
  SplitMix64 rng(36);
  const auto train = random_dataset(rng, 3, 5, 6, 5);
  const auto a = fit(train, BdflaConfig{3, 2});
  const auto b = fit(train, BdflaConfig{3, 2});
  EXPECT_EQ(a.l_map, b.l_map);
  EXPECT_EQ(a.r_map, b.r_map);
  EXPECT_EQ(a.j_history, b.j_history);
}

TEST(Fit, ScaleCovariance) {
  SplitMix64 rng(37);
  const auto train = random_dataset(rng, 3, 4, 5, 5);
  const auto scaled = train.map([](const Mat& m) { return m * 3.0; });
  const auto a = fit(train, BdflaConfig{2, 3, 4, 1e-300});
  const auto b = fit(scaled, BdflaConfig{2, 3, 4, 1e-300});
  EXPECT_LT(max_abs_diff(a.l_map, b.l_map), 1e-8);
  EXPECT_LT(max_abs_diff(a.r_map, b.r_map), 1e-8);
  for (std::size_t t = 0; t < a.j_history.size(); ++t) {
    EXPECT_LT(rel_diff(b.j_history[t], 9.0 * a.j_history[t]), 1e-9);
  }
}

TEST(Fit, ConvergenceStopsEarly) {
  SplitMix64 rng(38);
  const auto train = random_dataset(rng, 2, 4, 3, 3);
  const auto m = fit(train, BdflaConfig{3, 3, 10, 1e-6});
  EXPECT_TRUE(m.converged);
  EXPECT_EQ(m.iterations_run, 2u);
}

TEST(Fit, SeparatesBlockSignal) {
  SplitMix64 rng(39);
  const auto train = block_signal_dataset(rng, 10, 0.1);
  const auto test = block_signal_dataset(rng, 20, 0.1);
  const auto model = fit(train, BdflaConfig{2, 2});
  const auto feat = [&](const Mat& x) { return extract(model, x); };
  const auto ftrain = train.map(feat);
  const NflIndex index(ftrain, enumerate_lines(ftrain));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    correct += index.classify(feat(test.matrix(i))).label == test.label(i);
  }
  EXPECT_EQ(correct, test.size());
}

TEST(Extract, IdentityZeroAndContraction) {
  SplitMix64 rng(40);
  BdflaModel m;
  m.l_map = Mat::identity(3);
  m.r_map = Mat::identity(4);
  const Mat x = random_mat(rng, 3, 4);
  EXPECT_EQ(extract(m, x), x);
  EXPECT_THROW(extract(m, Mat(4, 3)), ShapeError);

  m.l_map = random_orthonormal(rng, 3, 2);
  m.r_map = random_orthonormal(rng, 4, 2);
  EXPECT_EQ(frob_norm(extract(m, Mat(3, 4))), 0.0);
  for (int k = 0; k < 20; ++k) {
    const Mat y = random_mat(rng, 3, 4);
    EXPECT_LE(frob_norm(extract(m, y)), frob_norm(y) + 1e-12);
  }
}

TEST(ModelIo, RoundTripIsBitExact) {
  SplitMix64 rng(41);
  const auto train = random_dataset(rng, 2, 4, 4, 3);
  const auto model = fit(train, BdflaConfig{3, 2, 3, 1e-9});
  std::stringstream buf;
  save_model(buf, model);
  const auto back = load_model(buf);
  EXPECT_EQ(back.l_map, model.l_map);
  EXPECT_EQ(back.r_map, model.r_map);
  EXPECT_EQ(back.j_history, model.j_history);
  EXPECT_EQ(back.iterations_run, model.iterations_run);
  EXPECT_EQ(back.converged, model.converged);
  EXPECT_EQ(back.config.epsilon, model.config.epsilon);
  EXPECT_EQ(back.config.t_max, model.config.t_max);

  const auto path = featline::testing::fresh_temp_dir("modelio") / "m.txt";
  save_model_file(path, model);
  EXPECT_EQ(load_model_file(path).l_map, model.l_map);
}

TEST(ModelIo, RejectsBadHeaders) {
  SplitMix64 rng(42);
  const auto model = fit(random_dataset(rng, 2, 3, 2, 2), BdflaConfig{1, 1, 1});
  std::stringstream buf;
  save_model(buf, model);
  const std::string text = buf.str();

  std::string bad_tag = text;
  bad_tag.replace(0, 8, "notamode");
  std::istringstream t1(bad_tag);
  EXPECT_THROW(load_model(t1), ParseError);

  std::string bad_version = text;
  bad_version.replace(bad_version.find(" 1\n"), 3, " 9\n");
  std::istringstream t2(bad_version);
  try {
    load_model(t2);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "version");
  }

  std::istringstream t3(text.substr(0, text.size() / 2));
  EXPECT_THROW(load_model(t3), ParseError);
  EXPECT_THROW(load_model_file("/nonexistent/model.txt"), IoError);
}
