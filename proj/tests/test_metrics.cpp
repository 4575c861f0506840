#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "venation/metrics.hpp"
#include "venation/metrics_io.hpp"

using namespace venation;

namespace {

ScoreMatrix random_scores(std::mt19937& rng, std::size_t n, std::size_t k) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  ScoreMatrix m(n, k);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < k; ++c) m(r, c) = d(rng);
  return m;
}

// Scores drawn from a coarse lattice so that ties are frequent.
std::pair<std::vector<double>, std::vector<std::uint8_t>> random_binary_instance(
    std::mt19937& rng, int max_n, bool need_negative) {
  std::uniform_int_distribution<int> size(2, max_n);
  std::uniform_int_distribution<int> level(0, 9);
  std::bernoulli_distribution coin(0.4);
  for (;;) {
    const int n = size(rng);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    int pos = 0;
    for (int i = 0; i < n; ++i) {
      s[i] = level(rng) / 10.0;
      y[i] = coin(rng);
      pos += y[i];
    }
    if (pos > 0 && (!need_negative || pos < n)) return {s, y};
  }
}

PredictionMatrix make_pm(const ScoreMatrix& scores, std::vector<int> labels) {
  PredictionMatrix pm;
  pm.scores = scores;
  pm.true_labels = std::move(labels);
  for (std::size_t c = 0; c < scores.cols(); ++c) {
    pm.class_names.push_back("c" + std::to_string(c));
  }
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    pm.image_ids.push_back("img" + std::to_string(r));
  }
  return pm;
}

ScoreMatrix softmax_rows(ScoreMatrix m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0;
    for (double& v : m.row(r)) s += (v = std::exp(3.0 * v));
    for (double& v : m.row(r)) v /= s;
  }
  return m;
}

}  // namespace

TEST(Argmax, PicksMaximum) {
  ScoreMatrix m(2, 3);
  m(0, 0) = 0.1; m(0, 1) = 0.7; m(0, 2) = 0.2;
  m(1, 0) = 0.5; m(1, 1) = 0.5; m(1, 2) = 0.0;
  EXPECT_EQ(argmax_labels(m), (std::vector<int>{1, 0}));
}

TEST(Argmax, MatchesLinearScanOnRandomMatrix) {
  std::mt19937 rng(7);
  auto m = random_scores(rng, 100, 15);
  const auto got = argmax_labels(m);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    int best = 0;
    for (int c = 1; c < 15; ++c)
      if (m(r, c) > m(r, best)) best = c;
    EXPECT_EQ(got[r], best);
  }
}

TEST(Argmax, RejectsEmpty) {
  EXPECT_THROW(argmax_labels(ScoreMatrix{}), ShapeError);
}

TEST(Confusion, HandCountedExample) {
  const std::vector<int> t{0, 0, 1, 1, 2, 2};
  const std::vector<int> p{0, 1, 1, 1, 2, 0};
  const auto cm = confusion(t, p, 3);
  const std::int64_t expected[3][3] = {{1, 1, 0}, {0, 2, 0}, {1, 0, 1}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(cm.at(i, j), expected[i][j]);
  EXPECT_DOUBLE_EQ(static_cast<double>(cm.trace()) / cm.total(), 4.0 / 6.0);
}

TEST(Confusion, PerfectPredictionsAreDiagonal) {
  const std::vector<int> t{0, 1, 1, 2, 2, 2};
  const auto cm = confusion(t, t, 3);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(cm.at(i, i), cm.row_sum(i));
    EXPECT_EQ(cm.row_sum(i), i + 1);
  }
}

TEST(Confusion, OutOfRangeLabelNamesIndex) {
  const std::vector<int> t{0, 3};
  const std::vector<int> p{0, 0};
  try {
    confusion(t, p, 3);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
  }
}

TEST(Confusion, MarginalsMatchSupportsAndPredictionCounts) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> lab(0, 4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> t(40), p(40);
    for (auto& v : t) v = lab(rng);
    for (auto& v : p) v = lab(rng);
    const auto cm = confusion(t, p, 5);
    std::int64_t rows = 0, cols = 0;
    for (int k = 0; k < 5; ++k) {
      EXPECT_EQ(cm.row_sum(k), std::count(t.begin(), t.end(), k));
      EXPECT_EQ(cm.col_sum(k), std::count(p.begin(), p.end(), k));
      rows += cm.row_sum(k);
      cols += cm.col_sum(k);
    }
    EXPECT_EQ(rows, 40);
    EXPECT_EQ(cols, 40);
  }
}

TEST(Aggregates, DiagonalIsPerfect) {
  ConfusionMatrix cm(3);
  cm.at(0, 0) = 4; cm.at(1, 1) = 2; cm.at(2, 2) = 5;
  const auto a = aggregate_metrics(cm);
  for (double v : {a.accuracy, a.macro_precision, a.macro_recall, a.macro_f1,
                   a.weighted_precision, a.weighted_recall, a.weighted_f1}) {
    EXPECT_DOUBLE_EQ(v, 1.0);
  }
}

TEST(Aggregates, HandArithmeticExample) {
  const std::vector<int> t{0, 0, 1, 1, 2, 2};
  const std::vector<int> p{0, 1, 1, 1, 2, 0};
  const auto a = aggregate_metrics(confusion(t, p, 3));
  EXPECT_DOUBLE_EQ(a.accuracy, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(a.per_class[0].precision, 0.5);
  EXPECT_DOUBLE_EQ(a.per_class[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(a.per_class[0].f1, 0.5);
  // class 1: TP 2, FP 1, FN 0
  EXPECT_DOUBLE_EQ(a.per_class[1].precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(a.per_class[1].recall, 1.0);
  EXPECT_DOUBLE_EQ(a.per_class[1].f1, 0.8);
  // class 0 one-vs-rest: FP 1, FN 1 out of 6
  EXPECT_DOUBLE_EQ(a.per_class[0].accuracy, 4.0 / 6.0);
}

TEST(Aggregates, ZeroDenominatorsGiveZero) {
  ConfusionMatrix cm(3);
  cm.at(0, 0) = 3; cm.at(1, 0) = 2;  // class 2 absent, class 1 never predicted
  const auto a = aggregate_metrics(cm);
  EXPECT_EQ(a.per_class[1].precision, 0.0);
  EXPECT_EQ(a.per_class[2].precision, 0.0);
  EXPECT_EQ(a.per_class[2].recall, 0.0);
  EXPECT_EQ(a.per_class[2].f1, 0.0);
}

TEST(Aggregates, RandomInstancesAgreeWithDirectCounting) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> lab(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> t(25), p(25);
    for (auto& v : t) v = lab(rng);
    for (auto& v : p) v = lab(rng);
    const auto a = aggregate_metrics(confusion(t, p, 4));
    double correct = 0;
    for (std::size_t i = 0; i < t.size(); ++i) correct += t[i] == p[i];
    EXPECT_NEAR(a.accuracy, correct / 25.0, 1e-12);
    double macro_f1 = 0;
    for (int k = 0; k < 4; ++k) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        tp += t[i] == k && p[i] == k;
        fp += t[i] != k && p[i] == k;
        fn += t[i] == k && p[i] != k;
      }
      const double prec = tp + fp > 0 ? tp / (tp + fp) : 0;
      const double rec = tp + fn > 0 ? tp / (tp + fn) : 0;
      const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0;
      EXPECT_NEAR(a.per_class[k].precision, prec, 1e-12);
      EXPECT_NEAR(a.per_class[k].recall, rec, 1e-12);
      EXPECT_NEAR(a.per_class[k].f1, f1, 1e-12);
      macro_f1 += f1 / 4;
      if (prec > 0 && rec > 0) {
        EXPECT_GE(a.per_class[k].f1, std::min(prec, rec) - 1e-12);
        EXPECT_LE(a.per_class[k].f1, std::max(prec, rec) + 1e-12);
      }
    }
    EXPECT_NEAR(a.macro_f1, macro_f1, 1e-12);
  }
}

TEST(Aggregates, BalancedSupportsMakeWeightedRecallEqualAccuracy) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> kdist(2, 15);
  std::uniform_int_distribution<int> per(1, 20);
  for (int trial = 0; trial < 500; ++trial) {
    const int k = kdist(rng);
    const int m = per(rng);
    std::uniform_int_distribution<int> lab(0, k - 1);
    std::vector<int> t, p;
    for (int c = 0; c < k; ++c)
      for (int i = 0; i < m; ++i) {
        t.push_back(c);
        p.push_back(lab(rng));
      }
    const auto a = aggregate_metrics(confusion(t, p, k));
    EXPECT_NEAR(a.weighted_recall, a.accuracy, 1e-12);
  }
}

TEST(Roc, PerfectSeparationGivesUnitArea) {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
  const std::vector<std::uint8_t> y{1, 1, 0, 0};
  const auto c = roc_curve(s, y);
  EXPECT_DOUBLE_EQ(c.auc, 1.0);
  EXPECT_EQ(c.points.front(), (CurvePoint{0, 0}));
  EXPECT_EQ(c.points.back(), (CurvePoint{1, 1}));
}

TEST(Roc, ThreeOfFourPairsOrdered) {
  const std::vector<double> s{0.9, 0.4, 0.6, 0.1};
  const std::vector<std::uint8_t> y{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(roc_curve(s, y).auc, 0.75);
}

TEST(Roc, SingleClassInputIsUndefined) {
  const std::vector<double> s{0.9, 0.4};
  EXPECT_THROW(roc_curve(s, std::vector<std::uint8_t>{1, 1}), UndefinedMetricError);
  EXPECT_THROW(roc_curve(s, std::vector<std::uint8_t>{0, 0}), UndefinedMetricError);
}

TEST(Roc, AreaEqualsPairCountingStatistic) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    auto [s, y] = random_binary_instance(rng, 50, true);
    const auto c = roc_curve(s, y);
    EXPECT_NEAR(c.auc, oracle::pair_counting_auc(s, y), 1e-9);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_GE(c.points[i].x, c.points[i - 1].x);
      EXPECT_GE(c.points[i].y, c.points[i - 1].y);
    }
  }
}

TEST(Roc, InvariantUnderMonotoneTransform) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(30), cubed(30);
    std::vector<std::uint8_t> y(30);
    for (int i = 0; i < 30; ++i) {
      s[i] = d(rng);
      cubed[i] = s[i] * s[i] * s[i];
      y[i] = i < 2 ? static_cast<std::uint8_t>(i) : coin(rng);
    }
    EXPECT_NEAR(roc_curve(s, y).auc, roc_curve(cubed, y).auc, 1e-12);
  }
}

TEST(Pr, PerfectSeparationGivesUnitArea) {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
  const std::vector<std::uint8_t> y{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(pr_curve(s, y).auc, 1.0);
}

TEST(Pr, AllEqualScoresGivePrevalence) {
  const std::vector<double> s(8, 0.25);
  const std::vector<std::uint8_t> y{1, 0, 0, 1, 0, 0, 1, 0};
  EXPECT_DOUBLE_EQ(pr_curve(s, y).auc, 3.0 / 8.0);
}

TEST(Pr, NoPositivesIsUndefined) {
  const std::vector<double> s{0.3, 0.2};
  EXPECT_THROW(pr_curve(s, std::vector<std::uint8_t>{0, 0}), UndefinedMetricError);
}

TEST(Pr, AveragePrecisionMatchesThresholdEnumeration) {
  std::mt19937 rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    auto [s, y] = random_binary_instance(rng, 50, false);
    const auto c = pr_curve(s, y);
    EXPECT_NEAR(c.auc, oracle::brute_force_average_precision(s, y), 1e-9);
    EXPECT_NEAR(trapezoid_area(c.points), c.auc, 1e-12);
    ASSERT_TRUE(c.auc_trapezoid.has_value());
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_GE(c.points[i].x, c.points[i - 1].x);
    }
  }
}

TEST(MeanCurve, IdenticalCurvesReproduceTheirArea) {
  std::mt19937 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    auto [s, y] = random_binary_instance(rng, 40, true);
    for (auto c : {roc_curve(s, y), pr_curve(s, y)}) {
      const std::vector<Curve> same(4, c);
      const auto m = mean_curve(same, c.kind);
      EXPECT_NEAR(m.auc, c.auc, 1e-9);
    }
  }
}

TEST(MeanCurve, PerfectAndDiagonalAverageToThreeQuarters) {
  const Curve perfect{CurveKind::roc, {{0, 0}, {0, 1}, {1, 1}}, 1.0, {}};
  const Curve diagonal{CurveKind::roc, {{0, 0}, {1, 1}}, 0.5, {}};
  const std::vector<Curve> both{perfect, diagonal};
  const auto m = mean_curve(both, CurveKind::roc);
  EXPECT_NEAR(m.auc, 0.75, 1e-3);
}

TEST(MeanCurve, AreaBoundedBelowByWorstClass) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Curve> curves;
    double worst = 1.0;
    for (int k = 0; k < 5; ++k) {
      auto [s, y] = random_binary_instance(rng, 30, true);
      curves.push_back(roc_curve(s, y));
      worst = std::min(worst, curves.back().auc);
    }
    EXPECT_GE(mean_curve(curves, CurveKind::roc).auc, worst - 1e-3);
  }
}

TEST(MeanCurve, EmptyListIsFatal) {
  EXPECT_THROW(mean_curve(std::vector<Curve>{}, CurveKind::roc), ConfigError);
}

TEST(Evaluate, OneHotPerfectPredictions) {
  ScoreMatrix s(6, 3);
  std::vector<int> labels{0, 1, 2, 0, 1, 2};
  for (int r = 0; r < 6; ++r) s(r, labels[r]) = 1.0;
  const auto rep = evaluate(make_pm(s, labels));
  EXPECT_DOUBLE_EQ(rep.aggregates.accuracy, 1.0);
  for (int c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(rep.roc[c].curve->auc, 1.0);
    EXPECT_DOUBLE_EQ(rep.pr[c].curve->auc, 1.0);
  }
  EXPECT_NEAR(rep.mean_roc->auc, 1.0, 1e-12);
}

TEST(Evaluate, UniformScoresFavourClassZero) {
  ScoreMatrix s(9, 3, 1.0 / 3.0);
  std::vector<int> labels{0, 0, 1, 1, 1, 2, 2, 2, 2};
  const auto rep = evaluate(make_pm(s, labels));
  EXPECT_DOUBLE_EQ(rep.aggregates.accuracy, 2.0 / 9.0);
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(rep.roc[c].curve->auc, 0.5);
}

TEST(Evaluate, AbsentClassGetsExplicitErrorEntry) {
  ScoreMatrix s(4, 3, 1.0 / 3.0);
  const auto rep = evaluate(make_pm(s, {0, 1, 0, 1}));
  EXPECT_FALSE(rep.roc[2].curve.has_value());
  EXPECT_FALSE(rep.roc[2].error.empty());
  EXPECT_TRUE(rep.mean_roc.has_value());
  const auto j = to_json(rep);
  EXPECT_TRUE(j["per_class"][2]["roc_auc"].is_null());
  EXPECT_TRUE(j["per_class"][2].contains("roc_error"));
}

TEST(Evaluate, FullSizeReportIsFast) {
  std::mt19937 rng(4);
  const auto s = softmax_rows(random_scores(rng, 225, 15));
  std::vector<int> labels(225);
  for (int i = 0; i < 225; ++i) labels[i] = i % 15;
  const auto start = std::chrono::steady_clock::now();
  const auto rep = evaluate(make_pm(s, labels));
  const auto json = to_json(rep).dump();
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(secs, 5.0);
  EXPECT_EQ(rep.roc.size(), 15u);
  EXPECT_FALSE(json.empty());
}

TEST(MetricsJson, RoundTripsThroughStoredView) {
  std::mt19937 rng(12);
  const auto s = softmax_rows(random_scores(rng, 60, 4));
  std::vector<int> labels(60);
  for (int i = 0; i < 60; ++i) labels[i] = i % 4;
  const auto rep = evaluate(make_pm(s, labels));
  const auto stored = metrics_from_json(nlohmann::json::parse(to_json(rep).dump()));
  EXPECT_EQ(stored.aggregates.accuracy, rep.aggregates.accuracy);
  EXPECT_EQ(stored.aggregates.weighted_f1, rep.aggregates.weighted_f1);
  EXPECT_EQ(*stored.mean_roc_auc, rep.mean_roc->auc);
  EXPECT_EQ(stored.per_class[2].support, 15);
  ASSERT_TRUE(stored.mean_roc.has_value());
  EXPECT_LE(stored.mean_roc->size(), kMaxCurveSamples);
  EXPECT_EQ(stored.mean_roc->front(), rep.mean_roc->points.front());
  EXPECT_EQ(stored.mean_roc->back(), rep.mean_roc->points.back());
}
