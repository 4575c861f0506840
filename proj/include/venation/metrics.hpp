#pragma once

// Evaluation engine: confusion matrix, per-class and aggregate scores,
// one-vs-rest ROC / PR curves and their macro means. All pure functions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "venation/errors.hpp"
#include "venation/predictions.hpp"

namespace venation {

// Row-wise argmax; ties go to the lowest index.
inline std::vector<int> argmax_labels(const ScoreMatrix& scores) {
  if (scores.empty()) throw ShapeError("argmax_labels: empty score matrix");
  std::vector<int> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto row = scores.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) -
                              row.begin());
  }
  return out;
}

// Rows = true class, columns = predicted class.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes)
      : classes_(classes),
        counts_(static_cast<std::size_t>(classes) * classes, 0) {}

  int classes() const noexcept { return classes_; }
  std::int64_t& at(int t, int p) noexcept { return counts_[t * classes_ + p]; }
  std::int64_t at(int t, int p) const noexcept {
    return counts_[t * classes_ + p];
  }

  std::int64_t total() const noexcept {
    return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
  }
  std::int64_t trace() const noexcept {
    std::int64_t s = 0;
    for (int k = 0; k < classes_; ++k) s += at(k, k);
    return s;
  }
  std::int64_t row_sum(int t) const noexcept {
    std::int64_t s = 0;
    for (int p = 0; p < classes_; ++p) s += at(t, p);
    return s;
  }
  std::int64_t col_sum(int p) const noexcept {
    std::int64_t s = 0;
    for (int t = 0; t < classes_; ++t) s += at(t, p);
    return s;
  }

  friend bool operator==(const ConfusionMatrix&,
                         const ConfusionMatrix&) = default;

 private:
  int classes_ = 0;
  std::vector<std::int64_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const int> truth,
                                 std::span<const int> predicted, int classes) {
  if (truth.size() != predicted.size()) {
    throw ShapeError("confusion: label vectors differ in length");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t n = 0; n < truth.size(); ++n) {
    for (int label : {truth[n], predicted[n]}) {
      if (label < 0 || label >= classes) {
        throw ShapeError("confusion: label " + std::to_string(label) +
                         " at index " + std::to_string(n) +
                         " outside [0, " + std::to_string(classes) + ")");
      }
    }
    ++cm.at(truth[n], predicted[n]);
  }
  return cm;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;  // one-vs-rest
  std::int64_t support = 0;
};

struct AggregateMetrics {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
};

inline double safe_ratio(double num, double den) {
  return den > 0.0 ? num / den : 0.0;
}

inline double f1_score(double precision, double recall) {
  return precision + recall > 0.0
             ? 2.0 * precision * recall / (precision + recall)
             : 0.0;
}

// Zero denominators yield 0 for the affected ratio.
inline AggregateMetrics aggregate_metrics(const ConfusionMatrix& cm) {
  const auto n = static_cast<double>(cm.total());
  if (n < 1) throw ShapeError("aggregate_metrics: empty confusion matrix");
  AggregateMetrics out;
  out.accuracy = static_cast<double>(cm.trace()) / n;
  const int k = cm.classes();
  for (int c = 0; c < k; ++c) {
    const double tp = static_cast<double>(cm.at(c, c));
    const double support = static_cast<double>(cm.row_sum(c));
    const double predicted = static_cast<double>(cm.col_sum(c));
    ClassMetrics m;
    m.support = cm.row_sum(c);
    m.precision = safe_ratio(tp, predicted);
    m.recall = safe_ratio(tp, support);
    m.f1 = f1_score(m.precision, m.recall);
    const double fp = predicted - tp;
    const double fn = support - tp;
    m.accuracy = (n - fp - fn) / n;
    out.per_class.push_back(m);

    out.macro_precision += m.precision / k;
    out.macro_recall += m.recall / k;
    out.macro_f1 += m.f1 / k;
    out.weighted_precision += m.precision * support / n;
    out.weighted_recall += m.recall * support / n;
    out.weighted_f1 += m.f1 * support / n;
  }
  return out;
}

// --- curves ---------------------------------------------------------------

enum class CurveKind { roc, pr };

inline std::string to_string(CurveKind k) {
  return k == CurveKind::roc ? "roc" : "pr";
}

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

// ROC: x = false positive rate, y = true positive rate; auc is the
// trapezoidal area. PR: x = recall, y = precision, stored as the
// right-continuous staircase whose area is the average precision; `auc`
// holds that value and `auc_trapezoid` the trapezoidal area through the
// raw (recall, precision) operating points.
struct Curve {
  CurveKind kind = CurveKind::roc;
  std::vector<CurvePoint> points;
  double auc = 0.0;
  std::optional<double> auc_trapezoid;
};

inline double trapezoid_area(std::span<const CurvePoint> pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].x - pts[i - 1].x) * (pts[i].y + pts[i - 1].y) * 0.5;
  }
  return area;
}

namespace detail {

struct ThresholdStep {
  double tp = 0;
  double fp = 0;
};

// Cumulative (tp, fp) after admitting each group of equal scores, in
// descending score order.
inline std::vector<ThresholdStep> threshold_steps(
    std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) {
    throw ShapeError("curve: score and label vectors differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<ThresholdStep> steps;
  ThresholdStep acc;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (positive[order[i]]) acc.tp += 1; else acc.fp += 1;
    if (i + 1 == order.size() || scores[order[i + 1]] != scores[order[i]]) {
      steps.push_back(acc);
    }
  }
  return steps;
}

inline std::pair<double, double> class_totals(
    std::span<const std::uint8_t> positive) {
  double pos = 0;
  for (auto p : positive) pos += p ? 1 : 0;
  return {pos, static_cast<double>(positive.size()) - pos};
}

}  // namespace detail

inline Curve roc_curve(std::span<const double> scores,
                       std::span<const std::uint8_t> positive) {
  const auto [pos, neg] = detail::class_totals(positive);
  if (pos == 0 || neg == 0) {
    throw UndefinedMetricError(
        "ROC undefined: need at least one positive and one negative");
  }
  Curve c{CurveKind::roc, {{0.0, 0.0}}, 0.0, std::nullopt};
  for (const auto& s : detail::threshold_steps(scores, positive)) {
    c.points.push_back({s.fp / neg, s.tp / pos});
  }
  c.auc = trapezoid_area(c.points);
  return c;
}

inline Curve pr_curve(std::span<const double> scores,
                      std::span<const std::uint8_t> positive) {
  const auto [pos, neg] = detail::class_totals(positive);
  (void)neg;
  if (pos == 0) {
    throw UndefinedMetricError("PR undefined: no positive samples");
  }
  Curve c{CurveKind::pr, {}, 0.0, std::nullopt};
  std::vector<CurvePoint> raw{{0.0, 1.0}};
  double prev_recall = 0.0;
  for (const auto& s : detail::threshold_steps(scores, positive)) {
    const double recall = s.tp / pos;
    const double precision = s.tp / (s.tp + s.fp);
    if (recall > prev_recall) c.points.push_back({prev_recall, precision});
    c.points.push_back({recall, precision});
    c.auc += (recall - prev_recall) * precision;
    raw.push_back({recall, precision});
    prev_recall = recall;
  }
  c.auc_trapezoid = trapezoid_area(raw);
  return c;
}

namespace detail {

// Left and right limits of a piecewise-linear curve at x. Vertical runs
// (several points sharing x) make the limits differ.
inline std::pair<double, double> curve_limits(const Curve& c, double x) {
  const auto& p = c.points;
  if (x < p.front().x) return {p.front().y, p.front().y};
  if (x > p.back().x) return {p.back().y, p.back().y};
  auto first = std::lower_bound(
      p.begin(), p.end(), x,
      [](const CurvePoint& a, double v) { return a.x < v; });
  if (first != p.end() && first->x == x) {
    auto last = first;
    while (std::next(last) != p.end() && std::next(last)->x == x) ++last;
    return {first->y, last->y};
  }
  auto hi = first;
  auto lo = std::prev(first);
  const double t = (x - lo->x) / (hi->x - lo->x);
  const double y = lo->y + t * (hi->y - lo->y);
  return {y, y};
}

}  // namespace detail

// Macro average of per-class curves. Every curve is linearly interpolated
// at a uniform grid of `grid_size` abscissae over [0, 1], augmented with
// all curve breakpoints so that vertical steps are preserved; ordinates
// are averaged. The area of the averaged curve equals the mean of the
// input areas up to rounding.
inline Curve mean_curve(std::span<const Curve> curves, CurveKind kind,
                        std::size_t grid_size = 1001) {
  if (curves.empty()) throw ConfigError("mean_curve: no curves to average");
  if (grid_size < 2) throw ConfigError("mean_curve: grid needs >= 2 points");
  std::vector<double> xs;
  xs.reserve(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i) {
    xs.push_back(static_cast<double>(i) / static_cast<double>(grid_size - 1));
  }
  for (const auto& c : curves) {
    if (c.points.empty()) throw ConfigError("mean_curve: empty curve");
    for (const auto& p : c.points) xs.push_back(p.x);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  Curve out{kind, {}, 0.0, std::nullopt};
  const double inv = 1.0 / static_cast<double>(curves.size());
  for (double x : xs) {
    double left = 0.0;
    double right = 0.0;
    for (const auto& c : curves) {
      const auto [l, r] = detail::curve_limits(c, x);
      left += l;
      right += r;
    }
    left *= inv;
    right *= inv;
    out.points.push_back({x, left});
    if (right != left) out.points.push_back({x, right});
  }
  out.auc = trapezoid_area(out.points);
  return out;
}

// Evenly spaced subsample that keeps both endpoints.
inline std::vector<CurvePoint> sample_points(std::span<const CurvePoint> pts,
                                             std::size_t max_points = 256) {
  if (pts.size() <= max_points) return {pts.begin(), pts.end()};
  std::vector<CurvePoint> out;
  out.reserve(max_points);
  for (std::size_t i = 0; i < max_points; ++i) {
    const std::size_t idx = i * (pts.size() - 1) / (max_points - 1);
    out.push_back(pts[idx]);
  }
  return out;
}

// --- full report -----------------------------------------------------------

// A per-class curve, or the reason it is undefined.
struct ClassCurve {
  std::optional<Curve> curve;
  std::string error;
};

struct EvaluationReport {
  std::vector<std::string> class_names;
  ConfusionMatrix confusion;
  AggregateMetrics aggregates;
  std::vector<ClassCurve> roc;
  std::vector<ClassCurve> pr;
  std::optional<Curve> mean_roc;
  std::optional<Curve> mean_pr;
};

namespace detail {

inline Curve mean_of_defined(const std::vector<ClassCurve>& curves,
                             CurveKind kind) {
  std::vector<Curve> defined;
  for (const auto& c : curves)
    if (c.curve) defined.push_back(*c.curve);
  return mean_curve(defined, kind);
}

}  // namespace detail

inline EvaluationReport evaluate(const PredictionMatrix& pm) {
  pm.validate();
  EvaluationReport rep;
  rep.class_names = pm.class_names;
  const int k = pm.class_count();
  const auto predicted = argmax_labels(pm.scores);
  rep.confusion = confusion(pm.true_labels, predicted, k);
  rep.aggregates = aggregate_metrics(rep.confusion);

  std::vector<std::uint8_t> positive(pm.size());
  bool any_roc = false;
  bool any_pr = false;
  for (int c = 0; c < k; ++c) {
    for (std::size_t n = 0; n < pm.size(); ++n) {
      positive[n] = pm.true_labels[n] == c ? 1 : 0;
    }
    const auto column = pm.scores.column(c);
    ClassCurve roc;
    ClassCurve pr;
    try {
      roc.curve = roc_curve(column, positive);
      any_roc = true;
    } catch (const UndefinedMetricError& e) {
      roc.error = e.what();
    }
    try {
      pr.curve = pr_curve(column, positive);
      any_pr = true;
    } catch (const UndefinedMetricError& e) {
      pr.error = e.what();
    }
    rep.roc.push_back(std::move(roc));
    rep.pr.push_back(std::move(pr));
  }
  if (any_roc) rep.mean_roc = detail::mean_of_defined(rep.roc, CurveKind::roc);
  if (any_pr) rep.mean_pr = detail::mean_of_defined(rep.pr, CurveKind::pr);
  return rep;
}

}  // namespace venation
