#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "venation/errors.hpp"
#include "venation/history.hpp"
#include "venation/metrics_io.hpp"
#include "venation/plot.hpp"

// Tables and figures rendered solely from persisted run artifacts.
namespace venation {

namespace fs = std::filesystem;

inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kHistoryFile = "history.json";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kTrainMetricsFile = "metrics_train.json";
inline constexpr const char* kPredictionsFile = "predictions.csv";
inline constexpr const char* kTrainPredictionsFile = "predictions_train.csv";

inline const std::array<std::string, 7> kFigureNames{
    "fig_confusion", "fig_roc", "fig_roc_mean", "fig_pr", "fig_pr_mean", "fig_scores",
    "fig_learning"};

// One trained model's persisted outputs.
struct RunArtifacts {
  fs::path dir;
  std::string model_id;
  StoredMetrics test;
  std::optional<StoredMetrics> train;
  std::optional<TrainingHistory> history;
};

inline bool is_model_dir(const fs::path& dir) { return fs::exists(dir / kMetricsFile); }

inline RunArtifacts load_run_artifacts(const fs::path& dir) {
  if (!is_model_dir(dir)) {
    throw DataError("missing " + (dir / kMetricsFile).string());
  }
  RunArtifacts run;
  run.dir = dir;
  run.model_id = dir.filename().string();
  if (fs::exists(dir / kConfigFile)) {
    std::ifstream in(dir / kConfigFile);
    const auto j = nlohmann::json::parse(in);
    if (j.contains("model_id")) run.model_id = j.at("model_id").get<std::string>();
  }
  run.test = read_metrics(dir / kMetricsFile);
  if (fs::exists(dir / kTrainMetricsFile)) {
    run.train = read_metrics(dir / kTrainMetricsFile);
    if (run.train->class_names != run.test.class_names) {
      throw DataError(dir.string() + ": train and test metrics disagree on class names");
    }
  }
  if (fs::exists(dir / kHistoryFile)) run.history = read_history(dir / kHistoryFile);
  return run;
}

// A model directory stands for itself; a run directory expands to its
// model subdirectories, in the order recorded in run_config.json when
// present, else lexicographically.
inline std::vector<fs::path> expand_run_dirs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (!fs::is_directory(in)) throw ConfigError("run directory not found: " + in.string());
    if (is_model_dir(in)) {
      out.push_back(in);
      continue;
    }
    std::vector<fs::path> found;
    if (fs::exists(in / "run_config.json")) {
      std::ifstream f(in / "run_config.json");
      const auto j = nlohmann::json::parse(f);
      if (j.contains("models")) {
        for (const auto& m : j.at("models")) {
          if (is_model_dir(in / m.get<std::string>())) found.push_back(in / m.get<std::string>());
        }
      }
    }
    if (found.empty()) {
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_directory() && is_model_dir(e.path())) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
    }
    if (found.empty()) throw DataError("no model outputs under " + in.string());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

// ---- summary table ----------------------------------------------------------

inline const std::array<std::string, 8> kSummaryColumns{
    "train_accuracy", "train_precision", "train_f1", "train_recall",
    "test_accuracy",  "test_precision",  "test_f1",  "test_recall"};

struct SummaryRow {
  std::string model;
  std::array<double, 8> values{};
};

// Weighted averages, as in the reference comparison table.
inline std::vector<SummaryRow> summary_table(const std::vector<RunArtifacts>& runs) {
  if (runs.empty()) throw ConfigError("summary table needs at least one run");
  std::vector<SummaryRow> rows;
  for (const auto& r : runs) {
    if (!r.train) throw DataError("missing " + (r.dir / kTrainMetricsFile).string());
    const auto& tr = r.train->aggregates;
    const auto& te = r.test.aggregates;
    rows.push_back({r.model_id,
                    {tr.accuracy, tr.weighted_precision, tr.weighted_f1, tr.weighted_recall,
                     te.accuracy, te.weighted_precision, te.weighted_f1, te.weighted_recall}});
  }
  return rows;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string s = "model";
  for (const auto& c : kSummaryColumns) s += "," + c;
  s += "\n";
  for (const auto& r : rows) {
    s += r.model;
    for (double v : r.values) s += "," + plot::fixed(v, 4);
    s += "\n";
  }
  return s;
}

inline std::string summary_text(const std::vector<SummaryRow>& rows) {
  std::size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.model.size());
  std::size_t col_w = 6;
  for (const auto& c : kSummaryColumns) col_w = std::max(col_w, c.size());
  auto pad = [](const std::string& s, std::size_t w, bool right) {
    const std::string fill(w > s.size() ? w - s.size() : 0, ' ');
    return right ? fill + s : s + fill;
  };
  std::string s = pad("model", name_w, false);
  for (const auto& c : kSummaryColumns) s += "  " + pad(c, col_w, true);
  s += "\n";
  for (const auto& r : rows) {
    s += pad(r.model, name_w, false);
    for (double v : r.values) s += "  " + pad(plot::fixed(v, 4), col_w, true);
    s += "\n";
  }
  return s;
}

// ---- figures -----------------------------------------------------------------

struct FigureSpec {
  std::string name;
  int width = 0;
  int height = 0;
  std::function<void(plot::Painter&)> draw;
};

namespace detail {

inline std::vector<plot::Pt> to_pts(const PointList& pts) {
  std::vector<plot::Pt> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back({p.x, p.y});
  return out;
}

inline double legend_width(const std::vector<plot::LegendEntry>& e) {
  double w = 0;
  for (const auto& x : e) w = std::max(w, plot::Painter::text_width(x.label, 11));
  return w + 48;
}

inline FigureSpec curve_figure(std::string name, std::string title, std::string x_label,
                               std::string y_label, bool diagonal,
                               std::vector<std::pair<plot::LegendEntry, std::optional<PointList>>>
                                   series) {
  std::vector<plot::LegendEntry> legend;
  for (const auto& s : series) legend.push_back(s.first);
  const double lw = legend_width(legend);
  plot::Frame f{80, 60, 560, 500};
  const int width = static_cast<int>(f.left + f.width + 30 + lw + 20);
  const int height = std::max(620, static_cast<int>(f.top + 17 * legend.size() + 40));
  return {std::move(name), width, height,
          [=](plot::Painter& p) {
            plot::draw_axes(p, f, title, x_label, y_label);
            if (diagonal) p.line(f.map(0, 0), f.map(1, 1), plot::kGrey, 1, true);
            for (const auto& [entry, pts] : series) {
              if (pts) p.polyline(f.map(to_pts(*pts)), entry.color, 2);
            }
            plot::draw_legend(p, f.left + f.width + 30 + lw, f.top, legend);
          }};
}

inline std::string auc_label(const std::string& name, const char* what,
                             std::optional<double> v) {
  return name + " (" + what + " " + (v ? plot::fixed(*v, 4) : std::string("undefined")) + ")";
}

inline FigureSpec confusion_figure(const RunArtifacts& run) {
  const auto& m = run.test;
  const int k = static_cast<int>(m.class_names.size());
  const double cell = std::clamp(560.0 / k, 24.0, 64.0);
  double name_w = 0;
  for (const auto& n : m.class_names) name_w = std::max(name_w, plot::Painter::text_width(n, 11));
  const std::string title = "Confusion matrix: " + run.model_id;
  const std::string caption = "predicted class (index in row order); rows: true class";
  const double text_w = std::max(plot::Painter::text_width(title, 15),
                                 plot::Painter::text_width(caption, 13));
  const double grid_w = name_w + 40 + k * cell;
  // the grid is centred when the captions are wider than it
  const double left = name_w + 40 + std::max(0.0, (text_w - grid_w) / 2 + 20), top = 60;
  const int width = static_cast<int>(std::max(left + k * cell + 40, text_w + 40));
  const int height = static_cast<int>(top + k * cell + 80);
  std::int64_t peak = 1;
  for (const auto& row : m.confusion)
    for (auto v : row) peak = std::max(peak, v);
  return {"fig_confusion", width, height, [=](plot::Painter& p) {
            p.text(width / 2.0, 30, title, 15, plot::kBlack, plot::Anchor::middle);
            for (int i = 0; i < k; ++i) {
              p.text(left - 8, top + (i + 0.5) * cell + 5, m.class_names[i], 11, plot::kBlack,
                     plot::Anchor::end);
              p.text(left + (i + 0.5) * cell, top + k * cell + 18, std::to_string(i), 11,
                     plot::kBlack, plot::Anchor::middle);
              for (int j = 0; j < k; ++j) {
                const auto v = m.confusion[i][j];
                const double t = static_cast<double>(v) / static_cast<double>(peak);
                p.fill_rect(left + j * cell, top + i * cell, cell, cell, plot::blues(t));
                if (v > 0) {
                  p.text(left + (j + 0.5) * cell, top + (i + 0.5) * cell + 5, std::to_string(v),
                         std::min(12.0, cell / 2.5), t > 0.5 ? plot::kWhite : plot::kBlack,
                         plot::Anchor::middle);
                }
              }
            }
            p.stroke_rect(left, top, k * cell, k * cell, plot::kBlack);
            p.text(width / 2.0, top + k * cell + 44, caption, 13, plot::kBlack,
                   plot::Anchor::middle);
          }};
}

inline FigureSpec scores_figure(const RunArtifacts& run) {
  const auto& pc = run.test.per_class;
  const int k = static_cast<int>(pc.size());
  double name_w = 0;
  for (const auto& c : pc) name_w = std::max(name_w, plot::Painter::text_width(c.name, 11));
  const double group = 40;
  plot::Frame f{name_w + 30, 70, 600, group * k};
  const std::vector<plot::LegendEntry> legend{{"precision", plot::palette(0)},
                                              {"recall", plot::palette(1)},
                                              {"f1", plot::palette(2)},
                                              {"one-vs-rest accuracy", plot::palette(3)}};
  const double lw = legend_width(legend);
  const int width = static_cast<int>(f.left + f.width + 30 + lw + 20);
  const int height = static_cast<int>(f.top + f.height + 70);
  return {"fig_scores", width, height, [=](plot::Painter& p) {
            plot::draw_axes(p, f, "Per-class scores: " + run.model_id, "score", "",
                            plot::nice_ticks(0, 1), {}, false);
            for (int i = 0; i < k; ++i) {
              const double y0 = f.top + i * group + 4;
              p.text(f.left - 8, y0 + group / 2 + 1, pc[i].name, 11, plot::kBlack,
                     plot::Anchor::end);
              const double vals[] = {pc[i].precision, pc[i].recall, pc[i].f1, pc[i].ovr_accuracy};
              for (int b = 0; b < 4; ++b) {
                p.fill_rect(f.left, y0 + b * 8, std::clamp(vals[b], 0.0, 1.0) * f.width, 7,
                            legend[b].color);
              }
            }
            plot::draw_legend(p, f.left + f.width + 30 + lw, f.top, legend);
          }};
}

inline std::optional<FigureSpec> learning_figure(const RunArtifacts& run) {
  if (!run.history || run.history->total_epochs() == 0) return std::nullopt;
  const auto& h = *run.history;
  std::vector<plot::Pt> tr_acc, va_acc, tr_loss, va_loss;
  std::vector<std::pair<double, std::string>> boundaries;
  double x = 0, loss_max = 0;
  for (const auto& ph : h.phases) {
    if (x > 0) boundaries.emplace_back(x + 0.5, ph.name);
    for (const auto& r : ph.records) {
      x += 1;
      tr_acc.push_back({x, r.train_accuracy});
      va_acc.push_back({x, r.val_accuracy});
      tr_loss.push_back({x, r.train_loss});
      va_loss.push_back({x, r.val_loss});
      loss_max = std::max({loss_max, r.train_loss, r.val_loss});
    }
  }
  const double x_max = std::max(2.0, x);
  const plot::Frame acc{70, 60, 440, 380, 1, x_max, 0, 1};
  const plot::Frame loss{600, 60, 440, 380, 1, x_max, 0, loss_max > 0 ? loss_max * 1.15 : 1};
  const std::vector<plot::LegendEntry> legend{{"train", plot::palette(0)},
                                              {"validation", plot::palette(1)}};
  const auto epoch_ticks = plot::nice_ticks(1, x_max);
  return FigureSpec{"fig_learning", 1080, 500, [=](plot::Painter& p) {
                      for (const auto* f : {&acc, &loss}) {
                        const bool is_acc = f == &acc;
                        plot::draw_axes(p, *f, (is_acc ? "Accuracy: " : "Loss: ") + run.model_id,
                                        "epoch", is_acc ? "accuracy" : "loss", epoch_ticks, {});
                        for (const auto& [bx, name] : boundaries) {
                          p.line(f->map(bx, f->y_min), f->map(bx, f->y_max), plot::kGrey, 1, true);
                          p.text(f->map(bx, f->y_max).x + 4, f->top + 14, name, 10, plot::kGrey);
                        }
                        p.polyline(f->map(is_acc ? tr_acc : tr_loss), legend[0].color, 2);
                        p.polyline(f->map(is_acc ? va_acc : va_loss), legend[1].color, 2);
                        plot::draw_legend(p, f->left + f->width - 6, f->top + 6, legend);
                      }
                    }};
}

}  // namespace detail

struct RenderResult {
  std::vector<fs::path> written;
  std::vector<std::string> warnings;
};

// Figures whose data is present; absent data yields a warning instead.
inline std::vector<FigureSpec> figure_specs(const RunArtifacts& run,
                                            std::vector<std::string>& warnings) {
  const auto& m = run.test;
  std::vector<FigureSpec> specs;
  auto skip = [&](const std::string& fig, const std::string& why) {
    warnings.push_back(run.model_id + ": skipped " + fig + " (" + why + ")");
  };

  if (m.confusion.empty()) skip("fig_confusion", "no confusion matrix");
  else specs.push_back(detail::confusion_figure(run));

  auto per_class = [&](bool roc) {
    std::vector<std::pair<plot::LegendEntry, std::optional<PointList>>> series;
    bool any = false;
    const auto& curves = roc ? m.roc : m.pr;
    for (std::size_t i = 0; i < m.class_names.size(); ++i) {
      std::optional<PointList> pts = i < curves.size() ? curves[i] : std::nullopt;
      std::optional<double> auc;
      if (i < m.per_class.size()) auc = roc ? m.per_class[i].roc_auc : m.per_class[i].pr_auc;
      any = any || pts.has_value();
      series.push_back({{detail::auc_label(m.class_names[i], roc ? "AUC" : "AP", auc),
                         plot::palette(i)},
                        pts});
    }
    return std::make_pair(any, series);
  };

  if (auto [any, s] = per_class(true); any) {
    specs.push_back(detail::curve_figure("fig_roc", "Per-class ROC: " + run.model_id,
                                         "false positive rate", "true positive rate", true, s));
  } else {
    skip("fig_roc", "no ROC curve data");
  }
  if (m.mean_roc) {
    specs.push_back(detail::curve_figure(
        "fig_roc_mean", "Mean ROC: " + run.model_id, "false positive rate",
        "true positive rate", true,
        {{{detail::auc_label("mean ROC", "AUC", m.mean_roc_auc), plot::palette(0)}, m.mean_roc}}));
  } else {
    skip("fig_roc_mean", "no mean ROC data");
  }
  if (auto [any, s] = per_class(false); any) {
    specs.push_back(detail::curve_figure("fig_pr", "Per-class precision-recall: " + run.model_id,
                                         "recall", "precision", false, s));
  } else {
    skip("fig_pr", "no PR curve data");
  }
  if (m.mean_pr) {
    specs.push_back(detail::curve_figure(
        "fig_pr_mean", "Mean precision-recall: " + run.model_id, "recall", "precision", false,
        {{{detail::auc_label("mean PR", "AP", m.mean_pr_auc), plot::palette(0)}, m.mean_pr}}));
  } else {
    skip("fig_pr_mean", "no mean PR data");
  }

  if (m.per_class.empty()) skip("fig_scores", "no per-class metrics");
  else specs.push_back(detail::scores_figure(run));

  if (auto fig = detail::learning_figure(run)) specs.push_back(std::move(*fig));
  else skip("fig_learning", "empty training history");
  return specs;
}

inline RenderResult render_figures(const RunArtifacts& run, const fs::path& out_dir,
                                   bool svg = false) {
  RenderResult res;
  for (const auto& spec : figure_specs(run, res.warnings)) {
    plot::RasterPainter raster(spec.width, spec.height);
    spec.draw(raster);
    const auto png = out_dir / (spec.name + ".png");
    raster.save(png);
    res.written.push_back(png);
    if (svg) {
      plot::SvgPainter vec(spec.width, spec.height);
      spec.draw(vec);
      const auto path = out_dir / (spec.name + ".svg");
      vec.save(path);
      res.written.push_back(path);
    }
  }
  return res;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("failed to write " + path.string());
}

// Summary table plus per-model figures under `out_dir/<model_id>/`.
inline RenderResult write_report(const std::vector<RunArtifacts>& runs, const fs::path& out_dir,
                                 bool svg = false) {
  RenderResult res;
  const auto rows = summary_table(runs);
  write_text(out_dir / "summary.csv", summary_csv(rows));
  write_text(out_dir / "summary.txt", summary_text(rows));
  res.written.push_back(out_dir / "summary.csv");
  res.written.push_back(out_dir / "summary.txt");
  std::set<std::string> used;
  for (const auto& run : runs) {
    std::string name = run.model_id;
    for (int i = 2; !used.insert(name).second; ++i) name = run.model_id + "_" + std::to_string(i);
    auto r = render_figures(run, out_dir / name, svg);
    res.written.insert(res.written.end(), r.written.begin(), r.written.end());
    res.warnings.insert(res.warnings.end(), r.warnings.begin(), r.warnings.end());
  }
  return res;
}

}  // namespace venation
