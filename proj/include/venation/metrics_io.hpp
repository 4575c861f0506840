#pragma once

// metrics.json: the persisted form of an EvaluationReport. Reporting reads
// only this document, never the raw predictions.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "venation/errors.hpp"
#include "venation/metrics.hpp"

namespace venation {

inline constexpr std::size_t kMaxCurveSamples = 256;

namespace detail {

inline nlohmann::ordered_json points_json(std::span<const CurvePoint> pts) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : sample_points(pts, kMaxCurveSamples)) {
    arr.push_back({p.x, p.y});
  }
  return arr;
}

inline nlohmann::ordered_json optional_number(std::optional<double> v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const EvaluationReport& rep) {
  nlohmann::ordered_json j;
  j["class_names"] = rep.class_names;
  auto cm = nlohmann::ordered_json::array();
  for (int t = 0; t < rep.confusion.classes(); ++t) {
    auto row = nlohmann::ordered_json::array();
    for (int p = 0; p < rep.confusion.classes(); ++p) {
      row.push_back(rep.confusion.at(t, p));
    }
    cm.push_back(std::move(row));
  }
  j["confusion"] = std::move(cm);

  auto per_class = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < rep.class_names.size(); ++c) {
    const auto& m = rep.aggregates.per_class[c];
    const auto& roc = rep.roc[c];
    const auto& pr = rep.pr[c];
    nlohmann::ordered_json e;
    e["name"] = rep.class_names[c];
    e["precision"] = m.precision;
    e["recall"] = m.recall;
    e["f1"] = m.f1;
    e["ovr_accuracy"] = m.accuracy;
    e["roc_auc"] = detail::optional_number(
        roc.curve ? std::optional<double>(roc.curve->auc) : std::nullopt);
    e["pr_auc"] = detail::optional_number(
        pr.curve ? std::optional<double>(pr.curve->auc) : std::nullopt);
    e["pr_auc_trapezoid"] = detail::optional_number(
        pr.curve ? pr.curve->auc_trapezoid : std::nullopt);
    e["support"] = m.support;
    if (!roc.error.empty()) e["roc_error"] = roc.error;
    if (!pr.error.empty()) e["pr_error"] = pr.error;
    per_class.push_back(std::move(e));
  }
  j["per_class"] = std::move(per_class);

  const auto& a = rep.aggregates;
  j["aggregates"] = {{"accuracy", a.accuracy},
                     {"macro_precision", a.macro_precision},
                     {"macro_recall", a.macro_recall},
                     {"macro_f1", a.macro_f1},
                     {"weighted_precision", a.weighted_precision},
                     {"weighted_recall", a.weighted_recall},
                     {"weighted_f1", a.weighted_f1}};
  j["mean_roc_auc"] = detail::optional_number(
      rep.mean_roc ? std::optional<double>(rep.mean_roc->auc) : std::nullopt);
  j["mean_pr_auc"] = detail::optional_number(
      rep.mean_pr ? std::optional<double>(rep.mean_pr->auc) : std::nullopt);

  nlohmann::ordered_json curves;
  for (auto [key, list] : {std::pair{"roc", &rep.roc}, std::pair{"pr", &rep.pr}}) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : *list) {
      arr.push_back(c.curve ? detail::points_json(c.curve->points)
                            : nlohmann::ordered_json(nullptr));
    }
    curves[key] = std::move(arr);
  }
  curves["mean_roc"] = rep.mean_roc ? detail::points_json(rep.mean_roc->points)
                                    : nlohmann::ordered_json(nullptr);
  curves["mean_pr"] = rep.mean_pr ? detail::points_json(rep.mean_pr->points)
                                  : nlohmann::ordered_json(nullptr);
  j["curves"] = std::move(curves);
  return j;
}

// `seed`, when known, is stamped ahead of the metrics.
inline void write_metrics(const std::filesystem::path& path,
                          const EvaluationReport& rep,
                          std::optional<std::uint64_t> seed = std::nullopt) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  nlohmann::ordered_json j;
  if (seed) j["seed"] = *seed;
  j.update(to_json(rep));
  out << j.dump(2) << "\n";
}

// Read-side view of metrics.json.
struct StoredClassMetrics {
  std::string name;
  double precision = 0, recall = 0, f1 = 0, ovr_accuracy = 0;
  std::optional<double> roc_auc, pr_auc;
  std::int64_t support = 0;
};

using PointList = std::vector<CurvePoint>;

struct StoredMetrics {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::int64_t>> confusion;
  std::vector<StoredClassMetrics> per_class;
  AggregateMetrics aggregates;  // per_class left empty
  std::optional<double> mean_roc_auc, mean_pr_auc;
  std::vector<std::optional<PointList>> roc, pr;
  std::optional<PointList> mean_roc, mean_pr;
};

namespace detail {

inline std::optional<double> read_optional(const nlohmann::json& j,
                                           const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

inline std::optional<PointList> read_points(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  PointList pts;
  for (const auto& p : j) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return pts;
}

}  // namespace detail

inline StoredMetrics metrics_from_json(const nlohmann::json& j) {
  StoredMetrics m;
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  m.confusion = j.at("confusion").get<std::vector<std::vector<std::int64_t>>>();
  for (const auto& e : j.at("per_class")) {
    StoredClassMetrics c;
    c.name = e.at("name").get<std::string>();
    c.precision = e.at("precision").get<double>();
    c.recall = e.at("recall").get<double>();
    c.f1 = e.at("f1").get<double>();
    c.ovr_accuracy = e.at("ovr_accuracy").get<double>();
    c.roc_auc = detail::read_optional(e, "roc_auc");
    c.pr_auc = detail::read_optional(e, "pr_auc");
    c.support = e.at("support").get<std::int64_t>();
    m.per_class.push_back(std::move(c));
  }
  const auto& a = j.at("aggregates");
  m.aggregates.accuracy = a.at("accuracy").get<double>();
  m.aggregates.macro_precision = a.at("macro_precision").get<double>();
  m.aggregates.macro_recall = a.at("macro_recall").get<double>();
  m.aggregates.macro_f1 = a.at("macro_f1").get<double>();
  m.aggregates.weighted_precision = a.at("weighted_precision").get<double>();
  m.aggregates.weighted_recall = a.at("weighted_recall").get<double>();
  m.aggregates.weighted_f1 = a.at("weighted_f1").get<double>();
  m.mean_roc_auc = detail::read_optional(j, "mean_roc_auc");
  m.mean_pr_auc = detail::read_optional(j, "mean_pr_auc");
  if (j.contains("curves")) {
    const auto& c = j.at("curves");
    for (const auto& r : c.at("roc")) m.roc.push_back(detail::read_points(r));
    for (const auto& r : c.at("pr")) m.pr.push_back(detail::read_points(r));
    m.mean_roc = detail::read_points(c.at("mean_roc"));
    m.mean_pr = detail::read_points(c.at("mean_pr"));
  }
  if (m.per_class.size() != m.class_names.size() ||
      m.confusion.size() != m.class_names.size()) {
    throw ConfigError("metrics document: inconsistent class count");
  }
  return m;
}

inline StoredMetrics read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing metrics file " + path.string());
  try {
    return metrics_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed metrics file " + path.string() + ": " +
                      e.what());
  }
}

}  // namespace venation
