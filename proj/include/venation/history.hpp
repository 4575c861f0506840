#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "venation/errors.hpp"

namespace venation {

struct EpochRecord {
  int epoch = 0;  // 1-based within its phase
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double learning_rate = 0.0;
};

struct PhaseHistory {
  std::string name;
  int max_epochs = 0;
  std::vector<EpochRecord> records;
  int best_epoch = 0;
  bool stopped_early = false;
};

struct TrainingHistory {
  std::vector<PhaseHistory> phases;

  // Summary of the final phase, whose weights the model ends with.
  int best_epoch() const noexcept {
    return phases.empty() ? 0 : phases.back().best_epoch;
  }
  bool stopped_early() const noexcept {
    return !phases.empty() && phases.back().stopped_early;
  }
  std::size_t total_epochs() const noexcept {
    std::size_t n = 0;
    for (const auto& p : phases) n += p.records.size();
    return n;
  }
};

inline nlohmann::ordered_json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"train_loss", r.train_loss},
          {"val_loss", r.val_loss},
          {"train_accuracy", r.train_accuracy},
          {"val_accuracy", r.val_accuracy},
          {"learning_rate", r.learning_rate}};
}

inline nlohmann::ordered_json to_json(const TrainingHistory& h) {
  nlohmann::ordered_json j;
  auto phases = nlohmann::ordered_json::array();
  for (const auto& p : h.phases) {
    nlohmann::ordered_json pj;
    pj["name"] = p.name;
    pj["max_epochs"] = p.max_epochs;
    auto recs = nlohmann::ordered_json::array();
    for (const auto& r : p.records) recs.push_back(to_json(r));
    pj["records"] = std::move(recs);
    pj["best_epoch"] = p.best_epoch;
    pj["stopped_early"] = p.stopped_early;
    phases.push_back(std::move(pj));
  }
  j["phases"] = std::move(phases);
  j["best_epoch"] = h.best_epoch();
  j["stopped_early"] = h.stopped_early();
  return j;
}

inline TrainingHistory history_from_json(const nlohmann::json& j) {
  TrainingHistory h;
  for (const auto& pj : j.at("phases")) {
    PhaseHistory p;
    p.name = pj.at("name").get<std::string>();
    p.max_epochs = pj.at("max_epochs").get<int>();
    p.best_epoch = pj.at("best_epoch").get<int>();
    p.stopped_early = pj.at("stopped_early").get<bool>();
    for (const auto& rj : pj.at("records")) {
      p.records.push_back({rj.at("epoch").get<int>(),
                           rj.at("train_loss").get<double>(),
                           rj.at("val_loss").get<double>(),
                           rj.at("train_accuracy").get<double>(),
                           rj.at("val_accuracy").get<double>(),
                           rj.at("learning_rate").get<double>()});
    }
    h.phases.push_back(std::move(p));
  }
  return h;
}

inline void write_history(const std::filesystem::path& path,
                          const TrainingHistory& h) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_json(h).dump(2) << "\n";
}

inline TrainingHistory read_history(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing history file " + path.string());
  try {
    return history_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed history file " + path.string() + ": " +
                      e.what());
  }
}

}  // namespace venation
