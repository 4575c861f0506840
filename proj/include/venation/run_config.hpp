#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "venation/errors.hpp"
#include "venation/model_config.hpp"
#include "venation/preprocess.hpp"

namespace venation {

namespace fs = std::filesystem;

enum class InputMode { raw_rgb, venation };

inline std::string to_string(InputMode m) {
  return m == InputMode::raw_rgb ? "raw_rgb" : "venation";
}

inline InputMode parse_input_mode(const std::string& s) {
  if (s == "raw_rgb") return InputMode::raw_rgb;
  if (s == "venation") return InputMode::venation;
  throw ConfigError("unknown input_mode '" + s + "' (expected raw_rgb or venation)");
}

inline constexpr const char* kDataRootEnv = "VENATION_DATA_ROOT";
inline constexpr const char* kWeightsDirEnv = "VENATION_WEIGHTS_DIR";

inline std::string weights_file_name(Architecture arch) {
  return to_string(arch) + ".pt";
}

inline std::string export_hint(Architecture arch, const fs::path& dir) {
  return "export them with: python3 tools/export_weights.py --arch " + to_string(arch) +
         " --out " + (dir / weights_file_name(arch)).string();
}

// Every key is also a CLI flag (underscores become dashes).
struct RunConfig {
  fs::path dataset_root;
  fs::path output_dir = "runs/latest";
  std::string model = "all";
  InputMode input_mode = InputMode::raw_rgb;
  std::uint64_t seed = 42;
  double test_fraction = 0.2;
  VenationConfig venation;
  std::optional<int> max_epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<double> fine_tune_learning_rate;
  fs::path weights_dir;
  bool pretrained = true;
  bool svg = false;
  bool parallel = false;  // one training process per model

  std::vector<Architecture> architectures() const {
    if (model == "all") return {kAllArchitectures.begin(), kAllArchitectures.end()};
    return {parse_architecture(model)};
  }

  // Checks values only; path checks belong to the validate command.
  void validate_values() const {
    if (model != "all") parse_architecture(model);
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
      throw ConfigError("test_fraction must lie in (0, 1)");
    }
    venation.validate();
    if (max_epochs && *max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (batch_size && *batch_size < 1) throw ConfigError("batch_size must be >= 1");
    for (auto lr : {learning_rate, fine_tune_learning_rate}) {
      if (lr && !(*lr > 0.0)) throw ConfigError("learning rates must be positive");
    }
  }
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  auto opt = [](const auto& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  return {{"dataset_root", c.dataset_root.string()},
          {"output_dir", c.output_dir.string()},
          {"model", c.model},
          {"input_mode", to_string(c.input_mode)},
          {"seed", c.seed},
          {"test_fraction", c.test_fraction},
          {"median_kernel", c.venation.median_kernel},
          {"magnitude_mode", to_string(c.venation.magnitude_mode)},
          {"max_epochs", opt(c.max_epochs)},
          {"batch_size", opt(c.batch_size)},
          {"learning_rate", opt(c.learning_rate)},
          {"fine_tune_learning_rate", opt(c.fine_tune_learning_rate)},
          {"weights_dir", c.weights_dir.string()},
          {"pretrained", c.pretrained},
          {"svg", c.svg},
          {"parallel", c.parallel}};
}

// Applies the keys present in `j` on top of `c`; unknown keys are fatal.
inline void merge_run_config(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (v.is_null()) {
        if (key == "max_epochs") c.max_epochs.reset();
        else if (key == "batch_size") c.batch_size.reset();
        else if (key == "learning_rate") c.learning_rate.reset();
        else if (key == "fine_tune_learning_rate") c.fine_tune_learning_rate.reset();
        continue;
      }
      if (key == "dataset_root") c.dataset_root = v.get<std::string>();
      else if (key == "output_dir") c.output_dir = v.get<std::string>();
      else if (key == "model") c.model = v.get<std::string>();
      else if (key == "input_mode") c.input_mode = parse_input_mode(v.get<std::string>());
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "test_fraction") c.test_fraction = v.get<double>();
      else if (key == "median_kernel") c.venation.median_kernel = v.get<int>();
      else if (key == "magnitude_mode") c.venation.magnitude_mode = parse_magnitude_mode(v.get<std::string>());
      else if (key == "max_epochs") c.max_epochs = v.get<int>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "fine_tune_learning_rate") c.fine_tune_learning_rate = v.get<double>();
      else if (key == "weights_dir") c.weights_dir = v.get<std::string>();
      else if (key == "pretrained") c.pretrained = v.get<bool>();
      else if (key == "svg") c.svg = v.get<bool>();
      else if (key == "parallel") c.parallel = v.get<bool>();
      else if (key == "models") continue;  // written by `run`, informational
      else throw ConfigError("unknown run config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("run config key '" + key + "': " + e.what());
    }
  }
}

inline RunConfig read_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  RunConfig c;
  try {
    merge_run_config(c, nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return c;
}

// Fills unset paths from the environment and built-in defaults.
inline void apply_environment(RunConfig& c) {
  if (c.dataset_root.empty()) {
    if (const char* env = std::getenv(kDataRootEnv); env && *env) c.dataset_root = env;
  }
  if (c.weights_dir.empty()) {
    const char* env = std::getenv(kWeightsDirEnv);
    c.weights_dir = (env && *env) ? fs::path(env) : fs::path("weights");
  }
}

// The paper configuration for `arch` with the run's overrides applied.
inline ModelConfig resolve_model_config(const RunConfig& rc, Architecture arch, int classes) {
  auto mc = default_config(arch, classes);
  mc.backbone.pretrained = rc.pretrained;
  if (rc.batch_size) mc.batch_size = *rc.batch_size;
  for (auto& phase : mc.plan.phases) {
    if (rc.max_epochs) phase.max_epochs = *rc.max_epochs;
    if (phase.optimizer == OptimizerId::adam && rc.learning_rate) {
      phase.learning_rate = *rc.learning_rate;
    }
    if (phase.optimizer == OptimizerId::sgd && rc.fine_tune_learning_rate) {
      phase.learning_rate = *rc.fine_tune_learning_rate;
    }
  }
  mc.validate();
  return mc;
}

}  // namespace venation
