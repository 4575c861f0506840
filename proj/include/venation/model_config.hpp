#pragma once

// The three classifier configurations: backbone identity, classification
// head, input normalization and the phased training plan.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "venation/errors.hpp"
#include "venation/preprocess.hpp"

namespace venation {

enum class Architecture { resnet50, mobilenet_v2, efficientnet_b0 };

inline constexpr std::array kAllArchitectures{
    Architecture::resnet50, Architecture::mobilenet_v2,
    Architecture::efficientnet_b0};

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::resnet50: return "resnet50";
    case Architecture::mobilenet_v2: return "mobilenet_v2";
    case Architecture::efficientnet_b0: return "efficientnet_b0";
  }
  return "?";
}

inline Architecture parse_architecture(const std::string& s) {
  for (auto a : kAllArchitectures)
    if (to_string(a) == s) return a;
  throw ConfigError("unknown architecture '" + s + "'");
}

// Width of the globally pooled backbone output.
inline int pooled_feature_width(Architecture a) {
  return a == Architecture::resnet50 ? 2048 : 1280;
}

// The pretrained weights come from torchvision's ImageNet checkpoints,
// which all expect (v/255 - mean) / std with these statistics.
inline NormalizationScheme native_normalization(Architecture) {
  return NormalizationScheme::backbone_native({0.485f, 0.456f, 0.406f},
                                              {0.229f, 0.224f, 0.225f});
}

struct HeadSpec {
  double dropout_pre = 0.5;
  int dense_units = 256;
  double dropout_post = 0.3;
  int output_units = 0;

  // GAP -> dropout -> dense(ReLU) -> dropout -> dense(softmax).
  std::int64_t parameter_count(int pooled_width) const {
    return static_cast<std::int64_t>(pooled_width) * dense_units + dense_units +
           static_cast<std::int64_t>(dense_units) * output_units + output_units;
  }

  void validate() const {
    for (double r : {dropout_pre, dropout_post}) {
      if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rate outside [0, 1)");
    }
    if (dense_units < 1) throw ConfigError("dense_units must be positive");
    if (output_units < 2) throw ConfigError("output_units must be >= 2");
  }

  friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

struct BackboneSpec {
  Architecture architecture = Architecture::resnet50;
  bool pretrained = true;
  bool include_classifier_top = false;
  int input_size = 224;
  bool frozen = true;

  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

enum class OptimizerId { adam, sgd };

inline std::string to_string(OptimizerId o) {
  return o == OptimizerId::adam ? "adam" : "sgd";
}

inline OptimizerId parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerId::adam;
  if (s == "sgd") return OptimizerId::sgd;
  throw ConfigError("unknown optimizer '" + s + "'");
}

struct EarlyStopSpec {
  int patience = 5;
  bool restore_best = true;
  friend bool operator==(const EarlyStopSpec&, const EarlyStopSpec&) = default;
};

struct PlateauSpec {
  double factor = 0.5;
  int patience = 2;
  double min_lr = 1e-6;
  friend bool operator==(const PlateauSpec&, const PlateauSpec&) = default;
};

struct Phase {
  std::string name;
  OptimizerId optimizer = OptimizerId::adam;
  double learning_rate = 1e-3;
  std::optional<double> momentum;
  int max_epochs = 1;
  // Number of trailing parameterized backbone units trainable in this
  // phase; the head is always trainable.
  int trainable_backbone_units = 0;
  std::optional<EarlyStopSpec> early_stop;
  std::optional<PlateauSpec> plateau;

  void validate() const {
    if (max_epochs < 1) throw ConfigError("phase '" + name + "': max_epochs < 1");
    if (!(learning_rate > 0.0)) {
      throw ConfigError("phase '" + name + "': learning rate must be positive");
    }
    if (trainable_backbone_units < 0) {
      throw ConfigError("phase '" + name + "': negative trainable unit count");
    }
    if (early_stop && early_stop->patience < 1) {
      throw ConfigError("phase '" + name + "': early-stop patience < 1");
    }
    if (plateau && (plateau->patience < 1 || !(plateau->factor > 0.0 &&
                                               plateau->factor < 1.0))) {
      throw ConfigError("phase '" + name + "': invalid plateau settings");
    }
  }

  friend bool operator==(const Phase&, const Phase&) = default;
};

struct TrainPlan {
  std::vector<Phase> phases;
  friend bool operator==(const TrainPlan&, const TrainPlan&) = default;
};

struct ModelConfig {
  std::string model_id;
  BackboneSpec backbone;
  HeadSpec head;
  NormalizationScheme normalization;
  TrainPlan plan;
  int batch_size = 32;

  void validate() const {
    head.validate();
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (plan.phases.empty()) throw ConfigError("training plan has no phases");
    for (const auto& p : plan.phases) p.validate();
    if (normalization.id == SchemeId::backbone_native &&
        normalization != native_normalization(backbone.architecture)) {
      throw ConfigError("BACKBONE_NATIVE parameters do not match " +
                        to_string(backbone.architecture));
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr double kAdamLearningRate = 1e-3;
inline constexpr double kFineTuneLearningRate = 1e-4;
inline constexpr double kFineTuneMomentum = 0.9;
inline constexpr int kFineTuneUnits = 10;

namespace detail {

inline void require_classes(int k) {
  if (k < 2) throw ConfigError("need at least 2 classes, got " + std::to_string(k));
}

inline ModelConfig frozen_head_config(Architecture arch, int k, int dense,
                                      int max_epochs) {
  require_classes(k);
  ModelConfig c;
  c.model_id = to_string(arch);
  c.backbone.architecture = arch;
  c.head = {0.5, dense, 0.3, k};
  c.normalization = native_normalization(arch);
  Phase p;
  p.name = "head";
  p.optimizer = OptimizerId::adam;
  p.learning_rate = kAdamLearningRate;
  p.max_epochs = max_epochs;
  p.early_stop = EarlyStopSpec{5, true};
  c.plan.phases.push_back(p);
  return c;
}

}  // namespace detail

inline ModelConfig resnet50_config(int k) {
  return detail::frozen_head_config(Architecture::resnet50, k, 256, 15);
}

inline ModelConfig mobilenet_v2_config(int k) {
  auto c = detail::frozen_head_config(Architecture::mobilenet_v2, k, 128, 30);
  c.normalization = NormalizationScheme::unit_scale();
  return c;
}

inline ModelConfig efficientnet_b0_config(int k) {
  auto c = detail::frozen_head_config(Architecture::efficientnet_b0, k, 256, 10);
  c.plan.phases[0].plateau = PlateauSpec{};

  Phase fine;
  fine.name = "fine_tune";
  fine.optimizer = OptimizerId::sgd;
  fine.learning_rate = kFineTuneLearningRate;
  fine.momentum = kFineTuneMomentum;
  fine.max_epochs = 20;
  fine.trainable_backbone_units = kFineTuneUnits;
  fine.early_stop = EarlyStopSpec{5, true};
  c.plan.phases.push_back(fine);
  return c;
}

inline ModelConfig default_config(Architecture arch, int k) {
  switch (arch) {
    case Architecture::resnet50: return resnet50_config(k);
    case Architecture::mobilenet_v2: return mobilenet_v2_config(k);
    case Architecture::efficientnet_b0: return efficientnet_b0_config(k);
  }
  throw ConfigError("unknown architecture");
}

// --- serialization -----------------------------------------------------------

inline nlohmann::ordered_json to_json(const NormalizationScheme& s) {
  return {{"scheme_id", to_string(s.id)},
          {"offset", s.offset},
          {"scale", s.scale}};
}

inline nlohmann::ordered_json to_json(const Phase& p) {
  nlohmann::ordered_json j;
  j["name"] = p.name;
  j["optimizer"] = to_string(p.optimizer);
  j["learning_rate"] = p.learning_rate;
  j["momentum"] = p.momentum ? nlohmann::ordered_json(*p.momentum) : nlohmann::ordered_json(nullptr);
  j["max_epochs"] = p.max_epochs;
  j["trainable_backbone_units"] = p.trainable_backbone_units;
  j["early_stop"] = p.early_stop
                        ? nlohmann::ordered_json{{"patience", p.early_stop->patience},
                                                 {"restore_best", p.early_stop->restore_best}}
                        : nlohmann::ordered_json(nullptr);
  j["plateau"] = p.plateau
                     ? nlohmann::ordered_json{{"factor", p.plateau->factor},
                                              {"patience", p.plateau->patience},
                                              {"min_lr", p.plateau->min_lr}}
                     : nlohmann::ordered_json(nullptr);
  return j;
}

inline nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["model_id"] = c.model_id;
  j["backbone"] = {{"architecture_id", to_string(c.backbone.architecture)},
                   {"pretrained", c.backbone.pretrained},
                   {"include_classifier_top", c.backbone.include_classifier_top},
                   {"input_size", c.backbone.input_size},
                   {"frozen", c.backbone.frozen}};
  j["head"] = {{"pooling", "global_average"},
               {"dropout_pre", c.head.dropout_pre},
               {"dense_units", c.head.dense_units},
               {"dense_activation", "relu"},
               {"dropout_post", c.head.dropout_post},
               {"output_units", c.head.output_units},
               {"output_activation", "softmax"}};
  j["normalization"] = to_json(c.normalization);
  auto phases = nlohmann::ordered_json::array();
  for (const auto& p : c.plan.phases) phases.push_back(to_json(p));
  j["plan"] = {{"phases", std::move(phases)}};
  j["batch_size"] = c.batch_size;
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.model_id = j.at("model_id").get<std::string>();
  const auto& b = j.at("backbone");
  c.backbone.architecture =
      parse_architecture(b.at("architecture_id").get<std::string>());
  c.backbone.pretrained = b.at("pretrained").get<bool>();
  c.backbone.include_classifier_top = b.at("include_classifier_top").get<bool>();
  c.backbone.input_size = b.at("input_size").get<int>();
  c.backbone.frozen = b.at("frozen").get<bool>();
  if (c.backbone.include_classifier_top) {
    throw ConfigError("backbones are used without their classifier top");
  }
  const auto& h = j.at("head");
  c.head.dropout_pre = h.at("dropout_pre").get<double>();
  c.head.dense_units = h.at("dense_units").get<int>();
  c.head.dropout_post = h.at("dropout_post").get<double>();
  c.head.output_units = h.at("output_units").get<int>();
  const auto& n = j.at("normalization");
  c.normalization.id = parse_scheme_id(n.at("scheme_id").get<std::string>());
  c.normalization.offset = n.at("offset").get<std::array<float, 3>>();
  c.normalization.scale = n.at("scale").get<std::array<float, 3>>();
  for (const auto& pj : j.at("plan").at("phases")) {
    Phase p;
    p.name = pj.at("name").get<std::string>();
    p.optimizer = parse_optimizer(pj.at("optimizer").get<std::string>());
    p.learning_rate = pj.at("learning_rate").get<double>();
    if (!pj.at("momentum").is_null()) p.momentum = pj.at("momentum").get<double>();
    p.max_epochs = pj.at("max_epochs").get<int>();
    p.trainable_backbone_units = pj.at("trainable_backbone_units").get<int>();
    if (!pj.at("early_stop").is_null()) {
      const auto& e = pj.at("early_stop");
      p.early_stop = EarlyStopSpec{e.at("patience").get<int>(),
                                   e.at("restore_best").get<bool>()};
    }
    if (!pj.at("plateau").is_null()) {
      const auto& e = pj.at("plateau");
      p.plateau = PlateauSpec{e.at("factor").get<double>(),
                              e.at("patience").get<int>(),
                              e.at("min_lr").get<double>()};
    }
    c.plan.phases.push_back(std::move(p));
  }
  c.batch_size = j.at("batch_size").get<int>();
  c.validate();
  return c;
}

}  // namespace venation
