#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include "venation/digest.hpp"
#include "venation/model_config.hpp"
#include "venation/nn/backbones.hpp"
#include "venation/nn/weights.hpp"

namespace venation::nn {

// dropout -> dense(ReLU) -> dropout -> dense; emits logits.
class HeadImpl : public tnn::Module {
 public:
  HeadImpl(int pooled_width, const HeadSpec& spec) {
    dropout_pre = register_module("dropout_pre", tnn::Dropout(spec.dropout_pre));
    dense = register_module("dense", tnn::Linear(pooled_width, spec.dense_units));
    dropout_post = register_module("dropout_post", tnn::Dropout(spec.dropout_post));
    output = register_module("output", tnn::Linear(spec.dense_units, spec.output_units));
  }

  torch::Tensor forward(torch::Tensor pooled) {
    auto x = torch::relu(dense(dropout_pre(pooled)));
    return output(dropout_post(x));
  }

  // Glorot-uniform weights, zero biases, drawn from a private generator.
  void reset(std::uint64_t seed) {
    torch::NoGradGuard guard;
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    for (auto* layer : {dense.get(), output.get()}) {
      const auto fan_out = static_cast<double>(layer->weight.size(0));
      const auto fan_in = static_cast<double>(layer->weight.size(1));
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      layer->weight.uniform_(-bound, bound, gen);
      layer->bias.zero_();
    }
  }

  tnn::Dropout dropout_pre{nullptr}, dropout_post{nullptr};
  tnn::Linear dense{nullptr}, output{nullptr};
};
TORCH_MODULE(Head);

class ClassifierImpl : public tnn::Module {
 public:
  ClassifierImpl(std::shared_ptr<Backbone> backbone_module, const HeadSpec& spec,
                 std::uint64_t seed)
      : backbone(register_module("backbone", std::move(backbone_module))) {
    head = register_module("head", Head(backbone->pooled_width(), spec));
    head->reset(seed);
  }

  torch::Tensor forward(torch::Tensor images) {
    return head(backbone->features(std::move(images)));
  }

  // Continues from activations produced by the first `stage` backbone
  // stages; stage == stage_count means `x` is already pooled.
  torch::Tensor forward_from(int stage, torch::Tensor x) {
    const int n = backbone->stage_count();
    if (stage < n) x = Backbone::pool(backbone->forward_stages(std::move(x), stage, n));
    return head(std::move(x));
  }

  // Backbone in inference mode regardless of `on`: BN statistics stay
  // fixed and dropout applies only in the head.
  void train(bool on = true) override {
    tnn::Module::train(on);
    backbone->eval();
  }

  std::shared_ptr<Backbone> backbone;
  Head head{nullptr};
};
TORCH_MODULE(Classifier);

struct WeightSource {
  bool pretrained = true;
  std::filesystem::path directory;
};

inline Classifier build_classifier(const ModelConfig& cfg, const WeightSource& weights,
                                   std::uint64_t seed) {
  cfg.validate();
  // Random-init backbones draw from the global generator.
  torch::manual_seed(seed);
  auto backbone = make_backbone(cfg.backbone.architecture);
  if (cfg.backbone.pretrained && weights.pretrained) {
    const auto arch = cfg.backbone.architecture;
    const auto path = weights.directory / weights_file_name(arch);
    if (!std::filesystem::exists(path)) {
      throw ConfigError("pretrained " + to_string(arch) + " weights not found at " +
                        path.string() + "; " + export_hint(arch, weights.directory));
    }
    load_state_dict(*backbone, read_state_dict(path), path.string());
  }
  return Classifier(std::move(backbone), cfg.head, seed);
}

// Freezes the whole backbone, then unfreezes its last `units` parameterized
// units. The head stays trainable.
inline void set_trainable_suffix(Classifier& model, int units) {
  const auto all = parameterized_units(*model->backbone);
  if (units < 0 || units > static_cast<int>(all.size())) {
    throw ConfigError("cannot unfreeze " + std::to_string(units) + " of " +
                      std::to_string(all.size()) + " backbone units");
  }
  for (auto& p : model->backbone->parameters()) p.set_requires_grad(false);
  for (std::size_t i = all.size() - units; i < all.size(); ++i) {
    for (auto& p : all[i].second->parameters(/*recurse=*/false)) p.set_requires_grad(true);
  }
  for (auto& p : model->head->parameters()) p.set_requires_grad(true);
}

inline std::vector<std::string> trainable_parameter_names(const Classifier& model) {
  std::vector<std::string> out;
  for (const auto& p : model->named_parameters()) {
    if (p.value().requires_grad()) out.push_back(p.key());
  }
  return out;
}

// First stage owning a trainable parameter; stage_count when none does.
inline int first_trainable_stage(const Backbone& backbone) {
  for (int s = 0; s < backbone.stage_count(); ++s) {
    for (const auto& m : backbone.stage_modules(s)) {
      for (const auto& p : m->parameters()) {
        if (p.requires_grad()) return s;
      }
    }
  }
  return backbone.stage_count();
}

// SHA-256 over names and bytes of frozen backbone parameters and all
// backbone buffers.
inline std::string frozen_checksum(const Classifier& model) {
  Sha256 h;
  auto feed = [&](const std::string& name, const torch::Tensor& t) {
    const auto c = t.detach().cpu().contiguous();
    h.update(name);
    h.update(c.data_ptr(), c.numel() * c.element_size());
  };
  for (const auto& p : model->backbone->named_parameters()) {
    if (!p.value().requires_grad()) feed(p.key(), p.value());
  }
  for (const auto& b : model->backbone->named_buffers()) feed(b.key(), b.value());
  return h.hex();
}

inline void save_checkpoint(const Classifier& model, const std::filesystem::path& path) {
  write_state_dict(path, state_dict(*model));
}

inline void load_checkpoint(Classifier& model, const std::filesystem::path& path) {
  load_state_dict(*model, read_state_dict(path), path.string());
}

}  // namespace venation::nn
