#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "venation/model_config.hpp"

// Convolutional feature extractors whose parameter and buffer names match
// the torchvision implementations, so exported torchvision state dicts load
// without renaming.
namespace venation::nn {

namespace tnn = torch::nn;

// A backbone is an ordered list of stages followed by global average
// pooling. Stage boundaries are the points at which activations of a frozen
// prefix may be cached.
class Backbone : public tnn::Module {
 public:
  virtual Architecture architecture() const = 0;
  virtual int stage_count() const = 0;
  virtual torch::Tensor forward_stage(int stage, torch::Tensor x) = 0;
  virtual std::vector<std::shared_ptr<tnn::Module>> stage_modules(int stage) const = 0;

  int pooled_width() const { return pooled_feature_width(architecture()); }

  torch::Tensor forward_stages(torch::Tensor x, int begin, int end) {
    for (int s = begin; s < end; ++s) x = forward_stage(s, std::move(x));
    return x;
  }

  static torch::Tensor pool(const torch::Tensor& x) {
    return torch::adaptive_avg_pool2d(x, {1, 1}).flatten(1);
  }

  // [N, 3, H, W] -> [N, pooled_width]
  torch::Tensor features(torch::Tensor x) {
    return pool(forward_stages(std::move(x), 0, stage_count()));
  }
};

// Sequential with a concrete forward, so stacks can nest.
class StackImpl : public tnn::SequentialImpl {
 public:
  using tnn::SequentialImpl::SequentialImpl;
  torch::Tensor forward(torch::Tensor x) { return tnn::SequentialImpl::forward(std::move(x)); }
};
TORCH_MODULE(Stack);

namespace detail {

inline tnn::Conv2d conv(std::int64_t in, std::int64_t out, std::int64_t kernel,
                        std::int64_t stride = 1, std::int64_t groups = 1,
                        bool bias = false) {
  return tnn::Conv2d(tnn::Conv2dOptions(in, out, kernel)
                         .stride(stride)
                         .padding((kernel - 1) / 2)
                         .groups(groups)
                         .bias(bias));
}

enum class Act { none, relu6, silu };

// Conv -> BN [-> activation], children named 0, 1, 2.
inline Stack conv_bn(std::int64_t in, std::int64_t out, std::int64_t kernel,
                   std::int64_t stride, std::int64_t groups, Act act) {
  Stack s(conv(in, out, kernel, stride, groups), tnn::BatchNorm2d(out));
  if (act == Act::relu6) s->push_back(tnn::ReLU6());
  if (act == Act::silu) s->push_back(tnn::SiLU());
  return s;
}

inline torch::Tensor run_child(Stack seq, int index, torch::Tensor x) {
  return (seq->begin() + index)->forward(std::move(x));
}

// He-normal (fan_out) convolutions, unit-gain BN: the torchvision defaults.
inline void torchvision_init(tnn::Module& root) {
  torch::NoGradGuard guard;
  for (auto& m : root.modules(/*include_self=*/false)) {
    if (auto* c = m->as<tnn::Conv2d>()) {
      tnn::init::kaiming_normal_(c->weight, 0.0, torch::kFanOut, torch::kReLU);
      if (c->bias.defined()) c->bias.zero_();
    } else if (auto* b = m->as<tnn::BatchNorm2d>()) {
      b->weight.fill_(1.0);
      b->bias.zero_();
    }
  }
}

}  // namespace detail

// ---- ResNet50 ---------------------------------------------------------------

class BottleneckImpl : public tnn::Module {
 public:
  static constexpr std::int64_t kExpansion = 4;

  BottleneckImpl(std::int64_t in, std::int64_t width, std::int64_t stride) {
    const std::int64_t out = width * kExpansion;
    conv1 = register_module("conv1", detail::conv(in, width, 1));
    bn1 = register_module("bn1", tnn::BatchNorm2d(width));
    conv2 = register_module("conv2", detail::conv(width, width, 3, stride));
    bn2 = register_module("bn2", tnn::BatchNorm2d(width));
    conv3 = register_module("conv3", detail::conv(width, out, 1));
    bn3 = register_module("bn3", tnn::BatchNorm2d(out));
    if (stride != 1 || in != out) {
      downsample = register_module(
          "downsample",
          Stack(detail::conv(in, out, 1, stride), tnn::BatchNorm2d(out)));
    }
  }

  torch::Tensor forward(torch::Tensor x) {
    auto y = torch::relu(bn1(conv1(x)));
    y = torch::relu(bn2(conv2(y)));
    y = bn3(conv3(y));
    auto identity = downsample ? downsample->forward(x) : x;
    return torch::relu(y + identity);
  }

  tnn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
  tnn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, bn3{nullptr};
  Stack downsample{nullptr};
};
TORCH_MODULE(Bottleneck);

class ResNet50 : public Backbone {
 public:
  ResNet50() {
    conv1 = register_module("conv1", tnn::Conv2d(tnn::Conv2dOptions(3, 64, 7)
                                                     .stride(2)
                                                     .padding(3)
                                                     .bias(false)));
    bn1 = register_module("bn1", tnn::BatchNorm2d(64));
    const std::int64_t blocks[] = {3, 4, 6, 3};
    std::int64_t in = 64;
    for (int l = 0; l < 4; ++l) {
      const std::int64_t width = 64 << l;
      Stack layer;
      for (std::int64_t b = 0; b < blocks[l]; ++b) {
        layer->push_back(Bottleneck(in, width, (b == 0 && l > 0) ? 2 : 1));
        in = width * BottleneckImpl::kExpansion;
      }
      layers.push_back(register_module("layer" + std::to_string(l + 1), layer));
    }
    detail::torchvision_init(*this);
  }

  Architecture architecture() const override { return Architecture::resnet50; }
  int stage_count() const override { return 5; }

  torch::Tensor forward_stage(int stage, torch::Tensor x) override {
    if (stage == 0) {
      x = torch::relu(bn1(conv1(x)));
      return torch::max_pool2d(x, 3, 2, 1);
    }
    return layers.at(stage - 1)->forward(x);
  }

  std::vector<std::shared_ptr<tnn::Module>> stage_modules(int stage) const override {
    if (stage == 0) return {conv1.ptr(), bn1.ptr()};
    return {layers.at(stage - 1).ptr()};
  }

  tnn::Conv2d conv1{nullptr};
  tnn::BatchNorm2d bn1{nullptr};
  std::vector<Stack> layers;
};

// ---- MobileNetV2 ------------------------------------------------------------

class InvertedResidualImpl : public tnn::Module {
 public:
  InvertedResidualImpl(std::int64_t in, std::int64_t out, std::int64_t stride,
                       std::int64_t expand)
      : residual_(stride == 1 && in == out) {
    const std::int64_t hidden = in * expand;
    Stack layers;
    if (expand != 1) {
      layers->push_back(detail::conv_bn(in, hidden, 1, 1, 1, detail::Act::relu6));
    }
    layers->push_back(detail::conv_bn(hidden, hidden, 3, stride, hidden, detail::Act::relu6));
    layers->push_back(detail::conv(hidden, out, 1));
    layers->push_back(tnn::BatchNorm2d(out));
    conv = register_module("conv", layers);
  }

  torch::Tensor forward(torch::Tensor x) {
    auto y = conv->forward(x);
    return residual_ ? x + y : y;
  }

  Stack conv{nullptr};

 private:
  bool residual_;
};
TORCH_MODULE(InvertedResidual);

class MobileNetV2 : public Backbone {
 public:
  MobileNetV2() {
    struct Setting { std::int64_t expand, out, repeats, stride; };
    const Setting settings[] = {{1, 16, 1, 1},  {6, 24, 2, 2},  {6, 32, 3, 2},
                                {6, 64, 4, 2},  {6, 96, 3, 1},  {6, 160, 3, 2},
                                {6, 320, 1, 1}};
    Stack seq;
    seq->push_back(detail::conv_bn(3, 32, 3, 2, 1, detail::Act::relu6));
    std::int64_t in = 32;
    for (const auto& s : settings) {
      for (std::int64_t i = 0; i < s.repeats; ++i) {
        seq->push_back(InvertedResidual(in, s.out, i == 0 ? s.stride : 1, s.expand));
        in = s.out;
      }
    }
    seq->push_back(detail::conv_bn(in, 1280, 1, 1, 1, detail::Act::relu6));
    features = register_module("features", seq);
    detail::torchvision_init(*this);
  }

  Architecture architecture() const override { return Architecture::mobilenet_v2; }
  int stage_count() const override { return static_cast<int>(features->size()); }

  torch::Tensor forward_stage(int stage, torch::Tensor x) override {
    return detail::run_child(features, stage, std::move(x));
  }

  std::vector<std::shared_ptr<tnn::Module>> stage_modules(int stage) const override {
    return {features->ptr(stage)};
  }

  Stack features{nullptr};
};

// ---- EfficientNetB0 ---------------------------------------------------------

class SqueezeExcitationImpl : public tnn::Module {
 public:
  SqueezeExcitationImpl(std::int64_t channels, std::int64_t squeeze) {
    fc1 = register_module("fc1", detail::conv(channels, squeeze, 1, 1, 1, true));
    fc2 = register_module("fc2", detail::conv(squeeze, channels, 1, 1, 1, true));
  }

  torch::Tensor forward(torch::Tensor x) {
    auto s = torch::adaptive_avg_pool2d(x, {1, 1});
    s = torch::sigmoid(fc2(torch::silu(fc1(s))));
    return x * s;
  }

  tnn::Conv2d fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(SqueezeExcitation);

class MBConvImpl : public tnn::Module {
 public:
  MBConvImpl(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride,
             std::int64_t expand)
      : residual_(stride == 1 && in == out) {
    const std::int64_t hidden = in * expand;
    Stack layers;
    if (expand != 1) {
      layers->push_back(detail::conv_bn(in, hidden, 1, 1, 1, detail::Act::silu));
    }
    layers->push_back(detail::conv_bn(hidden, hidden, kernel, stride, hidden, detail::Act::silu));
    layers->push_back(SqueezeExcitation(hidden, std::max<std::int64_t>(1, in / 4)));
    layers->push_back(detail::conv_bn(hidden, out, 1, 1, 1, detail::Act::none));
    block = register_module("block", layers);
  }

  // Stochastic depth is the identity at inference and is not modelled.
  torch::Tensor forward(torch::Tensor x) {
    auto y = block->forward(x);
    return residual_ ? x + y : y;
  }

  Stack block{nullptr};

 private:
  bool residual_;
};
TORCH_MODULE(MBConv);

class EfficientNetB0 : public Backbone {
 public:
  EfficientNetB0() {
    struct Stage { std::int64_t expand, kernel, stride, in, out, repeats; };
    const Stage stages[] = {{1, 3, 1, 32, 16, 1},   {6, 3, 2, 16, 24, 2},
                            {6, 5, 2, 24, 40, 2},   {6, 3, 2, 40, 80, 3},
                            {6, 5, 1, 80, 112, 3},  {6, 5, 2, 112, 192, 4},
                            {6, 3, 1, 192, 320, 1}};
    Stack seq;
    seq->push_back(detail::conv_bn(3, 32, 3, 2, 1, detail::Act::silu));
    for (const auto& s : stages) {
      Stack stage;
      for (std::int64_t i = 0; i < s.repeats; ++i) {
        stage->push_back(MBConv(i == 0 ? s.in : s.out, s.out, s.kernel,
                                i == 0 ? s.stride : 1, s.expand));
      }
      seq->push_back(stage);
    }
    seq->push_back(detail::conv_bn(320, 1280, 1, 1, 1, detail::Act::silu));
    features = register_module("features", seq);
    detail::torchvision_init(*this);
  }

  Architecture architecture() const override { return Architecture::efficientnet_b0; }
  int stage_count() const override { return static_cast<int>(features->size()); }

  torch::Tensor forward_stage(int stage, torch::Tensor x) override {
    return detail::run_child(features, stage, std::move(x));
  }

  std::vector<std::shared_ptr<tnn::Module>> stage_modules(int stage) const override {
    return {features->ptr(stage)};
  }

  Stack features{nullptr};
};

inline std::shared_ptr<Backbone> make_backbone(Architecture arch) {
  switch (arch) {
    case Architecture::resnet50: return std::make_shared<ResNet50>();
    case Architecture::mobilenet_v2: return std::make_shared<MobileNetV2>();
    case Architecture::efficientnet_b0: return std::make_shared<EfficientNetB0>();
  }
  throw ConfigError("unknown architecture");
}

// Modules owning parameters directly (Conv, BN, Linear), in registration
// order. These are the units counted when unfreezing a suffix.
inline std::vector<std::pair<std::string, std::shared_ptr<tnn::Module>>>
parameterized_units(const tnn::Module& root) {
  std::vector<std::pair<std::string, std::shared_ptr<tnn::Module>>> out;
  for (const auto& item : root.named_modules("", /*include_self=*/false)) {
    if (!item.value()->named_parameters(/*recurse=*/false).is_empty()) {
      out.emplace_back(item.key(), item.value());
    }
  }
  return out;
}

}  // namespace venation::nn
