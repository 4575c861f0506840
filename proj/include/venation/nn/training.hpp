#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "venation/callbacks.hpp"
#include "venation/history.hpp"
#include "venation/model_config.hpp"
#include "venation/nn/classifier.hpp"
#include "venation/predictions.hpp"
#include "venation/preprocess.hpp"
#include "venation/raster.hpp"

namespace venation::nn {

// Decoded model-input images with labels; all images share one shape.
struct LabelledImages {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<RasterImage> images;

  std::size_t size() const noexcept { return images.size(); }
};

using Logger = std::function<void(const std::string&)>;

// Selected images as a normalized [B, 3, H, W] float tensor.
inline torch::Tensor to_input(const LabelledImages& set, const std::vector<std::int64_t>& rows,
                              const NormalizationScheme& scheme) {
  if (rows.empty()) throw ShapeError("empty batch");
  const auto& first = set.images.at(rows.front());
  const std::int64_t h = first.height(), w = first.width();
  auto offset = torch::tensor(std::vector<float>(scheme.offset.begin(), scheme.offset.end()))
                    .view({3, 1, 1});
  auto scale = torch::tensor(std::vector<float>(scheme.scale.begin(), scheme.scale.end()))
                   .view({3, 1, 1});
  auto batch = torch::empty({static_cast<std::int64_t>(rows.size()), 3, h, w});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& img = set.images.at(rows[i]);
    require_channels(img, 3, "to_input");
    if (img.height() != h || img.width() != w) throw ShapeError("mixed image sizes in batch");
    auto hwc = torch::from_blob(const_cast<std::uint8_t*>(img.values().data()), {h, w, 3},
                                torch::kUInt8);
    batch[static_cast<std::int64_t>(i)] =
        (hwc.permute({2, 0, 1}).to(torch::kFloat32) - offset) * scale;
  }
  return batch;
}

inline std::vector<std::int64_t> index_range(std::int64_t begin, std::int64_t end) {
  std::vector<std::int64_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

// Output of the first `stage` backbone stages (pooled when stage equals the
// stage count) for every image, computed in inference mode.
inline torch::Tensor frozen_prefix(Classifier& model, const LabelledImages& set,
                                   const NormalizationScheme& scheme, int stage,
                                   int batch_size) {
  torch::NoGradGuard guard;
  model->eval();
  auto& bb = *model->backbone;
  std::vector<torch::Tensor> parts;
  const auto n = static_cast<std::int64_t>(set.size());
  for (std::int64_t b = 0; b < n; b += batch_size) {
    auto x = to_input(set, index_range(b, std::min<std::int64_t>(n, b + batch_size)), scheme);
    x = bb.forward_stages(x, 0, stage);
    if (stage == bb.stage_count()) x = Backbone::pool(x);
    parts.push_back(x);
  }
  return torch::cat(parts);
}

inline torch::Tensor label_tensor(const std::vector<int>& labels) {
  std::vector<std::int64_t> v(labels.begin(), labels.end());
  return torch::tensor(v, torch::kInt64);
}

struct SplitScore {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline SplitScore score_cached(Classifier& model, int stage, const torch::Tensor& cache,
                               const torch::Tensor& labels, int batch_size) {
  torch::NoGradGuard guard;
  model->eval();
  double loss = 0.0;
  std::int64_t correct = 0;
  const auto n = cache.size(0);
  for (std::int64_t b = 0; b < n; b += batch_size) {
    const auto e = std::min<std::int64_t>(n, b + batch_size);
    auto logits = model->forward_from(stage, cache.slice(0, b, e));
    auto y = labels.slice(0, b, e);
    loss += torch::nn::functional::cross_entropy(
                logits, y,
                torch::nn::functional::CrossEntropyFuncOptions().reduction(torch::kSum))
                .item<double>();
    correct += logits.argmax(1).eq(y).sum().item<std::int64_t>();
  }
  return {loss / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

struct TrainOptions {
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> checkpoint;
  Logger log;
};

namespace detail {

using Snapshot = std::map<std::string, torch::Tensor>;

inline Snapshot snapshot_trainable(const Classifier& model) {
  Snapshot s;
  for (const auto& p : model->named_parameters()) {
    if (p.value().requires_grad()) s.emplace(p.key(), p.value().detach().clone());
  }
  return s;
}

inline void restore(Classifier& model, const Snapshot& s) {
  torch::NoGradGuard guard;
  for (auto& p : model->named_parameters()) {
    if (const auto it = s.find(p.key()); it != s.end()) p.value().copy_(it->second);
  }
}

inline std::unique_ptr<torch::optim::Optimizer> make_optimizer(
    const Phase& phase, std::vector<torch::Tensor> params) {
  if (phase.optimizer == OptimizerId::adam) {
    return std::make_unique<torch::optim::Adam>(
        std::move(params), torch::optim::AdamOptions(phase.learning_rate));
  }
  return std::make_unique<torch::optim::SGD>(
      std::move(params),
      torch::optim::SGDOptions(phase.learning_rate).momentum(phase.momentum.value_or(0.0)));
}

inline void set_learning_rate(torch::optim::Optimizer& opt, double lr) {
  for (auto& group : opt.param_groups()) group.options().set_lr(lr);
}

inline void require_finite(double v, const std::string& what, const Phase& phase, int epoch) {
  if (!std::isfinite(v)) {
    throw TrainingError(what + " became non-finite in phase '" + phase.name + "' epoch " +
                        std::to_string(epoch));
  }
}

}  // namespace detail

// Runs one phase; validation metrics drive early stopping and the
// plateau schedule. Leaves the model at its best epoch when restore_best.
inline PhaseHistory run_phase(Classifier& model, const ModelConfig& cfg, const Phase& phase,
                              int phase_index, const LabelledImages& train,
                              const LabelledImages& val, const TrainOptions& opts) {
  set_trainable_suffix(model, phase.trainable_backbone_units);
  const int stage = first_trainable_stage(*model->backbone);
  const auto train_x = frozen_prefix(model, train, cfg.normalization, stage, cfg.batch_size);
  const auto val_x = frozen_prefix(model, val, cfg.normalization, stage, cfg.batch_size);
  const auto train_y = label_tensor(train.labels);
  const auto val_y = label_tensor(val.labels);

  std::vector<torch::Tensor> params;
  for (auto& p : model->parameters()) {
    if (p.requires_grad()) params.push_back(p);
  }
  auto optimizer = detail::make_optimizer(phase, params);
  std::optional<EarlyStopping> stopper;
  if (phase.early_stop) stopper.emplace(phase.early_stop->patience);
  std::optional<PlateauScheduler> plateau;
  if (phase.plateau) {
    plateau.emplace(phase.learning_rate, phase.plateau->factor, phase.plateau->patience,
                    phase.plateau->min_lr);
  }

  PhaseHistory hist{phase.name, phase.max_epochs, {}, 0, false};
  detail::Snapshot best;
  double lr = phase.learning_rate;
  const auto n = train_x.size(0);
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));

  for (int epoch = 1; epoch <= phase.max_epochs; ++epoch) {
    std::seed_seq seq{static_cast<std::uint32_t>(opts.seed),
                      static_cast<std::uint32_t>(opts.seed >> 32),
                      static_cast<std::uint32_t>(phase_index), static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 engine(seq);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), engine);

    model->train();
    double loss_sum = 0.0;
    std::int64_t correct = 0;
    for (std::int64_t b = 0; b < n; b += cfg.batch_size) {
      const auto e = std::min<std::int64_t>(n, b + cfg.batch_size);
      auto idx = torch::tensor(std::vector<std::int64_t>(order.begin() + b, order.begin() + e));
      auto y = train_y.index_select(0, idx);
      auto logits = model->forward_from(stage, train_x.index_select(0, idx));
      auto loss = torch::nn::functional::cross_entropy(logits, y);
      const double value = loss.item<double>();
      detail::require_finite(value, "training loss", phase, epoch);
      optimizer->zero_grad();
      loss.backward();
      optimizer->step();
      loss_sum += value * static_cast<double>(e - b);
      correct += logits.argmax(1).eq(y).sum().item<std::int64_t>();
    }

    const auto v = score_cached(model, stage, val_x, val_y, cfg.batch_size);
    detail::require_finite(v.loss, "validation loss", phase, epoch);
    hist.records.push_back({epoch, loss_sum / static_cast<double>(n), v.loss,
                            static_cast<double>(correct) / static_cast<double>(n), v.accuracy,
                            lr});
    if (opts.log) {
      char line[160];
      std::snprintf(line, sizeof line,
                    "%s/%s epoch %d/%d: loss %.4f acc %.4f val_loss %.4f val_acc %.4f lr %.2e",
                    cfg.model_id.c_str(), phase.name.c_str(), epoch, phase.max_epochs,
                    hist.records.back().train_loss, hist.records.back().train_accuracy, v.loss,
                    v.accuracy, lr);
      opts.log(line);
    }

    StopDecision decision = StopDecision::proceed;
    if (stopper) {
      decision = stopper->step(v.loss);
      if (stopper->improved()) best = detail::snapshot_trainable(model);
    }
    if (plateau) {
      lr = plateau->step(v.loss);
      detail::set_learning_rate(*optimizer, lr);
    }
    if (decision == StopDecision::stop) {
      hist.stopped_early = epoch < phase.max_epochs;
      break;
    }
  }

  if (stopper) {
    hist.best_epoch = stopper->best_epoch();
    if (phase.early_stop->restore_best && !best.empty()) detail::restore(model, best);
  } else {
    hist.best_epoch = static_cast<int>(hist.records.size());
  }
  return hist;
}

inline TrainingHistory train_classifier(Classifier& model, const ModelConfig& cfg,
                                        const LabelledImages& train, const LabelledImages& val,
                                        const TrainOptions& opts) {
  if (train.size() == 0 || val.size() == 0) throw DataError("empty train or validation set");
  torch::manual_seed(opts.seed);
  TrainingHistory history;
  for (std::size_t i = 0; i < cfg.plan.phases.size(); ++i) {
    history.phases.push_back(
        run_phase(model, cfg, cfg.plan.phases[i], static_cast<int>(i), train, val, opts));
  }
  if (opts.checkpoint) save_checkpoint(model, *opts.checkpoint);
  return history;
}

// Softmax scores for every image, dropout off.
inline PredictionMatrix predict(Classifier& model, const LabelledImages& set,
                                const NormalizationScheme& scheme,
                                const std::vector<std::string>& class_names, int batch_size) {
  torch::NoGradGuard guard;
  model->eval();
  PredictionMatrix pm;
  pm.image_ids = set.ids;
  pm.true_labels = set.labels;
  pm.class_names = class_names;
  pm.scores = ScoreMatrix(set.size(), class_names.size());
  const auto n = static_cast<std::int64_t>(set.size());
  for (std::int64_t b = 0; b < n; b += batch_size) {
    const auto e = std::min<std::int64_t>(n, b + batch_size);
    auto probs = torch::softmax(model->forward(to_input(set, index_range(b, e), scheme)), 1)
                     .to(torch::kFloat64)
                     .contiguous();
    if (probs.size(1) != static_cast<std::int64_t>(class_names.size())) {
      throw ShapeError("model emits " + std::to_string(probs.size(1)) + " classes, expected " +
                       std::to_string(class_names.size()));
    }
    const auto* data = probs.data_ptr<double>();
    for (std::int64_t r = b; r < e; ++r) {
      for (std::size_t c = 0; c < class_names.size(); ++c) {
        pm.scores(r, c) = data[(r - b) * probs.size(1) + static_cast<std::int64_t>(c)];
      }
    }
  }
  return pm;
}

}  // namespace venation::nn
