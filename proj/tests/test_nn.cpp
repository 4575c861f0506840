#include <gtest/gtest.h>

#include <cstdlib>

#include "test_support.hpp"
#include "venation/nn/training.hpp"

using namespace venation;
using namespace venation::nn;
using testing_support::TempDir;

namespace venation {
// Readable parameter values in test names.
inline void PrintTo(Architecture a, std::ostream* os) { *os << to_string(a); }
}  // namespace venation

namespace {

LabelledImages synthetic_set(int classes, int per_class, int size, int variant_offset = 0) {
  LabelledImages s;
  for (int k = 0; k < classes; ++k) {
    for (int i = 0; i < per_class; ++i) {
      s.ids.push_back("c" + std::to_string(k) + "/" + std::to_string(i));
      s.labels.push_back(k);
      s.images.push_back(testing_support::synthetic_leaf(k, i + variant_offset, size, size));
    }
  }
  return s;
}

ModelConfig short_plan(ModelConfig c, int epochs) {
  c.backbone.pretrained = false;
  c.batch_size = 4;
  for (auto& p : c.plan.phases) p.max_epochs = epochs;
  return c;
}

const WeightSource kRandomInit{false, {}};

bool all_start_with_any(const std::vector<std::string>& names,
                        const std::vector<std::string>& prefixes) {
  for (const auto& n : names) {
    bool ok = false;
    for (const auto& p : prefixes) ok = ok || n.rfind(p, 0) == 0;
    if (!ok) return false;
  }
  return true;
}

}  // namespace

class TorchvisionEquivalence : public ::testing::TestWithParam<Architecture> {};

TEST_P(TorchvisionEquivalence, PooledFeaturesMatch) {
  const auto arch = GetParam();
  TempDir dir;
  const auto weights = dir / "w.pt";
  const auto probe = dir / "probe.pt";
  const std::string cmd = "python3 " VENATION_SOURCE_DIR "/tools/export_weights.py --arch " +
                          to_string(arch) + " --random-init --seed 11 --out " +
                          weights.string() + " --probe " + probe.string() + " > /dev/null 2>&1";
  if (std::system(cmd.c_str()) != 0) GTEST_SKIP() << "python3 with torchvision unavailable";

  auto backbone = make_backbone(arch);
  load_state_dict(*backbone, read_state_dict(weights), weights.string());
  backbone->eval();
  const auto p = read_state_dict(probe);
  torch::NoGradGuard guard;
  const auto got = backbone->features(p.at("input"));
  const auto& want = p.at("features");
  ASSERT_EQ(got.sizes(), want.sizes());
  const double scale = want.abs().max().item<double>();
  EXPECT_LT((got - want).abs().max().item<double>(), 1e-4 * std::max(1.0, scale));
}

INSTANTIATE_TEST_SUITE_P(Backbones, TorchvisionEquivalence,
                         ::testing::ValuesIn(kAllArchitectures),
                         [](const auto& info) { return to_string(info.param); });

TEST(Backbone, PooledWidths) {
  torch::NoGradGuard guard;
  for (auto arch : kAllArchitectures) {
    auto bb = make_backbone(arch);
    bb->eval();
    const auto f = bb->features(torch::zeros({1, 3, 64, 64}));
    EXPECT_EQ(f.size(1), pooled_feature_width(arch)) << to_string(arch);
  }
}

TEST(Backbone, StagesComposeToFeatures) {
  torch::NoGradGuard guard;
  auto bb = make_backbone(Architecture::efficientnet_b0);
  bb->eval();
  const auto x = torch::randn({2, 3, 64, 64});
  const auto mid = bb->forward_stages(x, 0, 5);
  const auto rest = Backbone::pool(bb->forward_stages(mid, 5, bb->stage_count()));
  EXPECT_TRUE(torch::allclose(rest, bb->features(x)));
}

TEST(Backbone, EfficientNetLastTenUnitsAreTopBlockAndHeadConv) {
  auto bb = make_backbone(Architecture::efficientnet_b0);
  const auto units = parameterized_units(*bb);
  ASSERT_GE(units.size(), 10u);
  for (std::size_t i = units.size() - 10; i < units.size(); ++i) {
    EXPECT_TRUE(units[i].first.rfind("features.7.", 0) == 0 ||
                units[i].first.rfind("features.8.", 0) == 0)
        << units[i].first;
  }
  EXPECT_EQ(units[units.size() - 11].first.rfind("features.6.", 0), 0u);
}

TEST(Classifier, ShapesAndSoftmax) {
  auto model = build_classifier(short_plan(mobilenet_v2_config(15), 1), kRandomInit, 1);
  model->eval();
  torch::NoGradGuard guard;
  const auto probs = torch::softmax(model->forward(torch::randn({4, 3, 64, 64})), 1);
  ASSERT_EQ(probs.sizes(), (std::vector<std::int64_t>{4, 15}));
  EXPECT_LT((probs.sum(1) - 1).abs().max().item<double>(), 1e-5);
}

TEST(Classifier, HeadInitDependsOnlyOnSeed) {
  const auto cfg = short_plan(mobilenet_v2_config(5), 1);
  auto a = build_classifier(cfg, kRandomInit, 9);
  auto b = build_classifier(cfg, kRandomInit, 9);
  auto c = build_classifier(cfg, kRandomInit, 10);
  EXPECT_TRUE(torch::equal(a->head->dense->weight, b->head->dense->weight));
  EXPECT_TRUE(torch::equal(a->head->output->weight, b->head->output->weight));
  EXPECT_FALSE(torch::equal(a->head->dense->weight, c->head->dense->weight));
  EXPECT_EQ(a->head->dense->bias.abs().sum().item<double>(), 0.0);
  const double bound = std::sqrt(6.0 / (1280 + 128));
  EXPECT_LE(a->head->dense->weight.abs().max().item<double>(), bound);
}

TEST(Classifier, HeadParameterCountMatchesSpec) {
  const auto cfg = short_plan(resnet50_config(15), 1);
  auto model = build_classifier(cfg, kRandomInit, 0);
  std::int64_t n = 0;
  for (const auto& p : model->head->parameters()) n += p.numel();
  EXPECT_EQ(n, cfg.head.parameter_count(2048));
}

TEST(Classifier, TrainableSuffix) {
  auto model = build_classifier(short_plan(efficientnet_b0_config(3), 1), kRandomInit, 0);
  set_trainable_suffix(model, 0);
  EXPECT_EQ(trainable_parameter_names(model).size(), 4u);
  EXPECT_TRUE(all_start_with_any(trainable_parameter_names(model), {"head."}));
  EXPECT_EQ(first_trainable_stage(*model->backbone), model->backbone->stage_count());

  set_trainable_suffix(model, 10);
  const auto names = trainable_parameter_names(model);
  EXPECT_TRUE(all_start_with_any(
      names, {"backbone.features.7.", "backbone.features.8.", "head."}));
  EXPECT_EQ(first_trainable_stage(*model->backbone), 7);

  const auto total = static_cast<int>(parameterized_units(*model->backbone).size());
  set_trainable_suffix(model, total);
  std::size_t all = model->parameters().size();
  EXPECT_EQ(trainable_parameter_names(model).size(), all);
  EXPECT_THROW(set_trainable_suffix(model, total + 1), ConfigError);
}

TEST(Classifier, BackboneStaysInInferenceMode) {
  auto model = build_classifier(short_plan(mobilenet_v2_config(3), 1), kRandomInit, 0);
  model->train();
  EXPECT_TRUE(model->head->is_training());
  EXPECT_FALSE(model->backbone->is_training());
  for (const auto& m : model->backbone->modules()) EXPECT_FALSE(m->is_training());
}

TEST(Classifier, MissingPretrainedWeightsNameTheRemedy) {
  auto cfg = resnet50_config(3);
  try {
    build_classifier(cfg, {true, "/nonexistent/weights"}, 0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("export_weights.py"), std::string::npos);
  }
}

TEST(Training, ToInputMatchesScalarNormalization) {
  const auto set = synthetic_set(1, 1, 16);
  const auto scheme = native_normalization(Architecture::resnet50);
  const auto t = to_input(set, {0}, scheme);
  const auto ref = normalize_for_model(set.images[0], scheme);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c)
        EXPECT_FLOAT_EQ(t[0][c][y][x].item<float>(), ref.at(y, x, c));
}

TEST(Training, TwoPhaseMicroRunKeepsFrozenWeightsAndRestoresBest) {
  const auto cfg = short_plan(efficientnet_b0_config(2), 2);
  const auto train = synthetic_set(2, 8, 64);
  const auto val = synthetic_set(2, 4, 64, 100);
  auto model = build_classifier(cfg, kRandomInit, 5);

  set_trainable_suffix(model, cfg.plan.phases[1].trainable_backbone_units);
  const auto frozen_before = frozen_checksum(model);
  TempDir dir;
  TrainOptions opts;
  opts.seed = 5;
  opts.checkpoint = dir / "m.best.ckpt";
  const auto hist = train_classifier(model, cfg, train, val, opts);

  ASSERT_EQ(hist.phases.size(), 2u);
  EXPECT_EQ(hist.phases[0].records.size(), 2u);
  EXPECT_LE(hist.phases[1].records.size(), 2u);
  EXPECT_TRUE(all_start_with_any(trainable_parameter_names(model),
                                 {"backbone.features.7.", "backbone.features.8.", "head."}));
  EXPECT_EQ(frozen_checksum(model), frozen_before);

  const auto& last = hist.phases.back();
  const double best_loss = last.records.at(last.best_epoch - 1).val_loss;
  const int stage = first_trainable_stage(*model->backbone);
  const auto cache = frozen_prefix(model, val, cfg.normalization, stage, cfg.batch_size);
  const auto rescored = score_cached(model, stage, cache, label_tensor(val.labels), 4);
  EXPECT_NEAR(rescored.loss, best_loss, 1e-4);

  const auto p1 = predict(model, val, cfg.normalization, {"a", "b"}, 4);
  const auto p2 = predict(model, val, cfg.normalization, {"a", "b"}, 3);
  EXPECT_NO_THROW(p1.validate());
  for (std::size_t r = 0; r < p1.size(); ++r)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(p1.scores(r, c), p2.scores(r, c), 1e-6);

  auto reloaded = build_classifier(cfg, kRandomInit, 77);
  load_checkpoint(reloaded, *opts.checkpoint);
  const auto p3 = predict(reloaded, val, cfg.normalization, {"a", "b"}, 4);
  for (std::size_t r = 0; r < p1.size(); ++r)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_DOUBLE_EQ(p1.scores(r, c), p3.scores(r, c));
}

TEST(Training, SameSeedSameHistory) {
  const auto cfg = short_plan(mobilenet_v2_config(2), 2);
  const auto train = synthetic_set(2, 6, 48);
  const auto val = synthetic_set(2, 3, 48, 50);
  auto a = build_classifier(cfg, kRandomInit, 3);
  auto b = build_classifier(cfg, kRandomInit, 3);
  const auto ha = train_classifier(a, cfg, train, val, {3, {}, {}});
  const auto hb = train_classifier(b, cfg, train, val, {3, {}, {}});
  ASSERT_EQ(ha.phases[0].records.size(), hb.phases[0].records.size());
  for (std::size_t i = 0; i < ha.phases[0].records.size(); ++i) {
    EXPECT_DOUBLE_EQ(ha.phases[0].records[i].train_loss, hb.phases[0].records[i].train_loss);
    EXPECT_DOUBLE_EQ(ha.phases[0].records[i].val_loss, hb.phases[0].records[i].val_loss);
  }
}

TEST(Training, NonFiniteLossAborts) {
  const auto cfg = short_plan(mobilenet_v2_config(2), 2);
  auto model = build_classifier(cfg, kRandomInit, 0);
  {
    torch::NoGradGuard guard;
    model->head->output->weight.fill_(std::numeric_limits<float>::quiet_NaN());
  }
  const auto set = synthetic_set(2, 2, 32);
  EXPECT_THROW(train_classifier(model, cfg, set, set, {0, {}, {}}), TrainingError);
}

TEST(Classifier, SerializedConfigRebuildsIdenticalArchitecture) {
  for (auto arch : kAllArchitectures) {
    const auto cfg = short_plan(default_config(arch, 6), 1);
    const auto copy = model_config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
    auto a = build_classifier(cfg, kRandomInit, 0);
    auto b = build_classifier(copy, kRandomInit, 1);
    const auto pa = a->named_parameters();
    const auto pb = b->named_parameters();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      EXPECT_EQ(pa[i].key(), pb[i].key());
      EXPECT_EQ(pa[i].value().sizes(), pb[i].value().sizes());
    }
  }
}
