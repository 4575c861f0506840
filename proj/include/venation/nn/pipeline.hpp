#pragma once

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "venation/dataset.hpp"
#include "venation/history.hpp"
#include "venation/nn/classifier.hpp"
#include "venation/nn/training.hpp"
#include "venation/orchestration.hpp"
#include "venation/run_config.hpp"

extern char** environ;

// Training-side pipeline steps: image loading, per-model runs, the composite run.
namespace venation::nn {

inline std::string checkpoint_file_name(const std::string& model_id) {
  return model_id + ".best.ckpt";
}

// Directory the model inputs are read from for `rc`.
inline fs::path image_root(const RunConfig& rc) {
  return rc.input_mode == InputMode::venation ? rc.output_dir / kVenationCacheDir
                                              : rc.dataset_root;
}

// Decoded, resized images of one split; ids are the manifest paths.
inline LabelledImages load_split(const DatasetManifest& m, const fs::path& root, Split split,
                                 InputMode mode) {
  LabelledImages set;
  for (const auto& r : m.records) {
    if (r.split != split) continue;
    const fs::path rel = mode == InputMode::venation ? venation_output_path(r.path) : fs::path(r.path);
    set.ids.push_back(r.path);
    set.labels.push_back(r.class_index);
    set.images.push_back(load_image(root / rel));
  }
  if (set.size() == 0) throw DataError("manifest has no " + to_string(split) + " records");
  return set;
}

struct SplitImages {
  LabelledImages train;
  LabelledImages test;
};

// Builds the venation cache when needed, then loads both splits.
inline SplitImages prepare_images(const RunConfig& rc, const DatasetManifest& m,
                                  const Logger& log = {}) {
  if (rc.input_mode == InputMode::venation) {
    const auto res = build_venation_cache(m, rc.dataset_root, image_root(rc), rc.venation);
    if (log) log("venation cache: " + std::to_string(res.written) + " image(s) written");
  }
  const auto root = image_root(rc);
  return {load_split(m, root, Split::train, rc.input_mode),
          load_split(m, root, Split::test, rc.input_mode)};
}

// Trains one architecture and writes config, history, checkpoint and both
// prediction files into `<output_dir>/<model_id>/`. The held-out split
// doubles as the per-epoch validation set.
inline fs::path train_model_dir(const RunConfig& rc, Architecture arch, const DatasetManifest& m,
                                const SplitImages& images, const Logger& log = {}) {
  const auto mc = resolve_model_config(rc, arch, m.class_count());
  const auto dir = rc.output_dir / mc.model_id;
  fs::create_directories(dir);
  fs::remove(dir / kMetricsFile);
  fs::remove(dir / kTrainMetricsFile);

  auto config = to_json(mc);
  config["seed"] = rc.seed;
  config["input_mode"] = to_string(rc.input_mode);
  config["class_names"] = m.class_names;
  write_text(dir / kConfigFile, config.dump(2) + "\n");

  auto model = build_classifier(mc, WeightSource{rc.pretrained, rc.weights_dir}, rc.seed);
  const TrainOptions opts{rc.seed, dir / checkpoint_file_name(mc.model_id), log};
  const auto history = train_classifier(model, mc, images.train, images.test, opts);
  auto hj = to_json(history);
  hj["seed"] = rc.seed;
  write_text(dir / kHistoryFile, hj.dump(2) + "\n");

  write_predictions(dir / kPredictionsFile,
                    predict(model, images.test, mc.normalization, m.class_names, mc.batch_size));
  write_predictions(dir / kTrainPredictionsFile,
                    predict(model, images.train, mc.normalization, m.class_names, mc.batch_size));
  return dir;
}

// Trains every selected architecture of `rc` on an existing manifest.
inline std::vector<fs::path> cmd_train(const RunConfig& rc, const DatasetManifest& m,
                                       const Logger& log = {}) {
  rc.validate_values();
  const auto images = prepare_images(rc, m, log);
  std::vector<fs::path> dirs;
  for (auto arch : rc.architectures()) dirs.push_back(train_model_dir(rc, arch, m, images, log));
  return dirs;
}

namespace detail {

// Runs `exe train` for each architecture concurrently; throws if any fails.
inline void train_in_subprocesses(const fs::path& exe, const RunConfig& rc,
                                  const Logger& log) {
  std::vector<std::pair<std::string, pid_t>> children;
  for (auto arch : rc.architectures()) {
    std::vector<std::string> args{exe.string(),
                                  "train",
                                  "--config",
                                  (rc.output_dir / kRunConfigFile).string(),
                                  "--manifest",
                                  (rc.output_dir / kManifestFile).string(),
                                  "--model",
                                  to_string(arch)};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    if (posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), environ) != 0) {
      throw Error("cannot start training process for " + to_string(arch));
    }
    if (log) log("started " + to_string(arch) + " (pid " + std::to_string(pid) + ")");
    children.emplace_back(to_string(arch), pid);
  }
  std::string failed;
  for (const auto& [name, pid] : children) {
    int status = 0;
    if (waitpid(pid, &status, 0) < 0 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      failed += (failed.empty() ? "" : ", ") + name;
    }
  }
  if (!failed.empty()) throw Error("training failed for " + failed);
}

}  // namespace detail

inline std::vector<std::string> model_ids(const RunConfig& rc) {
  std::vector<std::string> ids;
  for (auto arch : rc.architectures()) ids.push_back(to_string(arch));
  return ids;
}

inline void write_run_config(const RunConfig& rc) {
  auto j = to_json(rc);
  j["models"] = model_ids(rc);
  write_text(rc.output_dir / kRunConfigFile, j.dump(2) + "\n");
}

// split -> (venation cache) -> train -> evaluate -> report -> digest.
// On failure the partial run directory is kept with a FAILED marker.
// `exe` is this program, used only when `rc.parallel` is set.
inline int cmd_run(const RunConfig& rc, const fs::path& exe = {}, const Logger& log = {}) {
  const auto diag = validate_run(rc);
  for (const auto& f : diag.fatal) {
    if (log) log("fatal: " + f);
  }
  if (!diag.ok()) return 2;
  const auto& run_dir = rc.output_dir;
  fs::remove(run_dir / kFailedMarker);
  fs::remove(run_dir / kDigestFile);
  try {
    write_run_config(rc);
    const auto scan = scan_dataset(rc.dataset_root);
    for (const auto& w : scan.warnings) {
      if (log) log("warning: " + w);
    }
    const auto manifest = stratified_split(scan.manifest, rc.test_fraction, rc.seed);
    write_manifest(run_dir / kManifestFile, manifest);
    if (log) {
      log("split: " + std::to_string(manifest.subset(Split::train).size()) + " train, " +
          std::to_string(manifest.subset(Split::test).size()) + " test");
    }

    const auto archs = rc.architectures();
    if (rc.parallel && archs.size() > 1 && !exe.empty()) {
      if (rc.input_mode == InputMode::venation) {
        build_venation_cache(manifest, rc.dataset_root, image_root(rc), rc.venation);
      }
      detail::train_in_subprocesses(exe, rc, log);
    } else {
      cmd_train(rc, manifest, log);
    }

    std::vector<RunArtifacts> runs;
    for (const auto& id : model_ids(rc)) {
      evaluate_model_dir(run_dir / id);
      runs.push_back(load_run_artifacts(run_dir / id));
    }
    const auto report = write_report(runs, run_dir, rc.svg);
    for (const auto& w : report.warnings) {
      if (log) log("warning: " + w);
    }
    write_digest(run_dir);
    if (log) log("run complete: " + run_dir.string());
    return 0;
  } catch (const std::exception& e) {
    if (log) log(std::string("error: ") + e.what());
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    std::ofstream(run_dir / kFailedMarker) << e.what() << "\n";
    return 1;
  }
}

}  // namespace venation::nn
