#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "venation/nn/pipeline.hpp"

namespace fs = std::filesystem;
using namespace venation;

namespace {

// Exit codes: 0 success, 1 pipeline failure, 2 configuration error.
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

void log_line(const std::string& msg) { std::cerr << "[venation] " << msg << std::endl; }

// Run settings shared by subcommands: defaults < --config file < flags < environment
// fallbacks. Each flag writes the config key of the same name.
struct RunFlags {
  std::string config_file;
  nlohmann::json overrides = nlohmann::json::object();

  template <class T>
  void key(CLI::App* app, const std::string& name, const std::string& help) {
    std::string flag = "--" + name;
    std::replace(flag.begin(), flag.end(), '_', '-');
    app->add_option_function<T>(flag, [this, name](const T& v) { overrides[name] = v; }, help);
  }

  void toggle(CLI::App* app, const std::string& name, const std::string& help) {
    std::string flag = name;
    std::replace(flag.begin(), flag.end(), '_', '-');
    app->add_flag_function("--" + flag, [this, name](std::int64_t) { overrides[name] = true; },
                           help);
    app->add_flag_function("--no-" + flag, [this, name](std::int64_t) { overrides[name] = false; },
                           "Disable --" + flag);
  }

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON run config; flags override its keys")
        ->check(CLI::ExistingFile);
    key<std::string>(app, "dataset_root", "Species-per-folder image root");
    key<std::string>(app, "output_dir", "Run directory");
    key<std::string>(app, "model", "resnet50 | mobilenet_v2 | efficientnet_b0 | all");
    key<std::string>(app, "input_mode", "raw_rgb | venation");
    key<std::uint64_t>(app, "seed", "Seed for split, shuffling and head init");
    key<double>(app, "test_fraction", "Held-out fraction per class");
    key<int>(app, "median_kernel", "Odd median kernel size");
    key<std::string>(app, "magnitude_mode", "euclidean | absolute_sum");
    key<int>(app, "max_epochs", "Epoch cap for every phase");
    key<int>(app, "batch_size", "Mini-batch size");
    key<double>(app, "learning_rate", "Head-phase Adam learning rate");
    key<double>(app, "fine_tune_learning_rate", "Fine-tune SGD learning rate");
    key<std::string>(app, "weights_dir", "Directory of exported backbone weights");
    toggle(app, "pretrained", "Load pretrained backbone weights");
    toggle(app, "svg", "Also write SVG figures");
    toggle(app, "parallel", "Train models in separate processes");
  }

  RunConfig resolve() const {
    RunConfig rc = config_file.empty() ? RunConfig{} : read_run_config(config_file);
    merge_run_config(rc, overrides);
    apply_environment(rc);
    return rc;
  }
};

void print_diagnostics(const Diagnostics& d) {
  for (const auto& line : d.info) std::cout << line << "\n";
  for (const auto& line : d.fatal) std::cout << "fatal: " << line << "\n";
}

int run_validate(const RunFlags& flags) {
  const auto rc = flags.resolve();
  std::cout << to_json(rc).dump(2) << "\n";
  const auto d = validate_run(rc);
  print_diagnostics(d);
  std::cout << (d.ok() ? "ok" : "invalid") << "\n";
  return d.ok() ? 0 : kExitConfig;
}

int run_split(const RunFlags& flags, const std::string& out) {
  const auto rc = flags.resolve();
  rc.validate_values();
  if (rc.dataset_root.empty()) throw ConfigError("dataset_root is not set");
  const auto scan = scan_dataset(rc.dataset_root);
  for (const auto& w : scan.warnings) log_line("warning: " + w);
  const auto m = stratified_split(scan.manifest, rc.test_fraction, rc.seed);
  const fs::path path = out.empty() ? rc.output_dir / kManifestFile : fs::path(out);
  write_manifest(path, m);
  const auto train = m.class_counts(Split::train), test = m.class_counts(Split::test);
  for (int k = 0; k < m.class_count(); ++k) {
    std::cout << m.class_names[k] << ": " << train[k] << " train / " << test[k] << " test\n";
  }
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int run_preprocess(const RunFlags& flags, std::string input, const std::string& output,
                   const std::string& stages_dir) {
  const auto rc = flags.resolve();
  if (input.empty()) input = rc.dataset_root.string();
  if (input.empty()) throw ConfigError("--input is required");
  std::optional<fs::path> stages;
  if (!stages_dir.empty()) stages = stages_dir;
  const auto res = preprocess_directory(input, output, rc.venation, stages);
  for (const auto& w : res.warnings) log_line("warning: " + w);
  std::cout << "wrote " << res.written << " image(s) to " << output << "\n";
  return 0;
}

int run_train(const RunFlags& flags, const std::string& manifest) {
  const auto rc = flags.resolve();
  const fs::path path = manifest.empty() ? rc.output_dir / kManifestFile : fs::path(manifest);
  const auto m = read_manifest(path);
  if (rc.input_mode == InputMode::venation && rc.dataset_root.empty()) {
    throw ConfigError("venation input needs dataset_root to build its cache");
  }
  for (const auto& dir : nn::cmd_train(rc, m, log_line)) std::cout << dir.string() << "\n";
  return 0;
}

int run_evaluate(const std::vector<std::string>& model_dirs) {
  for (const auto& dir : model_dirs) {
    for (const auto& written : evaluate_model_dir(dir)) {
      const auto mr = read_metrics(written);
      std::printf("%s: accuracy %.4f\n", written.string().c_str(), mr.aggregates.accuracy);
    }
  }
  return 0;
}

int run_report(const std::vector<std::string>& inputs, const std::string& out, bool svg) {
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  std::vector<RunArtifacts> runs;
  for (const auto& dir : expand_run_dirs(paths)) runs.push_back(load_run_artifacts(dir));
  const auto res = write_report(runs, out, svg);
  for (const auto& w : res.warnings) log_line("warning: " + w);
  std::cout << summary_text(summary_table(runs));
  std::cout << "wrote " << res.written.size() << " file(s) to " << out << "\n";
  return 0;
}

fs::path self_executable(const char* argv0) {
  std::error_code ec;
  auto p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? fs::absolute(argv0) : p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Leaf species classification: split, preprocess, train, evaluate, report"};
  app.require_subcommand(1);

  RunFlags validate_flags, split_flags, preprocess_flags, train_flags, run_flags;

  auto* validate = app.add_subcommand("validate", "Check configuration and dataset, print them");
  validate_flags.attach(validate);

  auto* split = app.add_subcommand("split", "Scan the dataset and write a split manifest");
  split_flags.attach(split);
  std::string split_out;
  split->add_option("--out", split_out, "Manifest path (default <output-dir>/manifest.json)");

  auto* preprocess = app.add_subcommand("preprocess", "Venation-enhance a directory of images");
  preprocess_flags.attach(preprocess);
  std::string pre_in, pre_out, pre_stages;
  preprocess->add_option("--input", pre_in, "Input image tree (default dataset_root)");
  preprocess->add_option("--output", pre_out, "Mirrored PNG output tree")->required();
  preprocess->add_option("--stages-dir", pre_stages, "Also dump every intermediate stage here");

  auto* train = app.add_subcommand("train", "Train models on an existing manifest");
  train_flags.attach(train);
  std::string train_manifest;
  train->add_option("--manifest", train_manifest, "Manifest (default <output-dir>/manifest.json)");

  auto* evaluate = app.add_subcommand("evaluate", "Compute metrics from stored predictions");
  std::vector<std::string> eval_dirs;
  evaluate->add_option("--model-dir", eval_dirs, "Model directories")->required();

  auto* report = app.add_subcommand("report", "Render figures and the summary table");
  std::vector<std::string> report_runs;
  std::string report_out;
  bool report_svg = false;
  report->add_option("--runs", report_runs, "Run or model directories")->required();
  report->add_option("--out", report_out, "Output directory")->required();
  report->add_flag("--svg", report_svg, "Also write SVG figures");

  auto* run = app.add_subcommand("run", "split, train, evaluate and report in one run directory");
  run_flags.attach(run);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return run_validate(validate_flags);
    if (*split) return run_split(split_flags, split_out);
    if (*preprocess) return run_preprocess(preprocess_flags, pre_in, pre_out, pre_stages);
    if (*train) return run_train(train_flags, train_manifest);
    if (*evaluate) return run_evaluate(eval_dirs);
    if (*report) return run_report(report_runs, report_out, report_svg);
    if (*run) return nn::cmd_run(run_flags.resolve(), self_executable(argv[0]), log_line);
  } catch (const ConfigError& e) {
    log_line(std::string("error: ") + e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    log_line(std::string("error: ") + e.what());
    return kExitFailure;
  }
  return kExitConfig;
}
