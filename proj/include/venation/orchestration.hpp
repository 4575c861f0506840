#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "venation/dataset.hpp"
#include "venation/digest.hpp"
#include "venation/metrics.hpp"
#include "venation/metrics_io.hpp"
#include "venation/predictions.hpp"
#include "venation/preprocess.hpp"
#include "venation/report.hpp"
#include "venation/run_config.hpp"

// Pipeline steps that need no tensor runtime.
namespace venation {

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kRunConfigFile = "run_config.json";
inline constexpr const char* kDigestFile = "MANIFEST.sha";
inline constexpr const char* kFailedMarker = "FAILED";
inline constexpr const char* kVenationCacheDir = "venation_cache";

struct Diagnostics {
  std::vector<std::string> info;
  std::vector<std::string> fatal;
  bool ok() const noexcept { return fatal.empty(); }
};

inline bool probe_writable(const fs::path& dir, std::string& why) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    why = "cannot create output directory " + dir.string() + ": " + ec.message();
    return false;
  }
  const auto probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!(f << "ok")) {
      why = "output directory " + dir.string() + " is not writable";
      return false;
    }
  }
  fs::remove(probe, ec);
  return true;
}

// Dry run over the resolved configuration.
inline Diagnostics validate_run(const RunConfig& rc) {
  Diagnostics d;
  try {
    rc.validate_values();
  } catch (const Error& e) {
    d.fatal.push_back(e.what());
  }
  if (rc.dataset_root.empty()) {
    d.fatal.push_back(std::string("dataset_root is not set (flag, config file or ") +
                      kDataRootEnv + ")");
  } else {
    try {
      const auto scan = scan_dataset(rc.dataset_root);
      const auto& m = scan.manifest;
      const auto counts = m.class_counts();
      const bool uniform = std::adjacent_find(counts.begin(), counts.end(),
                                              std::not_equal_to<>()) == counts.end();
      if (uniform) {
        d.info.push_back(std::to_string(m.class_count()) + " classes x " +
                         std::to_string(counts.front()) + " images");
      } else {
        d.info.push_back(std::to_string(m.class_count()) + " classes, " +
                         std::to_string(m.records.size()) + " images (unbalanced)");
      }
      for (int k = 0; k < m.class_count(); ++k) {
        d.info.push_back("  " + m.class_names[k] + ": " + std::to_string(counts[k]));
        const int n_test = stratified_test_count(counts[k], rc.test_fraction);
        if (n_test < 1 || n_test >= counts[k]) {
          d.fatal.push_back("class '" + m.class_names[k] + "' with " +
                            std::to_string(counts[k]) +
                            " image(s) cannot supply both a train and a test item");
        }
      }
      for (const auto& w : scan.warnings) d.info.push_back("warning: " + w);
    } catch (const Error& e) {
      d.fatal.push_back(e.what());
    }
  }
  if (rc.pretrained) {
    try {
      for (auto arch : rc.architectures()) {
        const auto path = rc.weights_dir / weights_file_name(arch);
        if (!fs::exists(path)) {
          d.fatal.push_back("pretrained weights not found at " + path.string() + "; " +
                            export_hint(arch, rc.weights_dir));
        }
      }
    } catch (const Error&) {
      // unknown model name, already reported above
    }
  }
  std::string why;
  if (!probe_writable(rc.output_dir, why)) d.fatal.push_back(why);
  return d;
}

// Output location of the enhanced copy of `rel`: same path, PNG extension.
inline fs::path venation_output_path(const fs::path& rel) {
  auto p = rel;
  p.replace_extension(".png");
  return p;
}

struct PreprocessResult {
  std::size_t written = 0;
  std::vector<std::string> warnings;
};

inline void dump_stages(const VenationStages& s, const fs::path& dir) {
  write_png(dir / "1_grayscale.png", s.grayscale);
  write_png(dir / "2_median.png", s.median);
  write_png(dir / "3_sobel_x.png", visualize_field(s.sobel.gx));
  write_png(dir / "4_sobel_y.png", visualize_field(s.sobel.gy));
  write_png(dir / "5_magnitude.png", s.magnitude);
  write_png(dir / "6_complement.png", s.output);
}

// Enhances `rels` (relative to `in_root`) into a mirrored tree under
// `out_root`; undecodable files are skipped with a warning.
inline PreprocessResult preprocess_files(const fs::path& in_root, const std::vector<fs::path>& rels,
                                         const fs::path& out_root, const VenationConfig& cfg,
                                         const std::optional<fs::path>& stages_dir = {},
                                         bool reuse_existing = false) {
  cfg.validate();
  PreprocessResult res;
  std::set<fs::path> targets;
  for (const auto& rel : rels) {
    const auto out_rel = venation_output_path(rel);
    if (!targets.insert(out_rel).second) {
      throw DataError("two inputs map to " + out_rel.string() + "; rename one of them");
    }
    const auto out = out_root / out_rel;
    if (reuse_existing && fs::exists(out)) continue;
    RasterImage rgb;
    try {
      rgb = decode_image(in_root / rel);
    } catch (const DecodeError& e) {
      res.warnings.push_back(e.what());
      continue;
    }
    if (rgb.channels() == 1) rgb = replicate_channels(rgb);
    const auto stages = venation_stages(rgb, cfg);
    write_png(out, stages.output);
    if (stages_dir) {
      auto dir = *stages_dir / rel;
      dir.replace_extension();
      dump_stages(stages, dir);
    }
    ++res.written;
  }
  return res;
}

inline std::vector<fs::path> list_images(const fs::path& root) {
  if (!fs::is_directory(root)) throw ConfigError("input directory not found: " + root.string());
  std::vector<fs::path> rels;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && is_image_extension(e.path())) {
      rels.push_back(fs::relative(e.path(), root));
    }
  }
  std::sort(rels.begin(), rels.end());
  return rels;
}

inline PreprocessResult preprocess_directory(const fs::path& in_root, const fs::path& out_root,
                                             const VenationConfig& cfg,
                                             const std::optional<fs::path>& stages_dir = {}) {
  return preprocess_files(in_root, list_images(in_root), out_root, cfg, stages_dir);
}

// Venation copies of every manifest image under `cache_root`.
inline PreprocessResult build_venation_cache(const DatasetManifest& m, const fs::path& dataset_root,
                                             const fs::path& cache_root,
                                             const VenationConfig& cfg) {
  std::vector<fs::path> rels;
  for (const auto& r : m.records) rels.emplace_back(r.path);
  auto res = preprocess_files(dataset_root, rels, cache_root, cfg, {}, true);
  if (!res.warnings.empty()) {
    throw DataError("venation cache: " + res.warnings.front());
  }
  return res;
}

// metrics.json / metrics_train.json from the predictions in `model_dir`,
// stamped with the seed recorded in its config.json if there is one.
inline std::vector<fs::path> evaluate_model_dir(const fs::path& model_dir) {
  std::optional<std::uint64_t> seed;
  if (std::ifstream cfg(model_dir / kConfigFile); cfg) {
    const auto j = nlohmann::json::parse(cfg, nullptr, false);
    if (j.is_object() && j.contains("seed") && j["seed"].is_number_unsigned()) {
      seed = j["seed"].get<std::uint64_t>();
    }
  }
  std::vector<fs::path> written;
  const std::pair<const char*, const char*> pairs[] = {{kPredictionsFile, kMetricsFile},
                                                       {kTrainPredictionsFile, kTrainMetricsFile}};
  for (const auto& [pred, met] : pairs) {
    if (!fs::exists(model_dir / pred)) {
      if (std::string(pred) == kPredictionsFile) {
        throw DataError("missing " + (model_dir / pred).string());
      }
      continue;
    }
    write_metrics(model_dir / met, evaluate(read_predictions(model_dir / pred)), seed);
    written.push_back(model_dir / met);
  }
  return written;
}

// `sha256sum`-compatible listing of every file under `dir` except itself.
inline std::string digest_listing(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto rel = fs::relative(e.path(), dir);
    if (rel == kDigestFile) continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) out += sha256_file(dir / f) + "  " + f.generic_string() + "\n";
  return out;
}

inline void write_digest(const fs::path& dir) {
  write_text(dir / kDigestFile, digest_listing(dir));
}

}  // namespace venation
