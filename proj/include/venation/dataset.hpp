#pragma once

// Class-per-directory corpus ingestion, deterministic stratified splitting
// and the persisted dataset manifest.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "venation/errors.hpp"
#include "venation/image_io.hpp"
#include "venation/raster.hpp"

namespace venation {

namespace fs = std::filesystem;

inline constexpr int kManifestVersion = 1;
inline constexpr int kModelInputSize = 224;

enum class Split { unassigned, train, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    default: return "unassigned";
  }
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "unassigned") return Split::unassigned;
  throw ConfigError("unknown split '" + s + "'");
}

struct SpeciesLabel {
  int index = 0;
  std::string name;
};

struct ManifestRecord {
  std::string path;  // relative to the dataset root, '/' separated
  int class_index = 0;
  Split split = Split::unassigned;

  friend bool operator==(const ManifestRecord&,
                         const ManifestRecord&) = default;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ManifestRecord> records;
  std::optional<std::uint64_t> seed;
  std::optional<double> test_fraction;

  int class_count() const noexcept {
    return static_cast<int>(class_names.size());
  }

  SpeciesLabel label(int index) const {
    if (index < 0 || index >= class_count()) {
      throw ConfigError("class index " + std::to_string(index) +
                        " out of range");
    }
    return {index, class_names[index]};
  }

  int index_of(const std::string& name) const {
    auto it = std::find(class_names.begin(), class_names.end(), name);
    if (it == class_names.end()) {
      throw ConfigError("unknown class '" + name + "'");
    }
    return static_cast<int>(it - class_names.begin());
  }

  std::vector<int> class_counts() const {
    std::vector<int> counts(class_names.size(), 0);
    for (const auto& r : records) ++counts[r.class_index];
    return counts;
  }

  std::vector<int> class_counts(Split split) const {
    std::vector<int> counts(class_names.size(), 0);
    for (const auto& r : records)
      if (r.split == split) ++counts[r.class_index];
    return counts;
  }

  std::vector<ManifestRecord> subset(Split split) const {
    std::vector<ManifestRecord> out;
    for (const auto& r : records)
      if (r.split == split) out.push_back(r);
    return out;
  }

  friend bool operator==(const DatasetManifest&,
                         const DatasetManifest&) = default;
};

struct ScanResult {
  DatasetManifest manifest;
  std::vector<std::string> warnings;
};

inline bool is_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".tif" || ext == ".tiff" || ext == ".png" || ext == ".jpg" ||
         ext == ".jpeg";
}

namespace detail {

inline bool is_hidden(const fs::path& p) {
  const auto name = p.filename().string();
  return !name.empty() && name.front() == '.';
}

}  // namespace detail

// Walks <root>/<species>/<image>. Every candidate file is fully decoded;
// undecodable files are skipped with a warning.
inline ScanResult scan_dataset(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw ConfigError("dataset root is not a directory: " + root.string());
  }

  std::vector<std::string> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && !detail::is_hidden(entry.path())) {
      class_dirs.push_back(entry.path().filename().string());
    }
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.size() < 2) {
    throw DataError("dataset root must contain at least 2 class directories: " +
                    root.string());
  }

  ScanResult result;
  result.manifest.class_names = class_dirs;
  for (int k = 0; k < static_cast<int>(class_dirs.size()); ++k) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(root / class_dirs[k])) {
      if (entry.is_regular_file() && !detail::is_hidden(entry.path()) &&
          is_image_extension(entry.path())) {
        files.push_back(entry.path().filename().string());
      }
    }
    std::sort(files.begin(), files.end());

    int kept = 0;
    for (const auto& file : files) {
      const std::string rel = class_dirs[k] + "/" + file;
      try {
        (void)decode_image(root / class_dirs[k] / file);
      } catch (const DecodeError&) {
        result.warnings.push_back("skipping undecodable file " + rel);
        continue;
      }
      result.manifest.records.push_back({rel, k, Split::unassigned});
      ++kept;
    }
    if (kept == 0) {
      throw DataError("class directory holds no decodable image: " +
                      (root / class_dirs[k]).string());
    }
  }
  return result;
}

namespace detail {

// Unbiased draw in [0, bound) by rejection; the standard distributions are
// implementation-defined and would make splits platform-dependent.
inline std::uint64_t uniform_below(std::mt19937_64& engine,
                                   std::uint64_t bound) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw;
  do {
    draw = engine();
  } while (draw >= limit);
  return draw % bound;
}

inline std::mt19937_64 class_engine(std::uint64_t seed, int class_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(class_index)};
  return std::mt19937_64(seq);
}

}  // namespace detail

// Number of held-out items for a class of `total` images.
inline int stratified_test_count(int total, double test_fraction) {
  return static_cast<int>(std::lround(test_fraction * total));
}

// Per-class exact split. Within each class the (path-sorted) records are
// permuted by a Fisher-Yates shuffle driven by a seed-derived engine; the
// first round(f * n) become test.
inline DatasetManifest stratified_split(const DatasetManifest& manifest,
                                        double test_fraction,
                                        std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
  for (const auto& r : manifest.records) {
    if (r.split != Split::unassigned) {
      throw ConfigError("manifest already has split assignments");
    }
  }

  DatasetManifest out = manifest;
  std::sort(out.records.begin(), out.records.end(),
            [](const ManifestRecord& a, const ManifestRecord& b) {
              return std::tie(a.class_index, a.path) <
                     std::tie(b.class_index, b.path);
            });
  out.seed = seed;
  out.test_fraction = test_fraction;

  std::vector<std::vector<std::size_t>> members(out.class_names.size());
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    members[out.records[i].class_index].push_back(i);
  }

  for (int k = 0; k < out.class_count(); ++k) {
    auto& idx = members[k];
    const int total = static_cast<int>(idx.size());
    const int n_test = stratified_test_count(total, test_fraction);
    if (n_test < 1 || n_test >= total) {
      throw DataError("class '" + out.class_names[k] + "' with " +
                      std::to_string(total) +
                      " image(s) cannot supply both a train and a test item");
    }
    auto engine = detail::class_engine(seed, k);
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
      std::swap(idx[i], idx[detail::uniform_below(engine, i + 1)]);
    }
    for (int j = 0; j < total; ++j) {
      out.records[idx[j]].split = j < n_test ? Split::test : Split::train;
    }
  }
  return out;
}

inline std::vector<float> one_hot(int index, int class_count) {
  if (class_count < 1 || index < 0 || index >= class_count) {
    throw ConfigError("one_hot: index " + std::to_string(index) +
                      " outside [0, " + std::to_string(class_count) + ")");
  }
  std::vector<float> v(class_count, 0.0f);
  v[index] = 1.0f;
  return v;
}

// Decodes, replicates grayscale to three channels and resamples
// bilinearly to the target size.
inline RasterImage load_image(const fs::path& path,
                              int height = kModelInputSize,
                              int width = kModelInputSize) {
  RasterImage img = decode_image(path);
  if (img.channels() == 1) img = replicate_channels(img);
  return resize_bilinear(img, height, width);
}

// --- serialization -------------------------------------------------------

inline nlohmann::ordered_json to_json(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["version"] = kManifestVersion;
  j["seed"] = m.seed ? nlohmann::ordered_json(*m.seed) : nlohmann::ordered_json(nullptr);
  j["test_fraction"] =
      m.test_fraction ? nlohmann::ordered_json(*m.test_fraction) : nlohmann::ordered_json(nullptr);
  j["class_names"] = m.class_names;
  auto records = nlohmann::ordered_json::array();
  for (const auto& r : m.records) {
    nlohmann::ordered_json rec;
    rec["path"] = r.path;
    rec["class_index"] = r.class_index;
    rec["split"] = to_string(r.split);
    records.push_back(std::move(rec));
  }
  j["records"] = std::move(records);
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != kManifestVersion) {
    throw ConfigError("unsupported manifest version");
  }
  DatasetManifest m;
  if (!j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("test_fraction").is_null()) {
    m.test_fraction = j.at("test_fraction").get<double>();
  }
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  for (const auto& rec : j.at("records")) {
    ManifestRecord r{rec.at("path").get<std::string>(),
                     rec.at("class_index").get<int>(),
                     parse_split(rec.at("split").get<std::string>())};
    if (r.class_index < 0 || r.class_index >= m.class_count()) {
      throw ConfigError("manifest record class index out of range: " + r.path);
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

inline std::string serialize_manifest(const DatasetManifest& m) {
  return to_json(m).dump(2) + "\n";
}

inline void write_manifest(const fs::path& path, const DatasetManifest& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write manifest " + path.string());
  out << serialize_manifest(m);
}

inline DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read manifest " + path.string());
  try {
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest " + path.string() + ": " + e.what());
  }
}

}  // namespace venation
