#include <gtest/gtest.h>

#include <opencv2/imgcodecs.hpp>
#include <cstring>
#include <numeric>
#include <random>
#include <set>

#include "test_support.hpp"
#include "venation/dataset.hpp"

using namespace venation;
using testing_support::TempDir;

namespace {

DatasetManifest synthetic_manifest(const std::vector<int>& sizes) {
  DatasetManifest m;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    m.class_names.push_back("class_" + std::to_string(k));
    for (int i = 0; i < sizes[k]; ++i) {
      m.records.push_back({m.class_names.back() + "/img_" + std::to_string(i) + ".tif",
                           static_cast<int>(k), Split::unassigned});
    }
  }
  return m;
}

}  // namespace

TEST(Scan, MinimalCorpus) {
  TempDir dir;
  testing_support::write_corpus(dir.path(), 2, 1);
  const auto res = scan_dataset(dir.path());
  EXPECT_EQ(res.manifest.class_count(), 2);
  EXPECT_EQ(res.manifest.records.size(), 2u);
  EXPECT_TRUE(res.warnings.empty());
  EXPECT_EQ(res.manifest.class_names[0], "species_00");
  EXPECT_EQ(res.manifest.records[1].path, "species_01/leaf_000.png");
}

TEST(Scan, ClassOrderIsLexicographic) {
  TempDir dir;
  for (const char* name : {"Ulmus", "Acer", "Betula"}) {
    write_png(dir.path() / name / "a.png", RasterImage(8, 8, 3, 9));
  }
  const auto m = scan_dataset(dir.path()).manifest;
  EXPECT_EQ(m.class_names, (std::vector<std::string>{"Acer", "Betula", "Ulmus"}));
  for (int k = 0; k < m.class_count(); ++k) {
    EXPECT_EQ(m.index_of(m.label(k).name), k);
  }
}

TEST(Scan, CorruptFileIsSkippedWithWarning) {
  TempDir dir;
  testing_support::write_corpus(dir.path(), 2, 5);
  testing_support::truncate_file(dir.path() / "species_01/leaf_002.png", 40);
  const auto res = scan_dataset(dir.path());
  EXPECT_EQ(res.manifest.records.size(), 9u);
  ASSERT_EQ(res.warnings.size(), 1u);
  EXPECT_NE(res.warnings[0].find("species_01/leaf_002.png"), std::string::npos);
}

TEST(Scan, AcceptsTiffJpegAndUppercaseExtensions) {
  TempDir dir;
  const auto leaf = testing_support::synthetic_leaf(0, 0);
  cv::Mat bgr(leaf.height(), leaf.width(), CV_8UC3);
  std::memcpy(bgr.data, leaf.values().data(), leaf.size());
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  ASSERT_TRUE(cv::imwrite((dir / "a/one.tif").string(), bgr));
  ASSERT_TRUE(cv::imwrite((dir / "a/two.JPG").string(), bgr));
  ASSERT_TRUE(cv::imwrite((dir / "b/three.TIFF").string(), bgr));
  std::ofstream(dir / "b/notes.txt") << "ignored";
  const auto m = scan_dataset(dir.path()).manifest;
  EXPECT_EQ(m.records.size(), 3u);
}

TEST(Scan, MissingRootIsConfigurationError) {
  EXPECT_THROW(scan_dataset("/nonexistent/venation/root"), ConfigError);
}

TEST(Scan, EmptyClassDirectoryNamesTheDirectory) {
  TempDir dir;
  testing_support::write_corpus(dir.path(), 2, 1);
  fs::create_directories(dir / "zz_empty");
  try {
    scan_dataset(dir.path());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("zz_empty"), std::string::npos);
  }
}

TEST(Scan, IsIdempotent) {
  TempDir dir;
  testing_support::write_corpus(dir.path(), 3, 2);
  EXPECT_EQ(serialize_manifest(scan_dataset(dir.path()).manifest),
            serialize_manifest(scan_dataset(dir.path()).manifest));
}

TEST(Split, ReferenceShapedCorpus) {
  const auto m = stratified_split(synthetic_manifest(std::vector<int>(15, 75)), 0.2, 42);
  for (int c : m.class_counts(Split::test)) EXPECT_EQ(c, 15);
  for (int c : m.class_counts(Split::train)) EXPECT_EQ(c, 60);
  EXPECT_EQ(m.subset(Split::test).size(), 225u);
  EXPECT_EQ(m.subset(Split::train).size(), 900u);
}

TEST(Split, HalfOfTwoImageClasses) {
  const auto m = stratified_split(synthetic_manifest({2, 2, 2}), 0.5, 1);
  for (int c : m.class_counts(Split::test)) EXPECT_EQ(c, 1);
  for (int c : m.class_counts(Split::train)) EXPECT_EQ(c, 1);
}

TEST(Split, SeedDeterminism) {
  const auto base = synthetic_manifest({20, 30, 25});
  const auto a = stratified_split(base, 0.2, 7);
  const auto b = stratified_split(base, 0.2, 7);
  const auto c = stratified_split(base, 0.2, 8);
  EXPECT_EQ(serialize_manifest(a), serialize_manifest(b));
  EXPECT_NE(serialize_manifest(a), serialize_manifest(c));
  EXPECT_EQ(a.class_counts(Split::test), c.class_counts(Split::test));
}

TEST(Split, InputOrderDoesNotMatter) {
  auto base = synthetic_manifest({9, 11});
  auto shuffled = base;
  std::mt19937 rng(3);
  std::shuffle(shuffled.records.begin(), shuffled.records.end(), rng);
  EXPECT_EQ(stratified_split(base, 0.3, 5), stratified_split(shuffled, 0.3, 5));
}

TEST(Split, ExactPerClassCountsForRandomInputs) {
  std::mt19937 rng(123);
  std::uniform_int_distribution<int> classes(2, 8);
  std::uniform_int_distribution<int> size(10, 60);
  std::uniform_real_distribution<double> frac(0.1, 0.6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> sizes(classes(rng));
    for (auto& s : sizes) s = size(rng);
    const double f = frac(rng);
    const auto m = stratified_split(synthetic_manifest(sizes), f, rng());
    const auto test = m.class_counts(Split::test);
    const auto train = m.class_counts(Split::train);
    std::set<std::string> seen;
    for (const auto& r : m.records) {
      EXPECT_NE(r.split, Split::unassigned);
      EXPECT_TRUE(seen.insert(r.path).second);
    }
    EXPECT_EQ(seen.size(), m.records.size());
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      EXPECT_EQ(test[k], std::lround(f * sizes[k]));
      EXPECT_EQ(train[k] + test[k], sizes[k]);
    }
  }
}

TEST(Split, TooSmallClassIsFatal) {
  EXPECT_THROW(stratified_split(synthetic_manifest({1, 5}), 0.2, 1), DataError);
  EXPECT_THROW(stratified_split(synthetic_manifest({4, 5}), 0.1, 1), DataError);
}

TEST(Split, RejectsBadFractionAndAssignedInput) {
  const auto base = synthetic_manifest({4, 4});
  EXPECT_THROW(stratified_split(base, 0.0, 1), ConfigError);
  EXPECT_THROW(stratified_split(base, 1.0, 1), ConfigError);
  EXPECT_THROW(stratified_split(stratified_split(base, 0.5, 1), 0.5, 1), ConfigError);
}

TEST(ManifestJson, RoundTripAndSchema) {
  const auto m = stratified_split(synthetic_manifest({3, 4}), 0.5, 99);
  const auto j = nlohmann::json::parse(serialize_manifest(m));
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["seed"], 99);
  EXPECT_EQ(j["records"][0]["path"], "class_0/img_0.tif");
  EXPECT_TRUE(j["records"][0]["split"] == "train" || j["records"][0]["split"] == "test");
  EXPECT_EQ(manifest_from_json(j), m);
  TempDir dir;
  write_manifest(dir / "m.json", m);
  EXPECT_EQ(read_manifest(dir / "m.json"), m);
}

TEST(LoadImage, ResizesToModelInput) {
  TempDir dir;
  RasterImage big(512, 512, 3);
  std::mt19937 rng(1);
  for (auto& v : big.values()) v = static_cast<std::uint8_t>(rng());
  write_png(dir / "big.png", big);
  const auto img = load_image(dir / "big.png");
  EXPECT_EQ(img.height(), 224);
  EXPECT_EQ(img.width(), 224);
  EXPECT_EQ(img.channels(), 3);
}

TEST(LoadImage, BilinearPreservesConstants) {
  TempDir dir;
  write_png(dir / "c.png", RasterImage(300, 170, 3, 131));
  EXPECT_EQ(load_image(dir / "c.png"), RasterImage(224, 224, 3, 131));
}

TEST(LoadImage, GrayscaleReplicatedToThreeChannels) {
  TempDir dir;
  RasterImage gray(100, 80, 1);
  std::mt19937 rng(2);
  for (auto& v : gray.values()) v = static_cast<std::uint8_t>(rng());
  write_png(dir / "g.png", gray);
  const auto img = load_image(dir / "g.png");
  for (int y = 0; y < 224; ++y)
    for (int x = 0; x < 224; ++x) {
      EXPECT_EQ(img.at(y, x, 0), img.at(y, x, 1));
      EXPECT_EQ(img.at(y, x, 1), img.at(y, x, 2));
    }
}

TEST(LoadImage, DecodeFailureCarriesPath) {
  TempDir dir;
  std::ofstream(dir / "bad.png") << "not an image";
  try {
    load_image(dir / "bad.png");
    FAIL();
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.path(), (dir / "bad.png").string());
  }
}

TEST(OneHot, Encodes) {
  EXPECT_EQ(one_hot(0, 3), (std::vector<float>{1, 0, 0}));
  EXPECT_EQ(one_hot(2, 3), (std::vector<float>{0, 0, 1}));
  for (int k = 0; k < 15; ++k) {
    const auto v = one_hot(k, 15);
    EXPECT_FLOAT_EQ(std::accumulate(v.begin(), v.end(), 0.0f), 1.0f);
  }
  EXPECT_THROW(one_hot(3, 3), ConfigError);
  EXPECT_THROW(one_hot(-1, 3), ConfigError);
}
