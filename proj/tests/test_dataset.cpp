#include <doctest.h>

#include <fstream>
#include <set>

#include "dsc/dataset.hpp"
#include "dsc/rng.hpp"
#include "support/toy_data.hpp"

using namespace dsc;
namespace fs = std::filesystem;

namespace {

std::vector<LabeledSample> dummy_samples(int n) {
  std::vector<LabeledSample> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({fs::path("img_" + std::to_string(i) + ".ppm"), i % 5,
                   "class_" + std::to_string(i % 5)});
  }
  return out;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("scan_dataset sorts classes and files") {
  const fs::path dir = dsc_test::make_temp_dir("scan");
  fs::create_directories(dir / "zeta");
  fs::create_directories(dir / "alpha");
  fs::create_directories(dir / "mid");
  write_file(dir / "zeta" / "b.ppm", "x");
  write_file(dir / "zeta" / "a.ppm", "x");
  write_file(dir / "alpha" / "z.ppm", "x");
  write_file(dir / "mid" / "m.ppm", "x");

  const ScanResult scan = scan_dataset(dir);
  CHECK(scan.classes == std::vector<std::string>{"alpha", "mid", "zeta"});
  REQUIRE(scan.samples.size() == 4);
  CHECK(scan.samples[0].class_name == "alpha");
  CHECK(scan.samples[0].class_index == 0);
  CHECK(scan.samples[1].class_name == "mid");
  CHECK(scan.samples[2].image_path.filename() == "a.ppm");
  CHECK(scan.samples[3].image_path.filename() == "b.ppm");
  fs::remove_all(dir);
}

TEST_CASE("scan_dataset warns on empty class, errors on no classes") {
  const fs::path dir = dsc_test::make_temp_dir("scan_empty");
  fs::create_directories(dir / "full");
  fs::create_directories(dir / "hollow");
  write_file(dir / "full" / "a.ppm", "x");
  const ScanResult scan = scan_dataset(dir);
  REQUIRE(scan.warnings.size() == 1);
  CHECK(scan.warnings[0].find("hollow") != std::string::npos);
  CHECK(scan.classes.size() == 2);  // roster keeps the empty class

  const fs::path none = dsc_test::make_temp_dir("scan_none");
  CHECK_THROWS_AS(scan_dataset(none), DataError);
  CHECK_THROWS_AS(scan_dataset(dir / "missing"), DataError);
  fs::remove_all(dir);
  fs::remove_all(none);
}

TEST_CASE("duplicate filenames across classes stay distinct samples") {
  const fs::path dir = dsc_test::make_temp_dir("dup");
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  write_file(dir / "a" / "same.ppm", "x");
  write_file(dir / "b" / "same.ppm", "x");
  const ScanResult scan = scan_dataset(dir);
  CHECK(scan.samples.size() == 2);
  CHECK(scan.samples[0].image_path != scan.samples[1].image_path);
  fs::remove_all(dir);
}

TEST_CASE("manifest ingestion matches the folder layout contract") {
  const fs::path dir = dsc_test::make_temp_dir("manifest");
  write_file(dir / "one.ppm", "x");
  write_file(dir / "two.ppm", "x");
  write_file(dir / "list.tsv", "one.ppm\tbeta\ntwo.ppm\talpha\n");
  const ScanResult scan = load_manifest(dir / "list.tsv");
  CHECK(scan.classes == std::vector<std::string>{"alpha", "beta"});
  REQUIRE(scan.samples.size() == 2);
  CHECK(scan.samples[0].class_index == 1);  // beta
  CHECK(scan.samples[1].class_index == 0);  // alpha

  write_file(dir / "bad.tsv", "no-tab-here\n");
  CHECK_THROWS_AS(load_manifest(dir / "bad.tsv"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("split reproduces the published 5858 -> 4687/1171 counts") {
  auto samples = dummy_samples(5858);
  SplitConfig cfg;
  cfg.train_fraction = 0.8;
  cfg.seed = 7;
  const DatasetSplit s = split_dataset(samples, cfg);
  CHECK(s.train.size() == 4687);
  CHECK(s.validation.size() == 1171);
}

TEST_CASE("split of ten samples is 8/2 and seed-stable") {
  auto samples = dummy_samples(10);
  SplitConfig cfg;
  cfg.seed = 3;
  const DatasetSplit a = split_dataset(samples, cfg);
  CHECK(a.train.size() == 8);
  CHECK(a.validation.size() == 2);

  const DatasetSplit b = split_dataset(samples, cfg);
  for (size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].image_path == b.train[i].image_path);
  }
  for (size_t i = 0; i < a.validation.size(); ++i) {
    CHECK(a.validation[i].image_path == b.validation[i].image_path);
  }
}

TEST_CASE("split is disjoint and exhaustive over randomized sizes") {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(9998)) + 2;
    auto samples = dummy_samples(n);
    SplitConfig cfg;
    cfg.train_fraction = 0.1 + rng.uniform() * 0.8;
    cfg.seed = static_cast<uint64_t>(trial);
    const DatasetSplit s = split_dataset(samples, cfg);
    CHECK(static_cast<int>(s.train.size() + s.validation.size()) == n);
    CHECK(s.train.size() ==
          static_cast<size_t>(std::ceil(cfg.train_fraction * n)));
    std::set<std::string> seen;
    for (const auto& x : s.train) seen.insert(x.image_path.string());
    for (const auto& x : s.validation) {
      CHECK(seen.insert(x.image_path.string()).second);
    }
    CHECK(seen.size() == static_cast<size_t>(n));
  }
  CHECK_THROWS_AS(split_dataset(dummy_samples(1), SplitConfig{}), DataError);
}

TEST_CASE("PPM decode: exact bytes, grayscale replication, truncation") {
  const fs::path dir = dsc_test::make_temp_dir("ppm");

  // 2x2 P6 with known bytes
  const unsigned char px[12] = {255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30};
  write_file(dir / "rgb.ppm",
             "P6\n2 2\n255\n" +
                 std::string(reinterpret_cast<const char*>(px), 12));
  Tensor<float> img = decode_image(dir / "rgb.ppm");
  REQUIRE(img.shape() == Shape{2, 2, 3});
  CHECK(img.values()[0] == 255.0f);
  CHECK(img.values()[1] == 0.0f);
  CHECK(img.values()[4] == 255.0f);
  CHECK(img.values()[9] == 10.0f);
  CHECK(img.values()[10] == 20.0f);
  CHECK(img.values()[11] == 30.0f);

  // header comments are skipped
  write_file(dir / "comment.ppm",
             "P6\n# a comment\n2 2\n255\n" +
                 std::string(reinterpret_cast<const char*>(px), 12));
  CHECK(decode_image(dir / "comment.ppm").values() == img.values());

  // grayscale P5 replicates onto 3 channels
  const unsigned char gray[4] = {0, 85, 170, 255};
  write_file(dir / "gray.pgm",
             "P5\n2 2\n255\n" +
                 std::string(reinterpret_cast<const char*>(gray), 4));
  Tensor<float> g = decode_image(dir / "gray.pgm");
  REQUIRE(g.shape() == Shape{2, 2, 3});
  CHECK(g.values()[0] == 0.0f);
  CHECK(g.values()[1] == 0.0f);
  CHECK(g.values()[3] == 85.0f);
  CHECK(g.values()[4] == 85.0f);
  CHECK(g.values()[5] == 85.0f);

  // truncated payload
  write_file(dir / "short.ppm", "P6\n2 2\n255\nabc");
  CHECK_THROWS_AS(decode_image(dir / "short.ppm"), DataError);
  // unsupported format
  write_file(dir / "ascii.ppm", "P3\n1 1\n255\n1 2 3\n");
  CHECK_THROWS_AS(decode_image(dir / "ascii.ppm"), DataError);
  CHECK_THROWS_AS(decode_image(dir / "missing.ppm"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("bilinear resize: passthrough, constants, aspect change") {
  Rng rng(5);
  Tensor<float> img(Shape{7, 9, 3});
  for (float& v : img.values()) v = static_cast<float>(rng.uniform(0, 255));

  Tensor<float> same = resize_bilinear(img, 7, 9);
  for (size_t i = 0; i < img.values().size(); ++i) {
    CHECK(std::abs(same.values()[i] - img.values()[i]) <= 1.0f / 255.0f);
  }

  Tensor<float> constant = Tensor<float>::full(Shape{5, 4, 3}, 77.0f);
  for (int64_t h : {1, 3, 300}) {
    Tensor<float> r = resize_bilinear(constant, h, h);
    for (float v : r.values()) CHECK(v == doctest::Approx(77.0f));
  }

  // 768x1024 source to the 300x300 model input
  Tensor<float> big = Tensor<float>::full(Shape{768, 1024, 3}, 10.0f);
  CHECK(resize_bilinear(big, 300, 300).shape() == Shape{300, 300, 3});
}

TEST_CASE("batch sequence: sizes, determinism and label coverage") {
  const fs::path dir = dsc_test::make_temp_dir("batches");
  dsc_test::write_toy_dataset(dir, 100, 8, 42);
  const ScanResult scan = scan_dataset(dir);
  REQUIRE(scan.samples.size() == 100);

  BatchPlan plan;
  plan.batch_size = 32;
  BatchLoader loader(scan.samples, plan, 8, 8, 5);
  CHECK(loader.batch_count() == 4);

  std::vector<int64_t> sizes;
  std::vector<int> labels_seen;
  auto epoch = loader.epoch(0);
  while (auto b = epoch.next()) {
    sizes.push_back(b->images.dim(0));
    labels_seen.insert(labels_seen.end(), b->labels.begin(), b->labels.end());
  }
  CHECK(sizes == std::vector<int64_t>{32, 32, 32, 4});

  // label multiset equals the dataset's labels
  std::vector<int> expected;
  for (const auto& s : scan.samples) expected.push_back(s.class_index);
  std::sort(labels_seen.begin(), labels_seen.end());
  std::sort(expected.begin(), expected.end());
  CHECK(labels_seen == expected);

  // same (seed, epoch) twice: identical batches
  BatchLoader loader2(scan.samples, plan, 8, 8, 5);
  auto ea = loader.epoch(3);
  auto eb = loader2.epoch(3);
  while (true) {
    auto a = ea.next();
    auto b = eb.next();
    CHECK(a.has_value() == b.has_value());
    if (!a) break;
    CHECK(a->images.values() == b->images.values());
    CHECK(a->labels == b->labels);
  }

  // different epochs shuffle differently
  auto e0 = loader.epoch(0);
  auto e1 = loader.epoch(1);
  CHECK(e0.next()->labels != e1.next()->labels);
  fs::remove_all(dir);
}

TEST_CASE("cache: second epoch reads no files and batches are identical") {
  const fs::path dir = dsc_test::make_temp_dir("cache");
  dsc_test::write_toy_dataset(dir, 30, 8, 1);
  const ScanResult scan = scan_dataset(dir);

  BatchPlan plan;
  plan.batch_size = 8;
  BatchLoader cached(scan.samples, plan, 8, 8, 9, /*cache=*/true);
  BatchLoader uncached(scan.samples, plan, 8, 8, 9, /*cache=*/false);

  auto drain = [](BatchLoader& loader, int epoch) {
    std::vector<float> all;
    auto it = loader.epoch(epoch);
    while (auto b = it.next()) {
      all.insert(all.end(), b->images.values().begin(),
                 b->images.values().end());
    }
    return all;
  };

  const auto c0 = drain(cached, 0);
  CHECK(cached.file_reads() == 30);
  const auto c1 = drain(cached, 1);
  CHECK(cached.file_reads() == 30);  // cache hit, no new reads

  const auto u0 = drain(uncached, 0);
  const auto u1 = drain(uncached, 1);
  CHECK(uncached.file_reads() == 60);

  // cache transparency
  CHECK(c0 == u0);
  CHECK(c1 == u1);
  fs::remove_all(dir);
}

TEST_CASE("drop_last drops the partial batch") {
  const fs::path dir = dsc_test::make_temp_dir("droplast");
  dsc_test::write_toy_dataset(dir, 10, 8, 2);
  const ScanResult scan = scan_dataset(dir);
  BatchPlan plan;
  plan.batch_size = 4;
  plan.drop_last = true;
  BatchLoader loader(scan.samples, plan, 8, 8, 1);
  CHECK(loader.batch_count() == 2);
  int64_t total = 0;
  auto it = loader.epoch(0);
  while (auto b = it.next()) total += b->images.dim(0);
  CHECK(total == 8);
  fs::remove_all(dir);
}
