#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "relstab/csv.hpp"
#include "relstab/datagen.hpp"
#include "relstab/errors.hpp"
#include "relstab/fileio.hpp"
#include "relstab/mapio.hpp"
#include "relstab/pgm.hpp"
#include "relstab/rng.hpp"

using namespace relstab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "relstab_tests" / "datagen";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

FormatFault pgm_fault(const std::string& bytes) {
  const fs::path p = scratch("broken.pgm");
  write_bytes(p, bytes);
  try {
    load_pgm(p);
  } catch (const FormatError& e) {
    return e.fault();
  }
  FAIL("expected FormatError");
  return FormatFault::kBadMagic;
}

SyntheticSpec quiet_spec() {
  SyntheticSpec s;
  s.class_counts = {6, 6};
  s.noise_sigma = 0.0;
  s.base_jitter = 0.0;
  return s;
}

bool inside(const SyntheticSpec& s, double y, double x) {
  const double dy = (y - s.center_y) / s.semi_y, dx = (x - s.center_x) / s.semi_x;
  return dy * dy + dx * dx <= 1.0;
}

}  // namespace

TEST_SUITE("datagen") {

TEST_CASE("default corpus has 500 images per class in class-major order") {
  const Dataset d = generate_dataset(SyntheticSpec{});
  REQUIRE(d.size() == 1000);
  CHECK(std::count(d.labels.begin(), d.labels.begin() + 500, 0) == 500);
  CHECK(std::count(d.labels.begin() + 500, d.labels.end(), 1) == 500);
  CHECK(d.images[0].shape() == Shape{1, 64, 64});
  CHECK(d.ids[999] == 999);
  float lo = 1.0f, hi = 0.0f;
  for (const Tensor& img : d.images) {
    const auto [a, b] = std::minmax_element(img.values().begin(), img.values().end());
    lo = std::min(lo, *a);
    hi = std::max(hi, *b);
  }
  CHECK(lo >= 0.0f);
  CHECK(hi <= 1.0f);
}

TEST_CASE("generation is deterministic per seed") {
  SyntheticSpec s;
  s.class_counts = {5, 5};
  const Dataset a = generate_dataset(s), b = generate_dataset(s);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(bit_identical(a.images[i], b.images[i]));
  s.seed = 2;
  CHECK_FALSE(bit_identical(generate_dataset(s).images[0], a.images[0]));
}

TEST_CASE("without noise or blob contrast every image is the plain ellipse") {
  SyntheticSpec s = quiet_spec();
  s.blob_delta = 0.0;
  const Dataset d = generate_dataset(s);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(bit_identical(d.images[i], d.images[0]));
    CHECK(bit_identical(d.masks[i], d.masks[0]));
  }
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      const bool in = inside(s, static_cast<double>(y), static_cast<double>(x));
      CHECK(d.masks[0][y * 64 + x] == (in ? 1.0f : 0.0f));
      CHECK(d.images[0][y * 64 + x] == (in ? static_cast<float>(s.base_intensity) : 0.0f));
    }
}

TEST_CASE("the blob sits inside the mask on the class side") {
  const SyntheticSpec s = quiet_spec();
  const Dataset d = generate_dataset(s);
  const float base = static_cast<float>(s.base_intensity);
  for (std::size_t i = 0; i < d.size(); ++i) {
    double cx = 0.0, count = 0.0;
    for (std::size_t p = 0; p < 64 * 64; ++p) {
      if (d.images[i][p] > base) {
        CHECK(d.masks[i][p] == 1.0f);
        cx += static_cast<double>(p % 64);
        count += 1.0;
      }
    }
    REQUIRE(count > 0);
    cx /= count;
    if (d.labels[i] == 0)
      CHECK(cx < s.center_x);
    else
      CHECK(cx > s.center_x);
  }
}

TEST_CASE("invalid specs are rejected") {
  SyntheticSpec s;
  s.blob_offset_x = 30.0;
  CHECK_THROWS_AS(generate_dataset(s), ConfigError);
  s = SyntheticSpec{};
  s.class_counts = {0, 3};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = SyntheticSpec{};
  s.blob_delta = 0.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("spec text round trip") {
  SyntheticSpec s;
  s.blob_delta = 0.125;
  s.seed = 77;
  s.class_counts = {3, 4};
  const SyntheticSpec back = SyntheticSpec::from_text(s.to_text());
  CHECK(back.to_text() == s.to_text());
  CHECK(back.seed == 77);
  CHECK(back.class_counts[1] == 4);
  CHECK_THROWS_AS(SyntheticSpec::from_text("colour=blue\n"), ConfigError);
}

TEST_CASE("stratified split sizes, partition and determinism") {
  const Dataset d = generate_dataset(SyntheticSpec{});
  const Split s = split_train_val(d, 0.8, 1);
  CHECK(s.train.size() == 800);
  CHECK(s.val.size() == 200);
  CHECK(std::count(s.train.labels.begin(), s.train.labels.end(), 0) == 400);
  CHECK(std::count(s.val.labels.begin(), s.val.labels.end(), 1) == 100);

  std::vector<std::size_t> all = s.train.ids;
  all.insert(all.end(), s.val.ids.begin(), s.val.ids.end());
  std::sort(all.begin(), all.end());
  CHECK(all == d.ids);
  CHECK(std::is_sorted(s.train.ids.begin(), s.train.ids.end()));

  CHECK(split_train_val(d, 0.8, 1).val.ids == s.val.ids);
  CHECK(split_train_val(d, 0.8, 2).val.ids != s.val.ids);

  Dataset tiny = d.subset(std::vector<std::size_t>{0, 1, 999});
  CHECK_THROWS_AS(split_train_val(tiny, 0.8, 1), InputError);
  CHECK_THROWS_AS(split_train_val(d, 1.0, 1), InputError);
}

TEST_CASE("PGM round trip within half a quantization step") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t h = 1 + rng.below(40), w = 1 + rng.below(40);
    Tensor img({1, h, w});
    for (float& v : img.values()) v = static_cast<float>(rng.uniform());
    const fs::path p = scratch("rt.pgm");
    save_pgm(p, img);
    const Tensor back = load_pgm(p);
    REQUIRE(back.shape() == img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::fabs(back[i] - img[i]) <= 1.6e-5);
  }
}

TEST_CASE("PGM layout and format faults") {
  const fs::path p = scratch("zeros.pgm");
  save_pgm(p, Tensor({3, 2}, 0.0f));
  const std::string bytes = read_file(p);
  CHECK(bytes.rfind("P5", 0) == 0);
  CHECK(bytes.find("65535") != std::string::npos);
  CHECK(bytes.size() >= 12);
  CHECK(bytes.substr(bytes.size() - 12) == std::string(12, '\0'));

  save_pgm(p, Tensor({1, 1}, 1.0f));
  CHECK(read_file(p).substr(read_file(p).size() - 2) == "\xff\xff");

  CHECK(pgm_fault("P2\n1 1\n65535\n\0\0") == FormatFault::kBadMagic);
  CHECK(pgm_fault(std::string("P5\n2 2\n255\n") + std::string(4, '\0')) ==
        FormatFault::kUnsupportedDepth);
  CHECK(pgm_fault(std::string("P5\n2 2\n65535\n") + std::string(5, '\0')) ==
        FormatFault::kTruncated);
  CHECK(pgm_fault("P5\nabc def\n65535\n") == FormatFault::kMalformedHeader);
  CHECK_THROWS_AS(load_pgm(scratch("missing.pgm")), IoError);
}

TEST_CASE("corpus save and load round trip") {
  SyntheticSpec s;
  s.class_counts = {3, 3};
  const Dataset d = generate_dataset(s);
  const fs::path dir = scratch("corpus");
  fs::remove_all(dir);
  save_corpus(dir, d, s);
  CHECK(fs::exists(dir / "images" / "0005.pgm"));
  CHECK(fs::exists(dir / "spec.txt"));
  const Dataset back = load_corpus(dir);
  REQUIRE(back.size() == d.size());
  CHECK(back.labels == d.labels);
  CHECK(back.ids == d.ids);
  REQUIRE(back.has_masks());
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t p = 0; p < d.images[i].size(); ++p)
      CHECK(std::fabs(back.images[i][p] - d.images[i][p]) <= 1.6e-5);
    CHECK(back.masks[i] == d.masks[i]);
  }
  CHECK_THROWS_AS(load_corpus(scratch("no_such_corpus")), IoError);
}

TEST_CASE("scaled relevance maps round trip with their sidecar") {
  Rng rng(8);
  Tensor m({10, 12});
  for (float& v : m.values()) v = static_cast<float>(rng.normal());
  const fs::path base = scratch("map_0001_lrp");
  save_scaled_map(base, m, {0, 0, "lrp", 1, 42});
  const ScaledMap back = load_scaled_map(base);
  const auto [lo, hi] = std::minmax_element(m.values().begin(), m.values().end());
  CHECK(back.sidecar.min == doctest::Approx(*lo));
  CHECK(back.sidecar.max == doctest::Approx(*hi));
  CHECK(back.sidecar.explainer == "lrp");
  CHECK(back.sidecar.target == 1);
  CHECK(back.sidecar.seed == 42);
  const double step = (*hi - *lo) / 65535.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    CHECK(std::fabs(back.values[i] - m[i]) <= step);

  save_scaled_map(base, Tensor({4, 4}, 0.25f), {0, 0, "lime", 0, 0});
  const ScaledMap flat = load_scaled_map(base);
  CHECK(flat.sidecar.min == flat.sidecar.max);
  CHECK(flat.values == Tensor({4, 4}, 0.25f));
}

TEST_CASE("csv parsing and atomic writes") {
  const CsvTable t = parse_csv("a,b\n1,x\n2.5,y\n");
  CHECK(t.rows.size() == 2);
  CHECK(t.number(1, "a") == 2.5);
  CHECK(t.cell(0, "b") == "x");
  CHECK_THROWS_AS(t.column("c"), ConfigError);
  CHECK_THROWS_AS(parse_csv(""), ConfigError);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), ConfigError);

  const fs::path p = scratch("nested/dir/out.txt");
  write_file_atomic(p, "hello");
  CHECK(read_file(p) == "hello");
  CHECK_FALSE(fs::exists(p.string() + ".partial"));
}

}  // TEST_SUITE
