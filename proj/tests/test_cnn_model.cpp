#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "relstab/datagen.hpp"
#include "relstab/errors.hpp"
#include "relstab/fileio.hpp"
#include "relstab/model.hpp"
#include "relstab/rng.hpp"

using namespace relstab;

namespace {

Dataset small_corpus(std::size_t per_class, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.class_counts = {per_class, per_class};
  spec.seed = seed;
  return generate_dataset(spec);
}

// Images [1,1,2] whose first pixel equals the label.
Dataset pixel_labelled(std::size_t n) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    d.images.push_back(Tensor({1, 1, 2}, {static_cast<float>(label), 0.5f}));
    d.labels.push_back(label);
    d.ids.push_back(i);
  }
  return d;
}

Model pixel_reader() {
  ModelConfig c;
  c.input = {1, 1, 2};
  c.classes = 2;
  c.chain = {LayerSpec::flatten(), LayerSpec::dense(2, 2)};
  Model m = build_model(c, 1);
  m.params.tensors[0] = Tensor({2, 2}, {-1, 0, 1, 0});
  m.params.tensors[1].fill(0.0f);
  return m;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "relstab_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("cnn_model") {

TEST_CASE("default configuration has eight learned layers and is consistent") {
  const ModelConfig c = default_model_config();
  CHECK(c.learned_layers() == 8);
  CHECK_NOTHROW(c.validate());
  CHECK(default_model_config(32).chain[16].in == 32 * 4 * 4);
  CHECK_NOTHROW(default_model_config(32).validate());
}

TEST_CASE("inconsistent model configurations are rejected") {
  ModelConfig c = default_model_config();
  c.classes = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = default_model_config();
  c.input = {1, 32, 32};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("same seed gives bit-identical initial parameters") {
  const Model a = build_default_model(1), b = build_default_model(1);
  const Model c = build_default_model(2);
  REQUIRE(a.params.tensors.size() == 16);
  bool all_same = true, any_diff = false;
  for (std::size_t i = 0; i < a.params.tensors.size(); ++i) {
    all_same = all_same && bit_identical(a.params.tensors[i], b.params.tensors[i]);
    any_diff = any_diff || !bit_identical(a.params.tensors[i], c.params.tensors[i]);
  }
  CHECK(all_same);
  CHECK(any_diff);
}

TEST_CASE("initial weights respect the uniform fan-in bound and biases are zero") {
  const Model m = build_default_model(3);
  const LayerChain& chain = m.config.chain;
  std::size_t t = 0;
  for (const LayerSpec& layer : chain) {
    if (!layer.learned()) continue;
    const std::size_t fan_in = layer.kind == LayerKind::kConv2D
                                   ? layer.in * layer.kernel * layer.kernel
                                   : layer.in;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (float w : m.params.tensors[t].values()) CHECK(std::fabs(w) <= bound);
    for (float b : m.params.tensors[t + 1].values()) CHECK(b == 0.0f);
    t += 2;
  }
}

TEST_CASE("zero image with zero biases gives zero logits") {
  const Model m = build_default_model(1);
  const Tensor logits = m.logits(Tensor({1, 1, 64, 64}, 0.0f));
  CHECK(logits == Tensor({1, 2}, 0.0f));
}

TEST_CASE("evaluate: all correct, tie-break and ordering invariance") {
  const Dataset d = pixel_labelled(10);
  const Model reader = pixel_reader();
  CHECK(evaluate(reader, d) == 1.0);

  Model zero = reader;
  for (Tensor& t : zero.params.tensors) t.fill(0.0f);
  CHECK(evaluate(zero, d) == 0.5);
  CHECK(argmax_class(std::vector<float>{1.0f, 1.0f}) == 0);

  const Dataset corpus = small_corpus(30, 4);
  const Model m = build_default_model(9);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::swap(order[3], order[40]);
  CHECK(evaluate(m, corpus) == evaluate(m, corpus.subset(order)));
}

TEST_CASE("untrained model is near chance on a balanced set") {
  const Dataset d = small_corpus(50, 6);
  const double acc = evaluate(build_default_model(1), d);
  CHECK(acc >= 0.3);
  CHECK(acc <= 0.7);
}

TEST_CASE("zero epochs leaves parameters untouched") {
  const Dataset d = small_corpus(20, 2);
  const Split s = split_train_val(d, 0.8, 1);
  Model m = build_default_model(1);
  const Model before = m;
  TrainConfig cfg;
  cfg.epochs = 0;
  const TrainTrace trace = train(cfg, m, s.train, s.val);
  CHECK(trace.loss.empty());
  for (std::size_t i = 0; i < m.params.tensors.size(); ++i)
    CHECK(bit_identical(m.params.tensors[i], before.params.tensors[i]));
  const double acc = evaluate(m, s.val);
  CHECK(acc >= 0.3);
  CHECK(acc <= 0.7);
}

TEST_CASE("training is deterministic and reduces the loss") {
  const Dataset d = small_corpus(100, 8);
  const Split s = split_train_val(d, 0.8, 1);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.learning_rate = 0.01f;
  Model a = build_default_model(1), b = build_default_model(1);
  const TrainTrace ta = train(cfg, a, s.train, s.val);
  REQUIRE(ta.loss.size() == 10);
  CHECK(ta.loss.back() < ta.loss.front());

  cfg.epochs = 3;
  Model c = build_default_model(1), e = build_default_model(1);
  CHECK(train(cfg, c, s.train, s.val) == train(cfg, e, s.train, s.val));
  for (std::size_t i = 0; i < c.params.tensors.size(); ++i)
    CHECK(bit_identical(c.params.tensors[i], e.params.tensors[i]));
}

TEST_CASE("train configuration validation") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.learning_rate = 0.0f;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip is bit-exact and keeps the architecture") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    Model m = build_default_model(rng.next_u64());
    for (Tensor& t : m.params.tensors)
      for (float& v : t.values()) v = static_cast<float>(rng.normal());
    const auto path = scratch("model_" + std::to_string(trial) + ".rlb");
    save_checkpoint(path, {kCheckpointVersion, m});
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.version == kCheckpointVersion);
    CHECK(back.model.config.chain == m.config.chain);
    CHECK(back.model.config.input == m.config.input);
    REQUIRE(back.model.params.tensors.size() == m.params.tensors.size());
    for (std::size_t i = 0; i < m.params.tensors.size(); ++i)
      CHECK(bit_identical(back.model.params.tensors[i], m.params.tensors[i]));
  }
}

TEST_CASE("checkpoint format errors are distinguishable") {
  const std::string bytes = encode_checkpoint({kCheckpointVersion, build_default_model(1)});

  std::string bad = bytes;
  bad[0] = 'X';
  try {
    decode_checkpoint(bad);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.fault() == FormatFault::kBadMagic);
    CHECK(std::string(e.what()).find("not a checkpoint") != std::string::npos);
  }

  try {
    decode_checkpoint(bytes.substr(0, bytes.size() - 7));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.fault() == FormatFault::kTruncated);
    CHECK(std::string(e.what()).find("truncated file") != std::string::npos);
  }

  std::string version = bytes;
  version[4] = 9;
  try {
    decode_checkpoint(version);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.fault() == FormatFault::kVersionMismatch);
  }

  CHECK_THROWS_AS(load_checkpoint(scratch("does_not_exist.rlb")), IoError);
}

}  // TEST_SUITE
