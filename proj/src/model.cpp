#include "relstab/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "relstab/errors.hpp"
#include "relstab/fileio.hpp"

namespace relstab {

void ModelConfig::validate() const {
  if (input.size() != 3) throw ConfigError("model input must be [C,H,W]");
  if (classes < 2) throw ConfigError("model needs at least two classes");
  const std::vector<Shape> shapes = infer_shapes(chain, input);
  if (shapes.back() != Shape{classes})
    throw ConfigError("chain ends in " + shape_string(shapes.back()) +
                      ", expected [" + std::to_string(classes) + "]");
}

ModelConfig default_model_config() {
  ModelConfig c;
  c.input = {1, 64, 64};
  c.classes = 2;
  c.chain = {
      LayerSpec::conv(1, 8),   LayerSpec::relu(), LayerSpec::conv(8, 8),
      LayerSpec::relu(),       LayerSpec::max_pool(),
      LayerSpec::conv(8, 16),  LayerSpec::relu(), LayerSpec::conv(16, 16),
      LayerSpec::relu(),       LayerSpec::max_pool(),
      LayerSpec::conv(16, 32), LayerSpec::relu(), LayerSpec::conv(32, 32),
      LayerSpec::relu(),       LayerSpec::max_pool(),
      LayerSpec::flatten(),    LayerSpec::dense(2048, 64),
      LayerSpec::relu(),       LayerSpec::dense(64, 2),
  };
  return c;
}

ModelConfig default_model_config(std::size_t side) {
  ModelConfig c = default_model_config();
  const std::size_t pooled = side / 2 / 2 / 2;
  if (pooled < 1) throw ConfigError("image side must be >= 8");
  c.input = {1, side, side};
  for (LayerSpec& layer : c.chain)
    if (layer.kind == LayerKind::kDense) {
      layer.in = 32 * pooled * pooled;
      break;
    }
  return c;
}

Model build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  return {config, init_params(config.chain, rng)};
}

Model build_default_model(std::uint64_t seed) {
  return build_model(default_model_config(), seed);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate > 0.0f) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be > 0");
}

int argmax_class(std::span<const float> scores) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j)
    if (scores[j] > scores[best]) best = j;
  return static_cast<int>(best);
}

std::vector<int> predict(const Model& model, const Dataset& dataset) {
  constexpr std::size_t kChunk = 64;
  std::vector<int> out;
  out.reserve(dataset.size());
  for (std::size_t start = 0; start < dataset.size(); start += kChunk) {
    const std::size_t end = std::min(dataset.size(), start + kChunk);
    const Tensor batch = stack(std::span<const Tensor>(
        dataset.images.data() + start, end - start));
    const Tensor logits = model.logits(batch);
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < end - start; ++i)
      out.push_back(argmax_class(logits.values().subspan(i * k, k)));
  }
  return out;
}

double evaluate(const Model& model, const Dataset& dataset) {
  if (dataset.empty()) throw InputError("cannot evaluate on an empty dataset");
  dataset.validate();
  const std::vector<int> pred = predict(model, dataset);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    correct += pred[i] == dataset.labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

TrainTrace train(const TrainConfig& config, Model& model, const Dataset& train,
                 const Dataset& val) {
  config.validate();
  if (train.empty()) throw InputError("training set is empty");
  train.validate();
  check_params(model.config.chain, model.params);

  TrainTrace trace;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(config.seed ^ 0x7368756666ULL);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle)
      for (std::size_t j = order.size() - 1; j > 0; --j)
        std::swap(order[j], order[shuffle_rng.below(j + 1)]);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Tensor> images;
      std::vector<int> labels;
      images.reserve(end - start);
      for (std::size_t j = start; j < end; ++j) {
        images.push_back(train.images[order[j]]);
        labels.push_back(train.labels[order[j]]);
      }
      const Tensor batch = stack(images);
      ForwardResult fwd = forward_pass(model.config.chain, model.params, batch);
      const LossResult loss = softmax_cross_entropy(fwd.logits, labels);
      const BackwardResult bwd =
          backward_pass(model.config.chain, model.params, fwd.tape, loss.grad);
      sgd_step(model.params, bwd.grads, config.learning_rate);
      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(end - start);
    }
    trace.loss.push_back(loss_sum / static_cast<double>(train.size()));
    trace.val_accuracy.push_back(val.empty() ? 0.0 : evaluate(model, val));
    if (config.track_train_accuracy)
      trace.train_accuracy.push_back(evaluate(model, train));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Checkpoint encoding

namespace {

constexpr char kMagic[4] = {'R', 'L', 'B', '1'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    buf_.append(static_cast<const char*>(p), n);
  }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, const std::string& origin)
      : buf_(buf), origin_(origin) {}

  void need(std::size_t n, const char* what) {
    if (buf_.size() - pos_ < n)
      throw FormatError(FormatFault::kTruncated,
                        origin_ + ": truncated file while reading " + what);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i)
      v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf_[pos_++]) << (8 * i));
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }
  const std::string& origin() const { return origin_; }

 private:
  const std::string& buf_;
  std::string origin_;
  std::size_t pos_ = 0;
};

void put_tensor(Writer& w, const std::string& name, const Tensor& t) {
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.bytes(name.data(), name.size());
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (float v : t.values()) w.f32(v);
}

std::pair<std::string, Tensor> get_tensor(Reader& r) {
  const std::uint16_t name_len = r.u16("tensor name length");
  std::string name = r.str(name_len, "tensor name");
  const std::uint8_t rank = r.u8("tensor rank");
  if (rank == 0)
    throw FormatError(FormatFault::kMalformedHeader,
                      r.origin() + ": tensor '" + name + "' has rank 0");
  Shape shape;
  for (std::uint8_t i = 0; i < rank; ++i) {
    const std::uint32_t d = r.u32("tensor dims");
    if (d == 0)
      throw FormatError(FormatFault::kMalformedHeader,
                        r.origin() + ": tensor '" + name + "' has a zero dim");
    shape.push_back(d);
  }
  const std::size_t count = shape_size(shape);
  r.need(count * 4, "tensor payload");
  std::vector<float> data(count);
  for (float& v : data) v = r.f32("tensor payload");
  return {std::move(name), Tensor(std::move(shape), std::move(data))};
}

Tensor encode_layers(const LayerChain& chain) {
  Tensor t({chain.size(), 5});
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const LayerSpec& s = chain[i];
    t.at(i, 0) = static_cast<float>(static_cast<int>(s.kind));
    t.at(i, 1) = static_cast<float>(s.in);
    t.at(i, 2) = static_cast<float>(s.out);
    t.at(i, 3) = static_cast<float>(s.kernel);
    t.at(i, 4) = static_cast<float>(s.padding);
  }
  return t;
}

LayerChain decode_layers(const Tensor& t, const std::string& origin) {
  if (t.rank() != 2 || t.dim(1) != 5)
    throw FormatError(FormatFault::kMalformedHeader,
                      origin + ": model.layers must be [L,5]");
  LayerChain chain;
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    const float kind = t.at(i, 0);
    if (kind < 0.0f || kind > 4.0f || kind != std::floor(kind))
      throw FormatError(FormatFault::kMalformedHeader,
                        origin + ": unknown layer kind code");
    LayerSpec s;
    s.kind = static_cast<LayerKind>(static_cast<int>(kind));
    s.in = static_cast<std::size_t>(t.at(i, 1));
    s.out = static_cast<std::size_t>(t.at(i, 2));
    s.kernel = static_cast<std::size_t>(t.at(i, 3));
    s.padding = static_cast<std::size_t>(t.at(i, 4));
    chain.push_back(s);
  }
  return chain;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  const Model& m = checkpoint.model;
  m.config.validate();
  check_params(m.config.chain, m.params);
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(checkpoint.version);
  w.u32(static_cast<std::uint32_t>(2 + m.params.tensors.size()));
  Tensor input({m.config.input.size()});
  for (std::size_t i = 0; i < m.config.input.size(); ++i)
    input[i] = static_cast<float>(m.config.input[i]);
  put_tensor(w, "model.input", input);
  put_tensor(w, "model.layers", encode_layers(m.config.chain));
  std::size_t slot = 0;
  for (std::size_t i = 0; i < m.config.chain.size(); ++i) {
    if (!m.config.chain[i].learned()) continue;
    const std::string prefix = "layer" + std::to_string(i);
    put_tensor(w, prefix + ".weight", m.params.tensors[slot]);
    put_tensor(w, prefix + ".bias", m.params.tensors[slot + 1]);
    slot += 2;
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes,
                             const std::string& origin) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError(FormatFault::kBadMagic, origin + ": not a checkpoint");
  Reader r(bytes, origin);
  r.str(4, "magic");
  Checkpoint cp;
  cp.version = r.u32("version");
  if (cp.version != kCheckpointVersion)
    throw FormatError(FormatFault::kVersionMismatch,
                      origin + ": checkpoint version " +
                          std::to_string(cp.version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  const std::uint32_t count = r.u32("tensor count");
  std::vector<std::pair<std::string, Tensor>> tensors;
  for (std::uint32_t i = 0; i < count; ++i) tensors.push_back(get_tensor(r));
  if (!r.done())
    throw FormatError(FormatFault::kMalformedHeader,
                      origin + ": trailing bytes after last tensor");
  if (tensors.size() < 2 || tensors[0].first != "model.input" ||
      tensors[1].first != "model.layers")
    throw FormatError(FormatFault::kMalformedHeader,
                      origin + ": missing model.input/model.layers records");

  ModelConfig config;
  config.input.clear();
  for (float v : tensors[0].second.values())
    config.input.push_back(static_cast<std::size_t>(v));
  config.chain = decode_layers(tensors[1].second, origin);
  const std::vector<Shape> shapes = infer_shapes(config.chain, config.input);
  config.classes = shapes.back().empty() ? 0 : shapes.back()[0];
  config.validate();

  Params params;
  std::size_t next = 2;
  for (std::size_t i = 0; i < config.chain.size(); ++i) {
    if (!config.chain[i].learned()) continue;
    const std::string prefix = "layer" + std::to_string(i);
    for (const char* suffix : {".weight", ".bias"}) {
      if (next >= tensors.size() || tensors[next].first != prefix + suffix)
        throw FormatError(FormatFault::kMalformedHeader,
                          origin + ": expected tensor " + prefix + suffix);
      params.tensors.push_back(std::move(tensors[next].second));
      ++next;
    }
  }
  if (next != tensors.size())
    throw FormatError(FormatFault::kMalformedHeader,
                      origin + ": unexpected extra tensors");
  check_params(config.chain, params);
  cp.model = {std::move(config), std::move(params)};
  return cp;
}

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& checkpoint) {
  write_file_atomic(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

}  // namespace relstab
