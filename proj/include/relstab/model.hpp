#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "relstab/datagen.hpp"
#include "relstab/network.hpp"

namespace relstab {

struct ModelConfig {
  Shape input{1, 64, 64};  // per-sample [C,H,W]
  std::size_t classes = 2;
  LayerChain chain;

  // Throws ConfigError unless the chain is shape-consistent from input to a
  // [classes] score vector.
  void validate() const;
  std::size_t learned_layers() const { return learned_layer_count(chain); }
};

// Six 3x3 convolutions in three pooled stages, then two dense layers: eight
// learned layers.
ModelConfig default_model_config();
// Same chain for side x side inputs (the first dense layer is resized).
ModelConfig default_model_config(std::size_t side);

struct Model {
  ModelConfig config;
  Params params;

  Tensor logits(const Tensor& batch) const {
    return predict_logits(config.chain, params, batch);
  }
};

Model build_default_model(std::uint64_t seed);
Model build_model(const ModelConfig& config, std::uint64_t seed);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  float learning_rate = 0.01f;
  std::uint64_t seed = 1;
  bool shuffle = true;
  // Evaluate the training set after every epoch (costs one extra forward
  // pass over the data).
  bool track_train_accuracy = false;

  void validate() const;
};

struct TrainTrace {
  std::vector<double> loss;            // mean training loss per epoch
  std::vector<double> val_accuracy;    // per epoch
  std::vector<double> train_accuracy;  // per epoch when tracked

  friend bool operator==(const TrainTrace&, const TrainTrace&) = default;
};

// Mini-batch SGD over train; val is evaluated at the end of each epoch.
// Deterministic in (config.seed, model.params, train).
TrainTrace train(const TrainConfig& config, Model& model, const Dataset& train,
                 const Dataset& val);

// Fraction of argmax-correct predictions; ties go to the lowest class index.
double evaluate(const Model& model, const Dataset& dataset);

// Predicted class per image, same tie rule.
std::vector<int> predict(const Model& model, const Dataset& dataset);
int argmax_class(std::span<const float> scores);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  Model model;
};

// Format: "RLB1", u32 version, u32 tensor count, then per tensor u16 name
// length, name bytes, u8 rank, u32 dims, f32 payload; little-endian
// throughout. The architecture travels as two f32 tensors, "model.input"
// ([C,H,W]) and "model.layers" ([L,5] rows of kind,in,out,kernel,padding),
// followed by "layer<i>.weight"/"layer<i>.bias" for each learned layer i.
void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::string& bytes,
                             const std::string& origin = "checkpoint");

}  // namespace relstab
