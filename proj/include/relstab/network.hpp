#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relstab/rng.hpp"
#include "relstab/tensor.hpp"

namespace relstab {

enum class LayerKind { kConv2D, kReLU, kMaxPool2, kFlatten, kDense };

std::string layer_kind_name(LayerKind kind);

// One layer of a sequential chain. Conv2D uses stride 1 with square kernels
// and symmetric zero padding; MaxPool2 is a 2x2 window with stride 2.
struct LayerSpec {
  LayerKind kind = LayerKind::kReLU;
  std::size_t in = 0;   // input channels (Conv2D) or features (Dense)
  std::size_t out = 0;  // output channels (Conv2D) or features (Dense)
  std::size_t kernel = 3;
  std::size_t padding = 1;

  static LayerSpec conv(std::size_t in, std::size_t out, std::size_t kernel = 3,
                        std::size_t padding = 1);
  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec relu();
  static LayerSpec max_pool();
  static LayerSpec flatten();

  bool learned() const {
    return kind == LayerKind::kConv2D || kind == LayerKind::kDense;
  }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

using LayerChain = std::vector<LayerSpec>;

// Learned tensors in chain order: weight then bias for every Conv2D/Dense.
// Conv weights are [out,in,k,k]; dense weights are [out,in]; biases [out].
struct Params {
  std::vector<Tensor> tensors;
};

// Gradients share the Params layout.
using ParamGrads = Params;

std::size_t learned_layer_count(const LayerChain& chain);

// Per-sample output shape of every layer (entry 0 is the input shape).
// Throws ConfigError naming the first layer whose input does not fit.
std::vector<Shape> infer_shapes(const LayerChain& chain,
                                const Shape& sample_shape);

// Zero-initialized parameter set shaped for the chain.
Params zero_params(const LayerChain& chain);

// Kaiming-style uniform weights in [-sqrt(6/fan_in), sqrt(6/fan_in)], zero
// biases, drawn in chain order from rng.
Params init_params(const LayerChain& chain, Rng& rng);

// Throws ConfigError if params are not shape-congruent with the chain.
void check_params(const LayerChain& chain, const Params& params);

// Activations recorded by forward_pass. activations[i] is the input to layer
// i and activations[i + 1] its output; ReLU pre-activations are therefore
// activations[i] for a ReLU at index i. pool_argmax[i] holds, for a MaxPool2
// layer, the flat input index (within the whole batch tensor) selected for
// each output element.
struct ForwardTape {
  std::vector<Tensor> activations;
  std::vector<std::vector<std::uint32_t>> pool_argmax;

  std::size_t records() const {
    return activations.empty() ? 0 : activations.size() - 1;
  }
  const Tensor& input(std::size_t layer) const { return activations[layer]; }
  const Tensor& output(std::size_t layer) const {
    return activations[layer + 1];
  }
};

struct ForwardResult {
  Tensor logits;
  ForwardTape tape;
};

// batch is [N, ...sample shape]; returns raw class scores [N,K].
ForwardResult forward_pass(const LayerChain& chain, const Params& params,
                           const Tensor& batch);

// Same arithmetic as forward_pass without keeping the tape.
Tensor predict_logits(const LayerChain& chain, const Params& params,
                      const Tensor& batch);

struct BackwardResult {
  ParamGrads grads;
  Tensor input_grad;  // empty unless requested
};

BackwardResult backward_pass(const LayerChain& chain, const Params& params,
                             const ForwardTape& tape, const Tensor& loss_grad,
                             bool want_input_grad = false);

struct LossResult {
  float loss = 0.0f;
  Tensor grad;  // [N,K], (softmax - onehot) / N
};

LossResult softmax_cross_entropy(const Tensor& logits,
                                 std::span<const int> labels);

// theta <- theta - lr * g for every element.
void sgd_step(Params& params, const ParamGrads& grads, float lr);

}  // namespace relstab
