#include "relstab/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "relstab/errors.hpp"

namespace relstab {

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2D: return "Conv2D";
    case LayerKind::kReLU: return "ReLU";
    case LayerKind::kMaxPool2: return "MaxPool2";
    case LayerKind::kFlatten: return "Flatten";
    case LayerKind::kDense: return "Dense";
  }
  return "?";
}

LayerSpec LayerSpec::conv(std::size_t in, std::size_t out, std::size_t kernel,
                          std::size_t padding) {
  return {LayerKind::kConv2D, in, out, kernel, padding};
}
LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  return {LayerKind::kDense, in, out, 0, 0};
}
LayerSpec LayerSpec::relu() { return {LayerKind::kReLU, 0, 0, 0, 0}; }
LayerSpec LayerSpec::max_pool() { return {LayerKind::kMaxPool2, 0, 0, 0, 0}; }
LayerSpec LayerSpec::flatten() { return {LayerKind::kFlatten, 0, 0, 0, 0}; }

std::size_t learned_layer_count(const LayerChain& chain) {
  return static_cast<std::size_t>(
      std::count_if(chain.begin(), chain.end(),
                    [](const LayerSpec& s) { return s.learned(); }));
}

namespace {

[[noreturn]] void layer_error(std::size_t index, const LayerSpec& spec,
                              const std::string& msg) {
  throw ConfigError("layer " + std::to_string(index) + " (" +
                    layer_kind_name(spec.kind) + "): " + msg);
}

Shape weight_shape(const LayerSpec& s) {
  if (s.kind == LayerKind::kConv2D) return {s.out, s.in, s.kernel, s.kernel};
  return {s.out, s.in};
}

}  // namespace

std::vector<Shape> infer_shapes(const LayerChain& chain,
                                const Shape& sample_shape) {
  std::vector<Shape> shapes{sample_shape};
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const LayerSpec& s = chain[i];
    const Shape& in = shapes.back();
    Shape out;
    switch (s.kind) {
      case LayerKind::kConv2D: {
        if (s.in == 0 || s.out == 0 || s.kernel == 0)
          layer_error(i, s, "channels and kernel must be >= 1");
        if (in.size() != 3 || in[0] != s.in)
          layer_error(i, s, "expects [" + std::to_string(s.in) +
                                ",H,W] input, got " + shape_string(in));
        if (in[1] + 2 * s.padding < s.kernel ||
            in[2] + 2 * s.padding < s.kernel)
          layer_error(i, s, "kernel larger than padded input");
        out = {s.out, in[1] + 2 * s.padding - s.kernel + 1,
               in[2] + 2 * s.padding - s.kernel + 1};
        break;
      }
      case LayerKind::kReLU:
        out = in;
        break;
      case LayerKind::kMaxPool2:
        if (in.size() != 3 || in[1] < 2 || in[2] < 2)
          layer_error(i, s, "expects [C,H,W] input with H,W >= 2, got " +
                                shape_string(in));
        out = {in[0], in[1] / 2, in[2] / 2};
        break;
      case LayerKind::kFlatten:
        out = {shape_size(in)};
        break;
      case LayerKind::kDense:
        if (s.in == 0 || s.out == 0)
          layer_error(i, s, "features must be >= 1");
        if (in.size() != 1 || in[0] != s.in)
          layer_error(i, s, "expects " + std::to_string(s.in) +
                                " features, got " + shape_string(in));
        out = {s.out};
        break;
    }
    shapes.push_back(std::move(out));
  }
  return shapes;
}

Params zero_params(const LayerChain& chain) {
  Params p;
  for (const LayerSpec& s : chain) {
    if (!s.learned()) continue;
    p.tensors.emplace_back(weight_shape(s));
    p.tensors.emplace_back(Shape{s.out});
  }
  return p;
}

Params init_params(const LayerChain& chain, Rng& rng) {
  Params p = zero_params(chain);
  std::size_t slot = 0;
  for (const LayerSpec& s : chain) {
    if (!s.learned()) continue;
    const std::size_t fan_in =
        s.kind == LayerKind::kConv2D ? s.in * s.kernel * s.kernel : s.in;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (float& w : p.tensors[slot].values())
      w = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
    slot += 2;
  }
  return p;
}

void check_params(const LayerChain& chain, const Params& params) {
  const std::size_t expected = 2 * learned_layer_count(chain);
  if (params.tensors.size() != expected)
    throw ConfigError("parameter set holds " +
                      std::to_string(params.tensors.size()) +
                      " tensors, chain needs " + std::to_string(expected));
  std::size_t slot = 0;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const LayerSpec& s = chain[i];
    if (!s.learned()) continue;
    if (params.tensors[slot].shape() != weight_shape(s))
      layer_error(i, s, "weight shape " +
                            shape_string(params.tensors[slot].shape()) +
                            ", expected " + shape_string(weight_shape(s)));
    if (params.tensors[slot + 1].shape() != Shape{s.out})
      layer_error(i, s, "bias shape " +
                            shape_string(params.tensors[slot + 1].shape()));
    slot += 2;
  }
}

namespace {

// Fixed eight-lane dot product. The lane split is part of the arithmetic
// definition, so results do not depend on the SIMD width the compiler picks.
inline float dot(const float* a, const float* b, std::size_t n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  float tail = 0.0f;
  for (; i < n; ++i) tail += a[i] * b[i];
  return (((acc[0] + acc[1]) + (acc[2] + acc[3])) +
          ((acc[4] + acc[5]) + (acc[6] + acc[7]))) +
         tail;
}

// Eight-lane float vector (GCC/Clang extension). Lane arithmetic is plain
// IEEE single precision, so results match a scalar evaluation in the same
// order.
typedef float f32x8 __attribute__((vector_size(32)));

inline f32x8 load8(const float* p) {
  f32x8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}
inline void store8(float* p, f32x8 v) { std::memcpy(p, &v, sizeof v); }
inline f32x8 splat8(float x) { return f32x8{x, x, x, x, x, x, x, x}; }

constexpr std::size_t kChunk = 16;

inline std::size_t round_up(std::size_t n, std::size_t m) {
  return (n + m - 1) / m * m;
}

// out[o][j] = sum_s w[o*S + s] * src[offs[s] + j] for j < len (len a multiple
// of kChunk), accumulated in s order. Outputs are processed CB at a time so
// each source chunk is loaded once per block.
template <std::size_t CB>
void shifted_block(const float* w, std::size_t S, const float* src,
                   const std::size_t* offs, float* out, std::size_t out_stride,
                   std::size_t len) {
  for (std::size_t j0 = 0; j0 < len; j0 += kChunk) {
    f32x8 lo[CB], hi[CB];
    for (std::size_t c = 0; c < CB; ++c) lo[c] = hi[c] = splat8(0.0f);
    for (std::size_t s = 0; s < S; ++s) {
      const float* x = src + offs[s] + j0;
      const f32x8 x0 = load8(x), x1 = load8(x + 8);
      for (std::size_t c = 0; c < CB; ++c) {
        const f32x8 wc = splat8(w[c * S + s]);
        lo[c] += wc * x0;
        hi[c] += wc * x1;
      }
    }
    for (std::size_t c = 0; c < CB; ++c) {
      store8(out + c * out_stride + j0, lo[c]);
      store8(out + c * out_stride + j0 + 8, hi[c]);
    }
  }
}

void shifted_accumulate(const float* w, std::size_t nout, std::size_t S,
                        const float* src, const std::size_t* offs, float* out,
                        std::size_t out_stride, std::size_t len) {
  std::size_t o = 0;
  for (; o + 4 <= nout; o += 4)
    shifted_block<4>(w + o * S, S, src, offs, out + o * out_stride, out_stride,
                     len);
  for (; o < nout; ++o)
    shifted_block<1>(w + o * S, S, src, offs, out + o * out_stride, out_stride,
                     len);
}

// dw[r*S + s] += sum_{j<len} g[r*g_stride + j] * src[offs[s] + j]. Each dot
// product uses kChunk fixed lanes reduced pairwise.
template <std::size_t RB>
void shifted_dots_block(const float* g, std::size_t g_stride, const float* src,
                        const std::size_t* offs, std::size_t S, float* dw,
                        std::size_t len) {
  for (std::size_t s = 0; s < S; ++s) {
    f32x8 lo[RB], hi[RB];
    for (std::size_t r = 0; r < RB; ++r) lo[r] = hi[r] = splat8(0.0f);
    const float* x = src + offs[s];
    for (std::size_t j0 = 0; j0 < len; j0 += kChunk) {
      const f32x8 x0 = load8(x + j0), x1 = load8(x + j0 + 8);
      for (std::size_t r = 0; r < RB; ++r) {
        lo[r] += load8(g + r * g_stride + j0) * x0;
        hi[r] += load8(g + r * g_stride + j0 + 8) * x1;
      }
    }
    for (std::size_t r = 0; r < RB; ++r) {
      float a[kChunk];
      store8(a, lo[r]);
      store8(a + 8, hi[r]);
      for (std::size_t width = kChunk / 2; width > 0; width /= 2)
        for (std::size_t i = 0; i < width; ++i) a[i] += a[i + width];
      dw[r * S + s] += a[0];
    }
  }
}

void shifted_dots(const float* g, std::size_t g_stride, std::size_t rows,
                  const float* src, const std::size_t* offs, std::size_t S,
                  float* dw, std::size_t len) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4)
    shifted_dots_block<4>(g + r * g_stride, g_stride, src, offs, S, dw + r * S,
                          len);
  for (; r < rows; ++r)
    shifted_dots_block<1>(g + r * g_stride, g_stride, src, offs, S, dw + r * S,
                          len);
}

// Convolution geometry in "padded-width" form: the input is copied into a
// zero-padded [C, Hp, Wp] buffer and outputs are computed at positions
// j = oy * Wp + ox, so every kernel tap is a constant shift of a contiguous
// plane. Columns ox >= out_w are scratch and discarded.
struct ConvGeom {
  std::size_t in_c, in_h, in_w, out_c, out_h, out_w, k, pad;
  std::size_t hp, wp, plane, len, len_r;

  ConvGeom(const LayerSpec& s, const Shape& in, const Shape& out)
      : in_c(in[0]), in_h(in[1]), in_w(in[2]), out_c(out[0]), out_h(out[1]),
        out_w(out[2]), k(s.kernel), pad(s.padding) {
    hp = in_h + 2 * pad;
    wp = in_w + 2 * pad;
    plane = hp * wp;
    len = (out_h - 1) * wp + out_w;
    len_r = round_up(len, kChunk);
  }
  std::size_t taps() const { return in_c * k * k; }

  // Zero-padded copy of one sample plus the read-ahead tail.
  std::vector<float> padded_input(const float* x) const {
    std::vector<float> xp(in_c * plane + (len_r - len), 0.0f);
    for (std::size_t c = 0; c < in_c; ++c)
      for (std::size_t y = 0; y < in_h; ++y)
        std::copy(x + (c * in_h + y) * in_w, x + (c * in_h + y + 1) * in_w,
                  xp.begin() + c * plane + (y + pad) * wp + pad);
    return xp;
  }
  // Offset of tap (ci, ky, kx) in the padded input.
  std::vector<std::size_t> input_offsets() const {
    std::vector<std::size_t> offs;
    offs.reserve(taps());
    for (std::size_t ci = 0; ci < in_c; ++ci)
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx)
          offs.push_back(ci * plane + ky * wp + kx);
    return offs;
  }
};

void conv_forward(const ConvGeom& g, const std::vector<std::size_t>& offs,
                  const float* in, const float* w, const float* b, float* out,
                  std::vector<float>& scratch) {
  const std::vector<float> xp = g.padded_input(in);
  scratch.resize(g.out_c * g.len_r);
  shifted_accumulate(w, g.out_c, g.taps(), xp.data(), offs.data(),
                     scratch.data(), g.len_r, g.len_r);
  for (std::size_t co = 0; co < g.out_c; ++co)
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ox = 0; ox < g.out_w; ++ox)
        out[(co * g.out_h + oy) * g.out_w + ox] =
            scratch[co * g.len_r + oy * g.wp + ox] + b[co];
}

struct ConvBackwardPlan {
  ConvGeom geom;
  std::vector<std::size_t> in_offs;   // taps into the padded input
  std::vector<std::size_t> grad_offs; // taps into the margin-padded gradient
  std::vector<float> w_t;             // weights as [in_c][out_c*k*k]
  std::size_t margin, grad_stride, in_len_r;

  ConvBackwardPlan(const ConvGeom& g, const float* w)
      : geom(g), in_offs(g.input_offsets()) {
    const std::size_t kk = g.k * g.k;
    margin = (g.k - 1) * g.wp + (g.k - 1);
    in_len_r = round_up(g.plane, kChunk);
    grad_stride = margin + std::max(g.len_r, in_len_r) + kChunk;
    w_t.resize(g.in_c * g.out_c * kk);
    for (std::size_t co = 0; co < g.out_c; ++co)
      for (std::size_t ci = 0; ci < g.in_c; ++ci)
        for (std::size_t t = 0; t < kk; ++t)
          w_t[(ci * g.out_c + co) * kk + t] = w[(co * g.in_c + ci) * kk + t];
    for (std::size_t co = 0; co < g.out_c; ++co)
      for (std::size_t ky = 0; ky < g.k; ++ky)
        for (std::size_t kx = 0; kx < g.k; ++kx)
          grad_offs.push_back(co * grad_stride + margin - (ky * g.wp + kx));
  }
};

void conv_backward(const ConvBackwardPlan& plan, const float* in,
                   const float* gout, float* dw, float* db, float* din) {
  const ConvGeom& g = plan.geom;
  // Output gradient in padded-width layout with a zero margin in front so
  // that the input-gradient taps are non-negative shifts.
  std::vector<float> gbuf(g.out_c * plan.grad_stride, 0.0f);
  for (std::size_t co = 0; co < g.out_c; ++co) {
    const float* src = gout + co * g.out_h * g.out_w;
    float bias_acc = 0.0f;
    for (std::size_t j = 0; j < g.out_h * g.out_w; ++j) bias_acc += src[j];
    db[co] += bias_acc;
    float* dst = gbuf.data() + co * plan.grad_stride + plan.margin;
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      std::copy(src + oy * g.out_w, src + (oy + 1) * g.out_w, dst + oy * g.wp);
  }

  const std::vector<float> xp = g.padded_input(in);
  shifted_dots(gbuf.data() + plan.margin, plan.grad_stride, g.out_c, xp.data(),
               plan.in_offs.data(), g.taps(), dw, g.len_r);

  if (din == nullptr) return;
  std::vector<float> dpad(g.in_c * plan.in_len_r);
  shifted_accumulate(plan.w_t.data(), g.in_c, g.out_c * g.k * g.k,
                     gbuf.data(), plan.grad_offs.data(), dpad.data(),
                     plan.in_len_r, plan.in_len_r);
  for (std::size_t ci = 0; ci < g.in_c; ++ci)
    for (std::size_t y = 0; y < g.in_h; ++y)
      for (std::size_t x = 0; x < g.in_w; ++x)
        din[(ci * g.in_h + y) * g.in_w + x] +=
            dpad[ci * plan.in_len_r + (y + g.pad) * g.wp + x + g.pad];
}

void dense_forward(std::size_t in_f, std::size_t out_f, const float* x,
                   const float* w, const float* b, float* z) {
  for (std::size_t o = 0; o < out_f; ++o)
    z[o] = b[o] + dot(w + o * in_f, x, in_f);
}

void dense_backward(std::size_t in_f, std::size_t out_f, const float* x,
                    const float* w, const float* gz, float* dw, float* db,
                    float* dx) {
  for (std::size_t o = 0; o < out_f; ++o) {
    const float g = gz[o];
    db[o] += g;
    float* row = dw + o * in_f;
    for (std::size_t i = 0; i < in_f; ++i) row[i] += g * x[i];
  }
  if (dx == nullptr) return;
  for (std::size_t o = 0; o < out_f; ++o) {
    const float g = gz[o];
    const float* row = w + o * in_f;
    for (std::size_t i = 0; i < in_f; ++i) dx[i] += row[i] * g;
  }
}

// Runs one layer over the whole batch. argmax is filled for MaxPool2 when
// non-null.
Tensor run_layer(const LayerSpec& s, const Shape& in_shape,
                 const Shape& out_shape, const Params& params,
                 std::size_t slot, const Tensor& x,
                 std::vector<std::uint32_t>* argmax) {
  const std::size_t n = x.dim(0);
  Shape batch_shape{n};
  batch_shape.insert(batch_shape.end(), out_shape.begin(), out_shape.end());
  const std::size_t in_size = shape_size(in_shape);
  const std::size_t out_size = shape_size(out_shape);
  switch (s.kind) {
    case LayerKind::kConv2D: {
      Tensor y(batch_shape);
      const ConvGeom g(s, in_shape, out_shape);
      const std::vector<std::size_t> offs = g.input_offsets();
      std::vector<float> scratch;
      for (std::size_t i = 0; i < n; ++i)
        conv_forward(g, offs, x.data() + i * in_size,
                     params.tensors[slot].data(),
                     params.tensors[slot + 1].data(), y.data() + i * out_size,
                     scratch);
      return y;
    }
    case LayerKind::kDense: {
      Tensor y(batch_shape);
      for (std::size_t i = 0; i < n; ++i)
        dense_forward(s.in, s.out, x.data() + i * in_size,
                      params.tensors[slot].data(),
                      params.tensors[slot + 1].data(), y.data() + i * out_size);
      return y;
    }
    case LayerKind::kReLU: {
      Tensor y(batch_shape);
      const float* src = x.data();
      float* dst = y.data();
      for (std::size_t i = 0; i < x.size(); ++i)
        dst[i] = src[i] > 0.0f ? src[i] : 0.0f;
      return y;
    }
    case LayerKind::kMaxPool2: {
      Tensor y(batch_shape);
      const std::size_t c = in_shape[0], h = in_shape[1], w = in_shape[2];
      const std::size_t oh = out_shape[1], ow = out_shape[2];
      if (argmax) argmax->assign(y.size(), 0);
      std::size_t o = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const std::size_t base = i * in_size + ch * h * w;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
              std::size_t best = base + 2 * oy * w + 2 * ox;
              float best_v = x[best];
              for (std::size_t dy = 0; dy < 2; ++dy) {
                for (std::size_t dx = 0; dx < 2; ++dx) {
                  const std::size_t idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                  if (x[idx] > best_v) {
                    best_v = x[idx];
                    best = idx;
                  }
                }
              }
              y[o] = best_v;
              if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best);
            }
          }
        }
      }
      return y;
    }
    case LayerKind::kFlatten:
      return x.reshaped(batch_shape);
  }
  throw InternalError("unknown layer kind");
}

std::vector<Shape> batch_layer_shapes(const LayerChain& chain,
                                      const Tensor& batch) {
  if (batch.rank() < 2)
    throw InputError("batch must be [N, ...], got " +
                     shape_string(batch.shape()));
  const Shape sample(batch.shape().begin() + 1, batch.shape().end());
  std::vector<Shape> shapes = infer_shapes(chain, sample);
  if (shapes.back().size() != 1)
    throw ConfigError("chain must end in a flat score vector, ends in " +
                      shape_string(shapes.back()));
  return shapes;
}

template <bool kRecord>
Tensor run_chain(const LayerChain& chain, const Params& params,
                 const Tensor& batch, ForwardTape* tape) {
  check_params(chain, params);
  const std::vector<Shape> shapes = batch_layer_shapes(chain, batch);
  if constexpr (kRecord) {
    tape->activations.clear();
    tape->activations.reserve(chain.size() + 1);
    tape->activations.push_back(batch);
    tape->pool_argmax.assign(chain.size(), {});
  }
  Tensor current = batch;
  std::size_t slot = 0;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    std::vector<std::uint32_t>* argmax =
        kRecord ? &tape->pool_argmax[i] : nullptr;
    Tensor next = run_layer(chain[i], shapes[i], shapes[i + 1], params, slot,
                            current, argmax);
    if (chain[i].learned()) slot += 2;
    if constexpr (kRecord) tape->activations.push_back(next);
    current = std::move(next);
  }
  return current;
}

}  // namespace

ForwardResult forward_pass(const LayerChain& chain, const Params& params,
                           const Tensor& batch) {
  ForwardResult result;
  result.logits = run_chain<true>(chain, params, batch, &result.tape);
  return result;
}

Tensor predict_logits(const LayerChain& chain, const Params& params,
                      const Tensor& batch) {
  return run_chain<false>(chain, params, batch, nullptr);
}

BackwardResult backward_pass(const LayerChain& chain, const Params& params,
                             const ForwardTape& tape, const Tensor& loss_grad,
                             bool want_input_grad) {
  if (tape.records() != chain.size())
    throw InternalError("tape holds " + std::to_string(tape.records()) +
                        " records for a " + std::to_string(chain.size()) +
                        "-layer chain");
  check_params(chain, params);
  const std::vector<Shape> shapes =
      batch_layer_shapes(chain, tape.activations.front());
  for (std::size_t i = 0; i <= chain.size(); ++i) {
    const Shape& act = tape.activations[i].shape();
    if (Shape(act.begin() + 1, act.end()) != shapes[i])
      throw InternalError("tape activation " + std::to_string(i) +
                          " has shape " + shape_string(act) +
                          " inconsistent with the chain");
  }
  if (loss_grad.shape() != tape.activations.back().shape())
    throw InternalError("loss gradient shape " +
                        shape_string(loss_grad.shape()) +
                        " does not match logits " +
                        shape_string(tape.activations.back().shape()));

  BackwardResult result;
  result.grads = zero_params(chain);
  const std::size_t n = loss_grad.dim(0);

  std::vector<std::size_t> slots(chain.size(), 0);
  for (std::size_t i = 0, slot = 0; i < chain.size(); ++i) {
    slots[i] = slot;
    if (chain[i].learned()) slot += 2;
  }

  Tensor upstream = loss_grad;
  for (std::size_t li = chain.size(); li-- > 0;) {
    const LayerSpec& s = chain[li];
    const Tensor& x = tape.input(li);
    const bool need_input = li > 0 || want_input_grad;
    const std::size_t in_size = shape_size(shapes[li]);
    const std::size_t out_size = shape_size(shapes[li + 1]);
    Tensor down = need_input ? Tensor(x.shape()) : Tensor();
    switch (s.kind) {
      case LayerKind::kConv2D: {
        const std::size_t slot = slots[li];
        const ConvBackwardPlan plan(ConvGeom(s, shapes[li], shapes[li + 1]),
                                    params.tensors[slot].data());
        for (std::size_t i = 0; i < n; ++i)
          conv_backward(plan, x.data() + i * in_size,
                        upstream.data() + i * out_size,
                        result.grads.tensors[slot].data(),
                        result.grads.tensors[slot + 1].data(),
                        need_input ? down.data() + i * in_size : nullptr);
        break;
      }
      case LayerKind::kDense: {
        const std::size_t slot = slots[li];
        for (std::size_t i = 0; i < n; ++i)
          dense_backward(s.in, s.out, x.data() + i * in_size,
                         params.tensors[slot].data(),
                         upstream.data() + i * out_size,
                         result.grads.tensors[slot].data(),
                         result.grads.tensors[slot + 1].data(),
                         need_input ? down.data() + i * in_size : nullptr);
        break;
      }
      case LayerKind::kReLU:
        if (need_input)
          for (std::size_t i = 0; i < x.size(); ++i)
            down[i] = x[i] > 0.0f ? upstream[i] : 0.0f;
        break;
      case LayerKind::kMaxPool2: {
        if (!need_input) break;
        const std::vector<std::uint32_t>& argmax = tape.pool_argmax[li];
        if (argmax.size() != upstream.size())
          throw InternalError("max-pool argmax cache size mismatch");
        for (std::size_t i = 0; i < upstream.size(); ++i)
          down[argmax[i]] += upstream[i];
        break;
      }
      case LayerKind::kFlatten:
        if (need_input) down = upstream.reshaped(x.shape());
        break;
    }
    if (!need_input) break;
    upstream = std::move(down);
  }
  if (want_input_grad) result.input_grad = std::move(upstream);
  return result;
}

LossResult softmax_cross_entropy(const Tensor& logits,
                                 std::span<const int> labels) {
  if (logits.rank() != 2)
    throw InputError("logits must be [N,K], got " +
                     shape_string(logits.shape()));
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n)
    throw InputError("label count " + std::to_string(labels.size()) +
                     " does not match batch size " + std::to_string(n));
  LossResult r;
  r.grad = Tensor(logits.shape());
  double total = 0.0;
  std::vector<double> p(k);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= k)
      throw InputError("label " + std::to_string(label) + " outside [0," +
                       std::to_string(k) + ")");
    const float* row = logits.data() + i * k;
    const double m = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = std::exp(static_cast<double>(row[j]) - m);
      z += p[j];
    }
    total += -(static_cast<double>(row[label]) - m - std::log(z));
    for (std::size_t j = 0; j < k; ++j) {
      const double onehot = static_cast<std::size_t>(label) == j ? 1.0 : 0.0;
      r.grad[i * k + j] =
          static_cast<float>((p[j] / z - onehot) / static_cast<double>(n));
    }
  }
  r.loss = static_cast<float>(total / static_cast<double>(n));
  return r;
}

void sgd_step(Params& params, const ParamGrads& grads, float lr) {
  if (params.tensors.size() != grads.tensors.size())
    throw InputError("gradient set does not match parameter set");
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    Tensor& p = params.tensors[t];
    const Tensor& g = grads.tensors[t];
    if (p.shape() != g.shape())
      throw InputError("gradient shape " + shape_string(g.shape()) +
                       " does not match parameter " + shape_string(p.shape()));
    float* pv = p.data();
    const float* gv = g.data();
    for (std::size_t i = 0; i < p.size(); ++i) pv[i] -= lr * gv[i];
  }
}

}  // namespace relstab
