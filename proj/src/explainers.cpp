#include "relstab/explainers.hpp"

#include <algorithm>
#include <cmath>

#include "relstab/errors.hpp"
#include "relstab/ridge.hpp"
#include "relstab/rng.hpp"

namespace relstab {

std::string explainer_name(ExplainerKind kind) {
  switch (kind) {
    case ExplainerKind::kLrp: return "lrp";
    case ExplainerKind::kLime: return "lime";
    case ExplainerKind::kOcclusion: return "occlusion";
  }
  return "?";
}

ExplainerKind parse_explainer(const std::string& name) {
  if (name == "lrp") return ExplainerKind::kLrp;
  if (name == "lime") return ExplainerKind::kLime;
  if (name == "occlusion") return ExplainerKind::kOcclusion;
  throw ConfigError("unknown explainer '" + name + "'");
}

LogitFn model_scorer(const Model& model) {
  return [&model](const Tensor& batch) { return model.logits(batch); };
}

namespace {

Tensor as_batch(const Tensor& sample) {
  Shape s = sample.shape();
  s.insert(s.begin(), 1);
  return sample.reshaped(std::move(s));
}

void check_image(const Tensor& image) {
  if (image.rank() != 3)
    throw InputError("expected a [C,H,W] image, got " +
                     shape_string(image.shape()));
}

int resolve_target(const std::optional<int>& requested, const Tensor& logits) {
  const std::size_t k = logits.dim(1);
  if (requested) {
    if (*requested < 0 || static_cast<std::size_t>(*requested) >= k)
      throw InputError("target class " + std::to_string(*requested) +
                       " outside [0," + std::to_string(k) + ")");
    return *requested;
  }
  return argmax_class(logits.values().subspan(0, k));
}

double stabilized(double z, double eps) {
  return z + eps * (z >= 0.0 ? 1.0 : -1.0);
}

// Epsilon-rule redistribution through one learned layer. a: layer input,
// relevance: per-output relevance; returns per-input relevance.
std::vector<double> lrp_dense(const LayerSpec& s, const Tensor& w,
                              const Tensor& b, const Tensor& a,
                              const std::vector<double>& relevance,
                              double eps) {
  std::vector<double> scaled(s.out, 0.0);
  for (std::size_t k = 0; k < s.out; ++k) {
    double z = b[k];
    for (std::size_t j = 0; j < s.in; ++j)
      z += static_cast<double>(a[j]) * w[k * s.in + j];
    const double denom = stabilized(z, eps);
    scaled[k] = denom == 0.0 ? 0.0 : relevance[k] / denom;
  }
  std::vector<double> out(s.in, 0.0);
  for (std::size_t j = 0; j < s.in; ++j) {
    double c = 0.0;
    for (std::size_t k = 0; k < s.out; ++k) c += w[k * s.in + j] * scaled[k];
    out[j] = a[j] * c;
  }
  return out;
}

std::vector<double> lrp_conv(const LayerSpec& s, const Shape& in_shape,
                             const Shape& out_shape, const Tensor& w,
                             const Tensor& b, const Tensor& a,
                             const std::vector<double>& relevance, double eps) {
  const std::size_t ci_n = in_shape[0], h = in_shape[1], wd = in_shape[2];
  const std::size_t co_n = out_shape[0], oh = out_shape[1], ow = out_shape[2];
  const std::size_t k = s.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(s.padding);
  auto weight = [&](std::size_t co, std::size_t ci, std::size_t ky,
                    std::size_t kx) -> double {
    return w[((co * ci_n + ci) * k + ky) * k + kx];
  };
  // Visits every (input index, weight) pair feeding output (co, oy, ox).
  auto for_each_tap = [&](std::size_t co, std::size_t oy, std::size_t ox,
                          auto&& fn) {
    for (std::size_t ci = 0; ci < ci_n; ++ci)
      for (std::size_t ky = 0; ky < k; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < k; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad;
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
          fn((ci * h + static_cast<std::size_t>(iy)) * wd +
                 static_cast<std::size_t>(ix),
             weight(co, ci, ky, kx));
        }
      }
  };

  std::vector<double> c(ci_n * h * wd, 0.0);
  for (std::size_t co = 0; co < co_n; ++co)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t o = (co * oh + oy) * ow + ox;
        if (relevance[o] == 0.0) continue;
        double z = b[co];
        for_each_tap(co, oy, ox, [&](std::size_t idx, double wv) {
          z += static_cast<double>(a[idx]) * wv;
        });
        const double denom = stabilized(z, eps);
        if (denom == 0.0) continue;
        const double scaled = relevance[o] / denom;
        for_each_tap(co, oy, ox,
                     [&](std::size_t idx, double wv) { c[idx] += wv * scaled; });
      }
  for (std::size_t j = 0; j < c.size(); ++j) c[j] *= a[j];
  return c;
}

}  // namespace

LrpResult lrp_relevance(const LayerChain& chain, const Params& params,
                        const Tensor& sample, const LrpConfig& config) {
  if (!(config.epsilon >= 0.0))
    throw ConfigError("LRP epsilon must be >= 0");
  const ForwardResult fwd = forward_pass(chain, params, as_batch(sample));
  const std::vector<Shape> shapes = infer_shapes(chain, sample.shape());

  LrpResult result;
  result.target = resolve_target(config.target, fwd.logits);
  result.logit = fwd.logits[static_cast<std::size_t>(result.target)];

  std::vector<double> relevance(fwd.logits.size(), 0.0);
  relevance[static_cast<std::size_t>(result.target)] = result.logit;

  std::vector<std::size_t> slots(chain.size(), 0);
  for (std::size_t i = 0, slot = 0; i < chain.size(); ++i) {
    slots[i] = slot;
    if (chain[i].learned()) slot += 2;
  }

  for (std::size_t li = chain.size(); li-- > 0;) {
    const LayerSpec& s = chain[li];
    const Tensor& a = fwd.tape.input(li);
    switch (s.kind) {
      case LayerKind::kDense:
        relevance = lrp_dense(s, params.tensors[slots[li]],
                              params.tensors[slots[li] + 1], a, relevance,
                              config.epsilon);
        break;
      case LayerKind::kConv2D:
        relevance = lrp_conv(s, shapes[li], shapes[li + 1],
                             params.tensors[slots[li]],
                             params.tensors[slots[li] + 1], a, relevance,
                             config.epsilon);
        break;
      case LayerKind::kMaxPool2: {
        std::vector<double> routed(a.size(), 0.0);
        const auto& argmax = fwd.tape.pool_argmax[li];
        for (std::size_t o = 0; o < relevance.size(); ++o)
          routed[argmax[o]] += relevance[o];
        relevance = std::move(routed);
        break;
      }
      case LayerKind::kReLU:
      case LayerKind::kFlatten:
        break;
    }
  }

  result.relevance = Tensor(sample.shape());
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    result.relevance[i] = static_cast<float>(relevance[i]);
    result.total += relevance[i];
  }
  return result;
}

namespace {

Tensor channel_sum(const Tensor& t) {
  const std::size_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  Tensor out({h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h * w; ++i) out[i] += t[ch * h * w + i];
  return out;
}

}  // namespace

RelevanceMap lrp_explain(const Model& model, const Tensor& image,
                         const LrpConfig& config) {
  check_image(image);
  const LrpResult r =
      lrp_relevance(model.config.chain, model.params, image, config);
  RelevanceMap map;
  map.values = channel_sum(r.relevance);
  map.explainer = ExplainerKind::kLrp;
  map.target = r.target;
  return map;
}

int predicted_class(const LogitFn& scorer, const Tensor& image) {
  return resolve_target(std::nullopt, scorer(as_batch(image)));
}

namespace {

// Scores a list of images in fixed-size batches; returns the logits rows.
std::vector<std::vector<float>> score_all(const LogitFn& scorer,
                                          const std::vector<Tensor>& images,
                                          std::size_t batch) {
  std::vector<std::vector<float>> rows;
  rows.reserve(images.size());
  batch = std::max<std::size_t>(batch, 1);
  for (std::size_t start = 0; start < images.size(); start += batch) {
    const std::size_t end = std::min(images.size(), start + batch);
    const Tensor logits = scorer(
        stack(std::span<const Tensor>(images.data() + start, end - start)));
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < end - start; ++i)
      rows.emplace_back(logits.data() + i * k, logits.data() + (i + 1) * k);
  }
  return rows;
}

double softmax_prob(const std::vector<float>& logits, int target) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (float v : logits) z += std::exp(static_cast<double>(v) - m);
  return std::exp(static_cast<double>(logits[static_cast<std::size_t>(target)]) - m) / z;
}

}  // namespace

LimeResult lime_explain(const LogitFn& scorer, const Tensor& image,
                        const LimeConfig& config) {
  check_image(image);
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const std::size_t g = config.grid;
  if (g == 0 || h % g != 0 || w % g != 0)
    throw ConfigError("LIME grid " + std::to_string(g) +
                      " must divide the image side");
  const std::size_t d = g * g;
  if (config.n_samples < d)
    throw ConfigError("LIME needs n_samples >= segment count (" +
                      std::to_string(d) + ")");
  if (!(config.ridge > 0.0)) throw ConfigError("LIME ridge strength must be > 0");
  const double width = config.kernel_width.value_or(0.25 * std::sqrt(double(d)));
  if (!(width > 0.0)) throw ConfigError("LIME kernel width must be > 0");
  const std::size_t seg_h = h / g, seg_w = w / g;

  const int target =
      resolve_target(config.target, scorer(as_batch(image)));

  Rng rng(config.seed);
  std::vector<double> design(config.n_samples * d);
  std::vector<double> weights(config.n_samples);
  for (std::size_t i = 0; i < config.n_samples; ++i) {
    std::size_t removed = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const bool keep = rng.coin();
      design[i * d + j] = keep ? 1.0 : 0.0;
      removed += keep ? 0 : 1;
    }
    const double dist = static_cast<double>(removed) / static_cast<double>(d);
    weights[i] = std::exp(-(dist * dist) / (width * width));
  }

  std::vector<double> response(config.n_samples);
  for (std::size_t start = 0; start < config.n_samples; start += config.batch) {
    const std::size_t end = std::min(config.n_samples, start + config.batch);
    std::vector<Tensor> masked;
    masked.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      Tensor m = image;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x)
            if (design[i * d + (y / seg_h) * g + x / seg_w] == 0.0)
              m[(ch * h + y) * w + x] = config.baseline;
      masked.push_back(std::move(m));
    }
    const auto rows = score_all(scorer, masked, config.batch);
    for (std::size_t i = start; i < end; ++i)
      response[i] = softmax_prob(rows[i - start], target);
  }

  const RidgeFit fit =
      fit_weighted_ridge(design, d, response, weights,
                         config.ridge / static_cast<double>(config.n_samples));

  LimeResult result;
  result.segment_weights = fit.coef;
  result.intercept = fit.intercept;
  result.map.values = Tensor({h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      result.map.values[y * w + x] =
          static_cast<float>(fit.coef[(y / seg_h) * g + x / seg_w]);
  result.map.explainer = ExplainerKind::kLime;
  result.map.target = target;
  result.map.seed = config.seed;
  return result;
}

LimeResult lime_explain(const Model& model, const Tensor& image,
                        const LimeConfig& config) {
  return lime_explain(model_scorer(model), image, config);
}

OcclusionResult occlusion_explain(const LogitFn& scorer, const Tensor& image,
                                  const OcclusionConfig& config) {
  check_image(image);
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (config.patch == 0 || config.patch > h || config.patch > w)
    throw ConfigError("occlusion patch must be in [1, image side]");
  if (config.stride == 0) throw ConfigError("occlusion stride must be >= 1");

  const Tensor base_logits = scorer(as_batch(image));
  const int target = resolve_target(config.target, base_logits);
  const double base = base_logits[static_cast<std::size_t>(target)];

  std::vector<std::pair<std::size_t, std::size_t>> origins;
  for (std::size_t y0 = 0; y0 + config.patch <= h; y0 += config.stride)
    for (std::size_t x0 = 0; x0 + config.patch <= w; x0 += config.stride)
      origins.emplace_back(y0, x0);

  std::vector<double> sum(h * w, 0.0);
  OcclusionResult result;
  result.coverage = Tensor({h, w});
  for (std::size_t start = 0; start < origins.size(); start += config.batch) {
    const std::size_t end = std::min(origins.size(), start + config.batch);
    std::vector<Tensor> occluded;
    for (std::size_t p = start; p < end; ++p) {
      Tensor m = image;
      const auto [y0, x0] = origins[p];
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = y0; y < y0 + config.patch; ++y)
          for (std::size_t x = x0; x < x0 + config.patch; ++x)
            m[(ch * h + y) * w + x] = config.baseline;
      occluded.push_back(std::move(m));
    }
    const auto rows = score_all(scorer, occluded, config.batch);
    for (std::size_t p = start; p < end; ++p) {
      const double drop =
          base - rows[p - start][static_cast<std::size_t>(target)];
      const auto [y0, x0] = origins[p];
      for (std::size_t y = y0; y < y0 + config.patch; ++y)
        for (std::size_t x = x0; x < x0 + config.patch; ++x) {
          sum[y * w + x] += drop;
          result.coverage[y * w + x] += 1.0f;
        }
    }
  }
  result.map.values = Tensor({h, w});
  for (std::size_t i = 0; i < h * w; ++i)
    if (result.coverage[i] > 0.0f)
      result.map.values[i] =
          static_cast<float>(sum[i] / static_cast<double>(result.coverage[i]));
  result.map.explainer = ExplainerKind::kOcclusion;
  result.map.target = target;
  return result;
}

OcclusionResult occlusion_explain(const Model& model, const Tensor& image,
                                  const OcclusionConfig& config) {
  return occlusion_explain(model_scorer(model), image, config);
}

RegionFraction region_relevance_fraction(const Tensor& map,
                                         const Tensor& mask) {
  if (map.size() != mask.size() || map.dim(map.rank() - 1) !=
                                       mask.dim(mask.rank() - 1))
    throw InputError("mask shape " + shape_string(mask.shape()) +
                     " does not match relevance map " +
                     shape_string(map.shape()));
  double inside = 0.0, total = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double r = std::abs(static_cast<double>(map[i]));
    total += r;
    if (mask[i] != 0.0f) inside += r;
  }
  if (total == 0.0) return {0.0, true};
  return {inside / total, false};
}

}  // namespace relstab

namespace relstab {

RelevanceMap explain(ExplainerKind kind, const Model& model,
                     const Tensor& image, int target,
                     const ExplainerSuite& suite) {
  switch (kind) {
    case ExplainerKind::kLrp: {
      LrpConfig c = suite.lrp;
      c.target = target;
      return lrp_explain(model, image, c);
    }
    case ExplainerKind::kLime: {
      LimeConfig c = suite.lime;
      c.target = target;
      return lime_explain(model, image, c).map;
    }
    case ExplainerKind::kOcclusion: {
      OcclusionConfig c = suite.occlusion;
      c.target = target;
      return occlusion_explain(model, image, c).map;
    }
  }
  throw InternalError("unknown explainer");
}

}  // namespace relstab
