#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "relstab/model.hpp"
#include "relstab/network.hpp"
#include "relstab/tensor.hpp"

namespace relstab {

enum class ExplainerKind { kLrp, kLime, kOcclusion };

std::string explainer_name(ExplainerKind kind);
// "lrp", "lime", "occlusion"; throws ConfigError otherwise.
ExplainerKind parse_explainer(const std::string& name);

// Signed per-pixel relevance, [H,W] for image inputs.
struct RelevanceMap {
  Tensor values;
  ExplainerKind explainer = ExplainerKind::kLrp;
  int target = 0;
  std::size_t image_id = 0;
  std::uint64_t seed = 0;
};

// Batched scorer: [N, ...sample shape] -> logits [N,K]. Lets LIME and
// occlusion explain anything, not only the CNN.
using LogitFn = std::function<Tensor(const Tensor& batch)>;

LogitFn model_scorer(const Model& model);

// Class with the largest logit for a single [C,H,W] image (lowest index on
// ties).
int predicted_class(const LogitFn& scorer, const Tensor& image);

// ---------------------------------------------------------------------------
// Layer-wise relevance propagation, epsilon rule.

struct LrpConfig {
  double epsilon = 1e-6;
  std::optional<int> target;  // predicted class when empty
};

struct LrpResult {
  Tensor relevance;     // same shape as the input sample
  double total = 0.0;   // sum of input relevance
  double logit = 0.0;   // the decomposed target logit
  int target = 0;
};

// Works on any chain built from the five layer kinds. Relevance is
// propagated in double precision. A learned layer with pre-activation
// z_k = sum_j a_j w_jk + b_k passes R_j = a_j sum_k w_jk R_k / (z_k +
// eps * sign(z_k)) (sign(0) = +1; a zero denominator passes nothing); bias
// relevance is absorbed. ReLU and Flatten pass relevance through unchanged
// and max-pooling routes it to the recorded winner.
LrpResult lrp_relevance(const LayerChain& chain, const Params& params,
                        const Tensor& sample, const LrpConfig& config);

// Pixel map for a [C,H,W] image: channel relevances summed to [H,W].
RelevanceMap lrp_explain(const Model& model, const Tensor& image,
                         const LrpConfig& config);

// ---------------------------------------------------------------------------
// LIME with a fixed grid of square segments.

struct LimeConfig {
  std::size_t grid = 8;                 // g x g segments
  std::size_t n_samples = 1000;
  std::optional<double> kernel_width;   // default 0.25 * sqrt(g*g)
  double ridge = 1.0;
  float baseline = 0.0f;
  std::uint64_t seed = 0;
  std::optional<int> target;
  std::size_t batch = 64;               // model evaluations per call
};

struct LimeResult {
  RelevanceMap map;
  std::vector<double> segment_weights;  // row-major over the grid
  double intercept = 0.0;
};

// Perturbation sampling: each segment kept with probability 1/2; masked
// segments set to the baseline. The target-class softmax probability is
// regressed on the keep-mask with weights exp(-D^2 / width^2), D = fraction of
// segments removed. The surrogate penalty is ridge / n_samples against the
// weight-normalized squared error (see fit_weighted_ridge).
LimeResult lime_explain(const LogitFn& scorer, const Tensor& image,
                        const LimeConfig& config);
LimeResult lime_explain(const Model& model, const Tensor& image,
                        const LimeConfig& config);

// ---------------------------------------------------------------------------
// Occlusion sensitivity.

struct OcclusionConfig {
  std::size_t patch = 8;
  std::size_t stride = 4;
  float baseline = 0.0f;
  std::optional<int> target;
  std::size_t batch = 64;
};

struct OcclusionResult {
  RelevanceMap map;
  Tensor coverage;  // [H,W] number of patches covering each pixel
};

// Drop in the target logit when a patch is set to the baseline, averaged
// over the patches covering each pixel (uncovered pixels get 0). Patches
// start at 0, stride, 2*stride, ... while they fit in the image.
OcclusionResult occlusion_explain(const LogitFn& scorer, const Tensor& image,
                                  const OcclusionConfig& config);
OcclusionResult occlusion_explain(const Model& model, const Tensor& image,
                                  const OcclusionConfig& config);

// ---------------------------------------------------------------------------

struct RegionFraction {
  double fraction = 0.0;
  bool degenerate = false;  // total |R| was zero
};

// sum |R| inside mask / sum |R| overall. mask must have the map's spatial
// shape ([H,W] or [1,H,W]); nonzero entries count as inside.
RegionFraction region_relevance_fraction(const Tensor& map, const Tensor& mask);

}  // namespace relstab

namespace relstab {

// Per-explainer settings used wherever several explainers run side by side.
struct ExplainerSuite {
  LrpConfig lrp;
  LimeConfig lime;
  OcclusionConfig occlusion;
};

// Runs one explainer against a fixed target class.
RelevanceMap explain(ExplainerKind kind, const Model& model,
                     const Tensor& image, int target,
                     const ExplainerSuite& suite);

}  // namespace relstab
