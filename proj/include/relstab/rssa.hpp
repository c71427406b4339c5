#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "relstab/corruption.hpp"
#include "relstab/datagen.hpp"
#include "relstab/explainers.hpp"
#include "relstab/model.hpp"
#include "relstab/tensor.hpp"

namespace relstab {

struct SsimConstants {
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;

  double c1() const { return (k1 * range) * (k1 * range); }
  double c2() const { return (k2 * range) * (k2 * range); }
  double c3() const { return c2() / 2.0; }
};

enum class WindowMode {
  kGaussian,    // sliding Gaussian windows over every valid position
  kWholeImage,  // one window spanning the image, uniform weights
};

struct RssaOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  WindowMode mode = WindowMode::kGaussian;
  SsimConstants constants;
  bool normalize = true;  // min-max rescale both maps first
};

// size x size Gaussian weights, row-major, summing to 1.
std::vector<double> gaussian_window(std::size_t size, double sigma);

struct NormalizedMap {
  Tensor values;
  bool degenerate = false;  // constant input, mapped to 0.5 everywhere
};

// (R - min) / (max - min); constant maps become 0.5 everywhere.
NormalizedMap normalize_map(const Tensor& map);

// Weighted first and second moments of a pair of equally sized patches.
struct PatchMoments {
  double mean_x = 0, mean_y = 0, var_x = 0, var_y = 0, cov = 0;
};
PatchMoments patch_moments(std::span<const double> x, std::span<const double> y,
                           std::span<const double> weights);

struct SsimTerms {
  double luminance = 1, contrast = 1, structure = 1;
  double product() const { return luminance * contrast * structure; }
};

SsimTerms ssim_terms(const PatchMoments& m, const SsimConstants& k);

// Per-window l*c*s laid out spatially: (H - window + 1) x (W - window + 1)
// for Gaussian windows, 1 x 1 for the whole-image mode.
struct RssaMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  double mean = 0.0;
  bool degenerate = false;  // either input map was constant
};

// Maps are [H,W] or [1,H,W] and must have equal shapes. Throws InputError on
// a shape mismatch or an image smaller than the window.
RssaMap rssa_map(const Tensor& a, const Tensor& b, const RssaOptions& options = {});
double rssa_global(const Tensor& a, const Tensor& b,
                   const RssaOptions& options = {});

struct NoiseGrid {
  std::vector<NoiseKind> kinds;
  std::vector<double> lambdas;
  std::uint64_t seed = 0;
};

// rows = noise kinds, cols = lambdas; entry = mean RSSA between the relevance
// map of each clean evaluation image and that of its corrupted counterpart,
// both explaining the same class (by default the one predicted for the clean
// image).
struct RssaMatrix {
  ExplainerKind explainer = ExplainerKind::kLrp;
  std::vector<std::string> row_names;
  std::vector<double> lambdas;
  std::vector<double> values;  // row-major

  double at(std::size_t row, std::size_t col) const {
    return values[row * lambdas.size() + col];
  }
  // Header "kind,<lambda>,..." then one row per noise kind.
  std::string to_csv() const;
};

// Which class the clean and corrupted maps both explain.
enum class TargetRule { kPredicted, kLabel };

// Corrupted image i uses seed grid.seed ^ id(i).
RssaMatrix rssa_matrix(ExplainerKind explainer, const Model& model,
                       const Dataset& eval_set, const NoiseGrid& grid,
                       const ExplainerSuite& suite,
                       const RssaOptions& options = {},
                       TargetRule rule = TargetRule::kPredicted);

}  // namespace relstab
