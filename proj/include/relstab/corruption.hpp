#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "relstab/datagen.hpp"
#include "relstab/tensor.hpp"

namespace relstab {

enum class NoiseKind { kGaussian, kRician, kChiSquared };

std::string noise_kind_name(NoiseKind kind);
// Accepts "gaussian", "rician", "chisq" (also "chi2", "chisquared").
NoiseKind parse_noise_kind(const std::string& name);

// Noise scaled to a fraction lambda of the image's intensity variance:
// sigma^2 = lambda * Var(X).
struct NoiseParams {
  NoiseKind kind = NoiseKind::kRician;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

// Degrees of freedom of the chi-squared noise.
inline constexpr int kChiSquaredDof = 2;

// Population variance of all pixel intensities (single-pass Welford).
double image_variance(const Tensor& image);

// Per-pixel noise standard deviation for the given lambda.
double noise_sigma(const Tensor& image, double lambda);

// Each corruptor is a deterministic function of (image, params) and clips
// its output to [0,1]. The *_sigma variants take the noise scale directly.
Tensor gaussian_corrupt(const Tensor& image, const NoiseParams& params);
Tensor rician_corrupt(const Tensor& image, const NoiseParams& params);
Tensor chisq_corrupt(const Tensor& image, const NoiseParams& params);
Tensor corrupt_image(const Tensor& image, const NoiseParams& params);

Tensor gaussian_corrupt_sigma(const Tensor& image, double sigma,
                              std::uint64_t seed);
Tensor rician_corrupt_sigma(const Tensor& image, double sigma,
                            std::uint64_t seed);
Tensor chisq_corrupt_sigma(const Tensor& image, double sigma,
                           std::uint64_t seed);

// Pre-clip additive noise exactly as the corruptors draw it (for Rician, the
// magnitude perturbation |X + n| - X at X = 0, i.e. the Rayleigh magnitude).
// Uses the same generator stream as the *_sigma corruptors for a given seed.
std::vector<double> sample_noise(NoiseKind kind, double sigma, std::size_t n,
                                 std::uint64_t seed);

enum class Corner { kTopLeft, kTopRight };

// Class-conditional corner stamp. corner_for_class[c] is the corner used for
// label c.
struct StampSpec {
  std::size_t glyph_rows = 12;
  std::size_t glyph_cols = 12;
  std::vector<std::uint8_t> glyph;  // row-major, 1 = stamped pixel
  std::size_t margin = 2;
  std::vector<Corner> corner_for_class{Corner::kTopLeft, Corner::kTopRight};
  float intensity = 1.0f;

  static StampSpec default_spec();
};

// Built-in 12x12 bitmap (a small animal face).
std::vector<std::uint8_t> default_glyph();

// Overwrites the glyph's set pixels at the label's corner; every other pixel
// is copied unchanged. Throws ConfigError if the glyph plus margin does not
// fit, InputError if the label has no corner.
Tensor didactic_stamp(const Tensor& image, int label, const StampSpec& spec);

// [1,H,W] mask of the glyph's bounding box at the label's corner.
Tensor stamp_footprint(const Shape& image_shape, int label,
                       const StampSpec& spec);

struct CorruptionPlan {
  double fraction = 0.0;
  std::variant<NoiseParams, StampSpec> corruptor;
  std::uint64_t master_seed = 0;

  bool is_didactic() const {
    return std::holds_alternative<StampSpec>(corruptor);
  }
  std::string kind_name() const;
  double lambda() const;
};

// round(p * n) with halves rounded away from zero.
std::size_t corrupted_count(double fraction, std::size_t n);

// The round(p*N) indices chosen by a master-seeded shuffle, ascending.
std::vector<std::size_t> select_corrupted(std::size_t n, double fraction,
                                          std::uint64_t master_seed);

struct CorruptionResult {
  Dataset dataset;
  std::vector<std::size_t> corrupted;  // ascending positions in the dataset
};

// Applies the plan's corruptor to the selected images with per-image seed
// master_seed ^ position. Labels, ids, masks and ordering are untouched.
CorruptionResult corrupt_corpus(const Dataset& dataset,
                                const CorruptionPlan& plan);

// CSV: index,corrupted,kind,lambda,seed; one row per image.
std::string corruption_manifest(const CorruptionResult& result,
                                const CorruptionPlan& plan);

}  // namespace relstab
