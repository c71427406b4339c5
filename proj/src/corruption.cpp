#include "relstab/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relstab/errors.hpp"
#include "relstab/keyvalue.hpp"
#include "relstab/rng.hpp"

namespace relstab {

std::string noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kGaussian: return "gaussian";
    case NoiseKind::kRician: return "rician";
    case NoiseKind::kChiSquared: return "chisq";
  }
  return "?";
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "gaussian") return NoiseKind::kGaussian;
  if (name == "rician") return NoiseKind::kRician;
  if (name == "chisq" || name == "chi2" || name == "chisquared")
    return NoiseKind::kChiSquared;
  throw ConfigError("unknown noise kind '" + name + "'");
}

double image_variance(const Tensor& image) {
  if (image.empty()) throw InputError("variance of an empty image");
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (float v : image.values()) {
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }
  return m2 / static_cast<double>(n);
}

double noise_sigma(const Tensor& image, double lambda) {
  if (!(lambda >= 0.0)) throw InputError("lambda must be >= 0");
  return std::sqrt(lambda * image_variance(image));
}

namespace {

float clip01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

Tensor clipped_copy(const Tensor& image) {
  Tensor out = image;
  for (float& v : out.values()) v = clip01(v);
  return out;
}

// Per-pixel draws shared by the corruptors and sample_noise.
double gaussian_draw(Rng& rng, double sigma) { return sigma * rng.normal(); }

double chisq_draw(Rng& rng, double sigma) {
  // Var(s * chi2_k) = 2k s^2 = sigma^2.
  const double scale = sigma / std::sqrt(2.0 * kChiSquaredDof);
  double sum = 0.0;
  for (int i = 0; i < kChiSquaredDof; ++i) {
    const double z = rng.normal();
    sum += z * z;
  }
  return scale * sum;
}

double rician_magnitude(Rng& rng, double x, double sigma) {
  const double real = x + sigma * rng.normal();
  const double imag = sigma * rng.normal();
  return std::sqrt(real * real + imag * imag);
}

void check_sigma(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw InputError("noise sigma must be finite and >= 0");
}

}  // namespace

Tensor gaussian_corrupt_sigma(const Tensor& image, double sigma,
                              std::uint64_t seed) {
  check_sigma(sigma);
  if (sigma == 0.0) return clipped_copy(image);
  Rng rng(seed);
  Tensor out = image;
  for (float& v : out.values()) v = clip01(v + gaussian_draw(rng, sigma));
  return out;
}

Tensor rician_corrupt_sigma(const Tensor& image, double sigma,
                            std::uint64_t seed) {
  check_sigma(sigma);
  for (float v : image.values())
    if (v < 0.0f)
      throw InputError("Rician corruption needs a nonnegative magnitude image");
  if (sigma == 0.0) return clipped_copy(image);
  Rng rng(seed);
  Tensor out = image;
  for (float& v : out.values()) v = clip01(rician_magnitude(rng, v, sigma));
  return out;
}

Tensor chisq_corrupt_sigma(const Tensor& image, double sigma,
                           std::uint64_t seed) {
  check_sigma(sigma);
  if (sigma == 0.0) return clipped_copy(image);
  Rng rng(seed);
  Tensor out = image;
  for (float& v : out.values()) v = clip01(v + chisq_draw(rng, sigma));
  return out;
}

Tensor gaussian_corrupt(const Tensor& image, const NoiseParams& params) {
  return gaussian_corrupt_sigma(image, noise_sigma(image, params.lambda),
                                params.seed);
}
Tensor rician_corrupt(const Tensor& image, const NoiseParams& params) {
  return rician_corrupt_sigma(image, noise_sigma(image, params.lambda),
                              params.seed);
}
Tensor chisq_corrupt(const Tensor& image, const NoiseParams& params) {
  return chisq_corrupt_sigma(image, noise_sigma(image, params.lambda),
                             params.seed);
}

Tensor corrupt_image(const Tensor& image, const NoiseParams& params) {
  switch (params.kind) {
    case NoiseKind::kGaussian: return gaussian_corrupt(image, params);
    case NoiseKind::kRician: return rician_corrupt(image, params);
    case NoiseKind::kChiSquared: return chisq_corrupt(image, params);
  }
  throw InternalError("unknown noise kind");
}

std::vector<double> sample_noise(NoiseKind kind, double sigma, std::size_t n,
                                 std::uint64_t seed) {
  check_sigma(sigma);
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& v : out) {
    switch (kind) {
      case NoiseKind::kGaussian: v = gaussian_draw(rng, sigma); break;
      case NoiseKind::kRician: v = rician_magnitude(rng, 0.0, sigma); break;
      case NoiseKind::kChiSquared: v = chisq_draw(rng, sigma); break;
    }
  }
  return out;
}

std::vector<std::uint8_t> default_glyph() {
  static const char* const kRows[12] = {
      "..##....##..",  //
      ".####..####.",  //
      ".##########.",  //
      "..########..",  //
      ".##..##..##.",  //
      ".#.##..##.#.",  //
      ".#.##..##.#.",  //
      ".##..##..##.",  //
      "..###..###..",  //
      "...######...",  //
      "....####....",  //
      "............",  //
  };
  std::vector<std::uint8_t> g;
  for (const char* row : kRows)
    for (int c = 0; c < 12; ++c) g.push_back(row[c] == '#' ? 1 : 0);
  return g;
}

StampSpec StampSpec::default_spec() {
  StampSpec s;
  s.glyph = default_glyph();
  return s;
}

namespace {

struct Placement {
  std::size_t row, col;
};

Placement stamp_placement(const Shape& shape, int label, const StampSpec& spec) {
  if (shape.size() != 3 || shape[0] != 1)
    throw InputError("stamping expects a [1,H,W] image, got " +
                     shape_string(shape));
  if (spec.glyph.size() != spec.glyph_rows * spec.glyph_cols ||
      spec.glyph_rows == 0 || spec.glyph_cols == 0)
    throw ConfigError("glyph bitmap size does not match its dimensions");
  const std::size_t h = shape[1], w = shape[2];
  if (spec.glyph_rows + spec.margin > h || spec.glyph_cols + spec.margin > w)
    throw ConfigError("glyph " + std::to_string(spec.glyph_rows) + "x" +
                      std::to_string(spec.glyph_cols) + " with margin " +
                      std::to_string(spec.margin) + " does not fit a " +
                      std::to_string(h) + "x" + std::to_string(w) + " image");
  if (label < 0 || static_cast<std::size_t>(label) >= spec.corner_for_class.size())
    throw InputError("no stamp corner configured for class " +
                     std::to_string(label));
  const Corner corner = spec.corner_for_class[static_cast<std::size_t>(label)];
  const std::size_t col = corner == Corner::kTopLeft
                              ? spec.margin
                              : w - spec.margin - spec.glyph_cols;
  return {spec.margin, col};
}

}  // namespace

Tensor didactic_stamp(const Tensor& image, int label, const StampSpec& spec) {
  const Placement at = stamp_placement(image.shape(), label, spec);
  const std::size_t w = image.dim(2);
  Tensor out = image;
  for (std::size_t r = 0; r < spec.glyph_rows; ++r)
    for (std::size_t c = 0; c < spec.glyph_cols; ++c)
      if (spec.glyph[r * spec.glyph_cols + c])
        out[(at.row + r) * w + at.col + c] = spec.intensity;
  return out;
}

Tensor stamp_footprint(const Shape& image_shape, int label,
                       const StampSpec& spec) {
  const Placement at = stamp_placement(image_shape, label, spec);
  Tensor mask(image_shape);
  const std::size_t w = image_shape[2];
  for (std::size_t r = 0; r < spec.glyph_rows; ++r)
    for (std::size_t c = 0; c < spec.glyph_cols; ++c)
      mask[(at.row + r) * w + at.col + c] = 1.0f;
  return mask;
}

std::string CorruptionPlan::kind_name() const {
  if (const auto* noise = std::get_if<NoiseParams>(&corruptor))
    return noise_kind_name(noise->kind);
  return "didactic";
}

double CorruptionPlan::lambda() const {
  if (const auto* noise = std::get_if<NoiseParams>(&corruptor))
    return noise->lambda;
  return 0.0;
}

std::size_t corrupted_count(double fraction, std::size_t n) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw InputError("corruption fraction must lie in [0,1]");
  // std::llround rounds halves away from zero.
  return static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n)));
}

std::vector<std::size_t> select_corrupted(std::size_t n, double fraction,
                                          std::uint64_t master_seed) {
  const std::size_t take = corrupted_count(fraction, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(master_seed);
  for (std::size_t j = n; j-- > 1;)
    std::swap(order[j], order[rng.below(j + 1)]);
  order.resize(take);
  std::sort(order.begin(), order.end());
  return order;
}

CorruptionResult corrupt_corpus(const Dataset& dataset,
                                const CorruptionPlan& plan) {
  dataset.validate();
  CorruptionResult result;
  result.dataset = dataset;
  result.corrupted =
      select_corrupted(dataset.size(), plan.fraction, plan.master_seed);
  for (std::size_t i : result.corrupted) {
    Tensor& img = result.dataset.images[i];
    if (const auto* noise = std::get_if<NoiseParams>(&plan.corruptor)) {
      NoiseParams per_image = *noise;
      per_image.seed = plan.master_seed ^ static_cast<std::uint64_t>(i);
      img = corrupt_image(img, per_image);
    } else {
      img = didactic_stamp(img, dataset.labels[i],
                           std::get<StampSpec>(plan.corruptor));
    }
  }
  return result;
}

std::string corruption_manifest(const CorruptionResult& result,
                                const CorruptionPlan& plan) {
  std::vector<bool> hit(result.dataset.size(), false);
  for (std::size_t i : result.corrupted) hit[i] = true;
  std::string out = "index,corrupted,kind,lambda,seed\n";
  const std::string kind = plan.kind_name();
  const std::string lambda = format_number(plan.lambda());
  for (std::size_t i = 0; i < hit.size(); ++i)
    out += std::to_string(i) + "," + (hit[i] ? "1" : "0") + "," + kind + "," +
           lambda + "," +
           std::to_string(plan.master_seed ^ static_cast<std::uint64_t>(i)) +
           "\n";
  return out;
}

}  // namespace relstab
