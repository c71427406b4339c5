#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "relstab/tensor.hpp"

namespace relstab {

// Labelled image corpus. images and masks are [1,H,W]; masks mark the brain
// region (1 inside the ellipse) and may be empty for corpora read without
// them. Labels: 0 = typically-developing analog, 1 = ADHD analog.
struct Dataset {
  std::vector<Tensor> images;
  std::vector<int> labels;
  std::vector<std::size_t> ids;
  std::vector<Tensor> masks;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  bool has_masks() const { return !masks.empty(); }

  // Throws InputError unless lengths agree and labels are in {0,1}.
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

// Two-class synthetic stand-in for axial brain slices: an ellipse of base
// intensity plus a small disk whose horizontal position depends on the class,
// with per-image position jitter and Gaussian pixel noise.
struct SyntheticSpec {
  std::size_t side = 64;
  std::array<std::size_t, 2> class_counts{500, 500};
  double center_y = 31.5;
  double center_x = 31.5;
  double semi_y = 26.0;
  double semi_x = 21.0;
  double base_intensity = 0.6;
  double base_jitter = 0.05;    // per-image uniform offset of the base level
  double blob_offset_x = 5.0;   // class 0 at -offset, class 1 at +offset
  double blob_offset_y = 2.0;
  double blob_radius = 5.0;
  double blob_delta = 0.15;
  double blob_jitter = 5.2;     // per-image uniform shift in both axes, px
  double noise_sigma = 0.02;
  std::uint64_t seed = 1;

  // Throws ConfigError for non-positive sizes, out-of-range intensities, or a
  // blob that can leave the ellipse.
  void validate() const;
  // key=value lines, one per field, fixed order.
  std::string to_text() const;
  static SyntheticSpec from_text(const std::string& text);
};

// Image i (class-major order) is generated from seed ^ i.
Dataset generate_dataset(const SyntheticSpec& spec);

struct Split {
  Dataset train;
  Dataset val;
};

// Stratified by class: each class contributes round(ratio * count) items to
// train after a seeded shuffle; the rest go to val. Both parts keep the
// original corpus order.
Split split_train_val(const Dataset& dataset, double ratio,
                      std::uint64_t seed);

// images/NNNN.pgm, masks/NNNN.pgm, labels.csv (id,label), spec.txt.
void save_corpus(const std::filesystem::path& dir, const Dataset& dataset,
                 const SyntheticSpec& spec);
Dataset load_corpus(const std::filesystem::path& dir);

std::string corpus_image_name(std::size_t id);

}  // namespace relstab
