#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "relstab/tensor.hpp"

namespace relstab {

// Sidecar for a rescaled map: the affine range plus provenance.
struct MapSidecar {
  double min = 0.0;
  double max = 0.0;
  std::string explainer;
  int target = 0;
  std::uint64_t seed = 0;
};

// Writes <base>.pgm (values rescaled affinely onto [0,65535]) and <base>.csv
// (header min,max,explainer,target,seed). A constant map is stored as all
// zeros with min == max. sidecar.min/max are filled from the data.
void save_scaled_map(const std::filesystem::path& base, const Tensor& values,
                     MapSidecar sidecar);

struct ScaledMap {
  Tensor values;  // [H,W], de-rescaled
  MapSidecar sidecar;
};

// Inverse of save_scaled_map up to the 16-bit quantization step
// (max - min) / 65535.
ScaledMap load_scaled_map(const std::filesystem::path& base);

}  // namespace relstab
