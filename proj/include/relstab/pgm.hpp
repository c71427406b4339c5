#pragma once

#include <filesystem>

#include "relstab/tensor.hpp"

namespace relstab {

// Binary 16-bit P5 PGM with maxval 65535; samples are big-endian as the
// format requires. Values are stored as round(x * 65535) after clamping to
// [0,1]. Accepts [H,W] or [1,H,W] tensors.
void save_pgm(const std::filesystem::path& path, const Tensor& image);

// Returns a [1,H,W] tensor in [0,1]. Throws FormatError with kBadMagic,
// kMalformedHeader, kUnsupportedDepth or kTruncated.
Tensor load_pgm(const std::filesystem::path& path);

// Raw 16-bit samples without the float conversion.
struct Pgm16 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint16_t> samples;
};
Pgm16 read_pgm16(const std::filesystem::path& path);
void write_pgm16(const std::filesystem::path& path, const Pgm16& image);

}  // namespace relstab
