#pragma once

// Independent SSIM evaluation shared by the unit and acceptance tests.

#include <cmath>
#include <vector>

#include "relstab/rng.hpp"
#include "relstab/tensor.hpp"

namespace ssim_oracle {

using relstab::Rng;
using relstab::Tensor;

// Random [H,W] map already spanning exactly [0,1], so min-max normalization
// leaves it unchanged and the oracle below can skip it.
inline Tensor unit_map(Rng& rng, std::size_t h, std::size_t w) {
  Tensor t({h, w});
  for (float& v : t.values()) v = static_cast<float>(0.05 + 0.9 * rng.uniform());
  t[h * w - 1] = 0.0f;
  t[h * w - 2] = 1.0f;
  return t;
}

// Windowed SSIM written out directly: Gaussian weights, weighted moments and
// the three comparison terms, one window at a time.
inline std::vector<double> windows(const Tensor& a, const Tensor& b, std::size_t win,
                                    double sigma) {
  const std::size_t h = a.dim(0), w = a.dim(1);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03, c3 = c2 / 2;
  std::vector<double> g(win * win);
  double gs = 0.0;
  for (std::size_t y = 0; y < win; ++y)
    for (std::size_t x = 0; x < win; ++x) {
      const double dy = y - (win - 1) / 2.0, dx = x - (win - 1) / 2.0;
      g[y * win + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      gs += g[y * win + x];
    }
  for (double& v : g) v /= gs;

  std::vector<double> out;
  for (std::size_t r = 0; r + win <= h; ++r)
    for (std::size_t c = 0; c + win <= w; ++c) {
      double mx = 0, my = 0;
      for (std::size_t y = 0; y < win; ++y)
        for (std::size_t x = 0; x < win; ++x) {
          mx += g[y * win + x] * a.at(r + y, c + x);
          my += g[y * win + x] * b.at(r + y, c + x);
        }
      double vx = 0, vy = 0, cxy = 0;
      for (std::size_t y = 0; y < win; ++y)
        for (std::size_t x = 0; x < win; ++x) {
          const double dx = a.at(r + y, c + x) - mx, dy = b.at(r + y, c + x) - my;
          vx += g[y * win + x] * dx * dx;
          vy += g[y * win + x] * dy * dy;
          cxy += g[y * win + x] * dx * dy;
        }
      const double sx = std::sqrt(vx), sy = std::sqrt(vy);
      out.push_back((2 * mx * my + c1) / (mx * mx + my * my + c1) *
                    (2 * sx * sy + c2) / (vx + vy + c2) * (cxy + c3) / (sx * sy + c3));
    }
  return out;
}

}  // namespace ssim_oracle
