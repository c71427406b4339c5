#include "relstab/ridge.hpp"

#include <cmath>

#include "relstab/errors.hpp"

namespace relstab {

bool cholesky_solve(std::vector<double>& a, std::vector<double>& b,
                    std::size_t n) {
  // A = L L^T, L stored in the lower triangle.
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
    if (!(diag > 0.0)) return false;
    const double ljj = std::sqrt(diag);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = v / ljj;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= a[i * n + k] * b[k];
    b[i] = v / a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double v = b[i];
    for (std::size_t k = i + 1; k < n; ++k) v -= a[k * n + i] * b[k];
    b[i] = v / a[i * n + i];
  }
  return true;
}

RidgeFit fit_weighted_ridge(std::span<const double> design, std::size_t d,
                            std::span<const double> y,
                            std::span<const double> w, double alpha) {
  const std::size_t n = y.size();
  if (d == 0 || n == 0 || design.size() != n * d || w.size() != n)
    throw InputError("ridge: design, response and weight sizes disagree");
  if (!(alpha >= 0.0)) throw InputError("ridge: alpha must be >= 0");
  double wsum = 0.0;
  for (double wi : w) {
    if (!(wi >= 0.0)) throw InputError("ridge: weights must be >= 0");
    wsum += wi;
  }
  if (!(wsum > 0.0)) throw InputError("ridge: weights sum to zero");

  std::vector<double> xmean(d, 0.0);
  double ymean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w[i] / wsum;
    ymean += wi * y[i];
    for (std::size_t j = 0; j < d; ++j) xmean[j] += wi * design[i * d + j];
  }

  std::vector<double> a(d * d, 0.0), rhs(d, 0.0), xc(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w[i] / wsum;
    if (wi == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) xc[j] = design[i * d + j] - xmean[j];
    const double yc = y[i] - ymean;
    for (std::size_t j = 0; j < d; ++j) {
      const double wx = wi * xc[j];
      rhs[j] += wx * yc;
      for (std::size_t k = 0; k <= j; ++k) a[j * d + k] += wx * xc[k];
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    a[j * d + j] += alpha;
    for (std::size_t k = 0; k < j; ++k) a[k * d + j] = a[j * d + k];
  }
  if (!cholesky_solve(a, rhs, d))
    throw InternalError("ridge: normal matrix is not positive definite");

  RidgeFit fit;
  fit.coef = std::move(rhs);
  fit.intercept = ymean;
  for (std::size_t j = 0; j < d; ++j) fit.intercept -= fit.coef[j] * xmean[j];
  return fit;
}

}  // namespace relstab
