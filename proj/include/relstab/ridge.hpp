#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace relstab {

struct RidgeFit {
  std::vector<double> coef;
  double intercept = 0.0;
};

// Minimizes sum_i w~_i (y_i - b - x_i . beta)^2 + alpha * |beta|^2 with
// w~ = w / sum(w) and an unpenalized intercept b. design is n x d row-major.
// Normalizing the weights makes the fit invariant to replicating the sample
// set. Solved through the centered normal equations with a Cholesky
// factorization; throws InternalError if the system is not positive definite
// (possible only for alpha == 0 with rank-deficient data).
RidgeFit fit_weighted_ridge(std::span<const double> design, std::size_t d,
                            std::span<const double> y,
                            std::span<const double> w, double alpha);

// In-place Cholesky solve of the symmetric positive definite system A x = b
// (A is n x n row-major and is overwritten). Returns false if A is not
// positive definite.
bool cholesky_solve(std::vector<double>& a, std::vector<double>& b,
                    std::size_t n);

}  // namespace relstab
