#pragma once

#include "wnsf/linalg.hpp"
#include "wnsf/model.hpp"

#include <vector>

namespace wnsf {

enum class ImpulsePath { Input, Noise };

/// Coefficients k = 1..horizon of C A^{k-1} B (input path) or C A^{k-1} K (noise path).
std::vector<Matrix> impulse_response(const StateSpaceModel& model, int horizon, ImpulsePath path = ImpulsePath::Input);

/// 100 (1 - |g - g_hat| / |g - mean(g)|) over all stacked entries.
double fit_percent(const std::vector<Matrix>& truth, const std::vector<Matrix>& estimate);

double fit_impulse(const StateSpaceModel& truth, const StateSpaceModel& estimate, int horizon);
double fit_impulse_noise(const StateSpaceModel& truth, const StateSpaceModel& estimate, int horizon);

struct IdValErrors {
  double identification = 0.0;
  double validation = 0.0;
  Index split_index = 0;  ///< first validation sample
};

/// sqrt(sum |y - y_hat|^2 / sum |y - mean(y)|^2) on the first floor(split N) samples and on the rest.
IdValErrors id_val_errors(const Matrix& y, const Matrix& y_hat, double split = 0.7);

struct MseRatio {
  Vector mse;    ///< sample mean of (theta_hat - theta)^2 per parameter
  Vector bound;  ///< sigma_e2 (M^{-1})_ii / N
  Vector ratio;
};

/// Estimates are one trial per row.
MseRatio mse_vs_crlb(const Matrix& estimates, const Vector& truth, const Matrix& M, double sigma_e2, Index samples);

/// Same with an already inverted, scaled covariance sigma_e2 M^{-1}.
MseRatio mse_vs_covariance(const Matrix& estimates, const Vector& truth, const Matrix& covariance, Index samples);

}  // namespace wnsf
