#pragma once

#include "wnsf/hoarx.hpp"
#include "wnsf/linalg.hpp"
#include "wnsf/model.hpp"

#include <string>
#include <vector>

namespace wnsf {

struct HoKalmanResult {
  StateSpaceModel model;  ///< not checked for predictor stability
  Vector singular_values;
  bool ambiguous_order = false;  ///< sigma_{n_x} / sigma_{n_x+1} < 1.5
  bool predictor_stable = false;
  std::vector<std::string> warnings;
};

/// SVD realization from the f x p block Hankel matrix of the Markov parameters.
/// Needs f + p - 1 <= order. Empty weightings mean identity.
HoKalmanResult ho_kalman(const MarkovEstimate& markov, int n_x, int f, int p, const Matrix& W1 = Matrix(),
                         const Matrix& W2 = Matrix());

/// f = p = (order + 1) / 2.
HoKalmanResult ho_kalman(const MarkovEstimate& markov, int n_x);

}  // namespace wnsf
