#pragma once

#include "wnsf/linalg.hpp"

#include <string>

namespace wnsf {

enum class LoopKind { Open, Closed };

/// Sampled input/output record. Rows are time samples.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Matrix u, Matrix y, LoopKind loop = LoopKind::Open, std::string controller = {});

  const Matrix& u() const { return u_; }
  const Matrix& y() const { return y_; }
  LoopKind loop() const { return loop_; }
  const std::string& controller() const { return controller_; }

  Index samples() const { return y_.rows(); }
  int n_u() const { return static_cast<int>(u_.cols()); }
  int n_y() const { return static_cast<int>(y_.cols()); }
  int n_z() const { return n_u() + n_y(); }

  /// z_k = [u_k; y_k] stacked as rows.
  Matrix z() const;

  /// Rows [first, first + count).
  Dataset slice(Index first, Index count) const;

 private:
  Matrix u_;
  Matrix y_;
  LoopKind loop_ = LoopKind::Open;
  std::string controller_;
};

}  // namespace wnsf
