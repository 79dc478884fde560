#include "wnsf/dataset.hpp"

namespace wnsf {

Dataset::Dataset(Matrix u, Matrix y, LoopKind loop, std::string controller)
    : u_(std::move(u)), y_(std::move(y)), loop_(loop), controller_(std::move(controller)) {
  if (u_.rows() != y_.rows()) throw_invalid("dataset", "u and y have different sample counts");
  if (y_.rows() == 0) throw_invalid("dataset", "dataset is empty");
  if (y_.cols() == 0) throw_invalid("dataset", "dataset has no outputs");
  if (!u_.allFinite() || !y_.allFinite()) throw_invalid("dataset", "non-finite samples");
}

Matrix Dataset::z() const {
  Matrix out(samples(), n_z());
  out << u_, y_;
  return out;
}

Dataset Dataset::slice(Index first, Index count) const {
  if (first < 0 || count <= 0 || first + count > samples()) throw_invalid("dataset", "slice out of range");
  return Dataset(u_.middleRows(first, count), y_.middleRows(first, count), loop_, controller_);
}

}  // namespace wnsf
