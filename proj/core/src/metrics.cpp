#include "wnsf/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace wnsf {

std::vector<Matrix> impulse_response(const StateSpaceModel& model, int horizon, ImpulsePath path) {
  if (horizon < 1) throw_invalid("metrics", "horizon must be at least 1");
  std::vector<Matrix> out;
  out.reserve(horizon);
  Matrix x = path == ImpulsePath::Input ? model.B() : model.K();
  for (int k = 0; k < horizon; ++k) {
    out.push_back(model.C() * x);
    x = model.A() * x;
  }
  return out;
}

double fit_percent(const std::vector<Matrix>& truth, const std::vector<Matrix>& estimate) {
  if (truth.size() != estimate.size() || truth.empty()) throw_invalid("metrics", "impulse responses differ in length");
  double sum = 0.0;
  Index count = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (truth[k].rows() != estimate[k].rows() || truth[k].cols() != estimate[k].cols())
      throw_invalid("metrics", "impulse responses differ in shape");
    sum += truth[k].sum();
    count += truth[k].size();
  }
  if (count == 0) throw_invalid("metrics", "empty impulse response");
  const double mean = sum / static_cast<double>(count);
  double err = 0.0, dev = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    err += (truth[k] - estimate[k]).squaredNorm();
    dev += (truth[k].array() - mean).square().sum();
  }
  if (!(dev > 0.0)) throw_invalid("metrics", "true impulse response is constant; FIT is undefined");
  return 100.0 * (1.0 - std::sqrt(err / dev));
}

double fit_impulse(const StateSpaceModel& truth, const StateSpaceModel& estimate, int horizon) {
  return fit_percent(impulse_response(truth, horizon), impulse_response(estimate, horizon));
}

double fit_impulse_noise(const StateSpaceModel& truth, const StateSpaceModel& estimate, int horizon) {
  return fit_percent(impulse_response(truth, horizon, ImpulsePath::Noise),
                     impulse_response(estimate, horizon, ImpulsePath::Noise));
}

namespace {

double segment_error(const Matrix& y, const Matrix& y_hat) {
  const RowVector mean = y.colwise().mean();
  const double dev = (y.rowwise() - mean).squaredNorm();
  if (!(dev > 0.0)) throw_invalid("metrics", "segment output is constant; the normalized error is undefined");
  return std::sqrt((y - y_hat).squaredNorm() / dev);
}

}  // namespace

IdValErrors id_val_errors(const Matrix& y, const Matrix& y_hat, double split) {
  if (!(split > 0.0 && split < 1.0)) throw_invalid("metrics", "split must lie in (0, 1)");
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols()) throw_invalid("metrics", "outputs differ in shape");
  const Index n = y.rows();
  const Index ni = static_cast<Index>(std::floor(split * static_cast<double>(n) + 1e-9));
  if (ni < 1 || ni >= n) throw_invalid("metrics", "split leaves an empty segment");
  IdValErrors out;
  out.split_index = ni;
  out.identification = segment_error(y.topRows(ni), y_hat.topRows(ni));
  out.validation = segment_error(y.bottomRows(n - ni), y_hat.bottomRows(n - ni));
  return out;
}

MseRatio mse_vs_covariance(const Matrix& estimates, const Vector& truth, const Matrix& covariance, Index samples) {
  if (estimates.rows() < 2) throw_invalid("metrics", "need at least two trials");
  if (estimates.cols() != truth.size() || covariance.rows() != truth.size() || covariance.cols() != truth.size())
    throw_invalid("metrics", "parameter dimensions differ");
  if (samples < 1) throw_invalid("metrics", "sample count must be positive");
  MseRatio out;
  out.mse = (estimates.rowwise() - truth.transpose()).array().square().colwise().mean().transpose();
  out.bound = covariance.diagonal() / static_cast<double>(samples);
  out.ratio = out.mse.cwiseQuotient(out.bound);
  return out;
}

MseRatio mse_vs_crlb(const Matrix& estimates, const Vector& truth, const Matrix& M, double sigma_e2, Index samples) {
  if (M.rows() != M.cols()) throw_invalid("metrics", "M must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()));
  const double lmax = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (!(lmax > 0.0) || eig.eigenvalues()(0) <= 1e-12 * lmax) throw_numerical("metrics", "M is singular");
  const Matrix cov = sigma_e2 * eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                     eig.eigenvectors().transpose();
  return mse_vs_covariance(estimates, truth, cov, samples);
}

}  // namespace wnsf
