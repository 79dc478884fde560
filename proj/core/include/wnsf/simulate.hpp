#pragma once

#include "wnsf/dataset.hpp"
#include "wnsf/linalg.hpp"
#include "wnsf/model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace wnsf {

/// SISO rational filter in q^{-1}: (num[0] + num[1] q^-1 + ...) / (den[0] + den[1] q^-1 + ...).
struct RationalFilter {
  std::vector<double> num{1.0};
  std::vector<double> den{1.0};
};

/// x+ = A x + B v, w = C x + D v.
struct StateSpaceFilter {
  Matrix A, B, C, D;
  int order() const { return static_cast<int>(A.rows()); }
};

/// Observer-form realization with direct feedthrough.
StateSpaceFilter realize(const RationalFilter& filter);

struct Tone {
  double frequency = 0.0;  ///< rad/sample
  double amplitude = 1.0;
  double phase = 0.0;
};

struct Excitation {
  enum class Kind { White, FilteredWhite, Multisine };
  Kind kind = Kind::White;
  double variance = 1.0;                  ///< driving white-noise variance (white, filtered)
  RationalFilter shaping;                 ///< filtered white: applied to every channel
  std::vector<std::vector<Tone>> tones;   ///< multisine: tones per input channel
  double dither_variance = 0.0;           ///< multisine: additive white dither
};

struct LoopConfig {
  enum class Kind { Open, StaticGain, Rational };
  Kind kind = Kind::Open;
  Matrix gain;            ///< n_u x n_y, u = r - gain * y
  RationalFilter filter;  ///< SISO, u = r - F(q) y
};

struct ExperimentConfig {
  Index samples = 1000;
  std::uint64_t seed = 0;
  std::optional<double> sigma_e2;  ///< overrides the model's innovation variance
  Excitation excitation;
  LoopConfig loop;
  Index burn_in = 0;
};

struct SimulationTrace {
  Dataset data;
  Matrix r;  ///< reference / excitation actually applied
  Matrix e;  ///< innovations
};

/// Deterministic core: runs the loop for given reference and innovation sequences.
SimulationTrace simulate_sequences(const StateSpaceModel& model, const Matrix& r, const Matrix& e,
                                   const LoopConfig& loop);

/// Draws r and e from the trial's RNG streams and runs the loop from zero state.
SimulationTrace simulate_trace(const StateSpaceModel& model, const ExperimentConfig& config,
                               std::uint64_t trial = 0);
Dataset simulate(const StateSpaceModel& model, const ExperimentConfig& config, std::uint64_t trial = 0);

/// Excitation only, samples x n_u.
Matrix generate_excitation(const Excitation& excitation, int n_u, Index samples, std::uint64_t seed,
                           std::uint64_t trial = 0);

struct RandomSystemConstraints {
  double max_pole = 0.97;
  double h2_min = 2.0;
  double h2_max = 4.0;
  int max_tries = 10000;
  double sigma_e2 = 1.0;
};

/// H2 norm of the input path C (qI - A)^{-1} B.
double h2_norm(const Matrix& A, const Matrix& B, const Matrix& C);

StateSpaceModel random_system(int n_x, int n_u, int n_y, std::uint64_t seed,
                              const RandomSystemConstraints& constraints = {});

/// Random system transformed to the given canonical form; redraws until the form is well conditioned.
StateSpaceModel random_canonical_system(const CanonicalStructure& structure, std::uint64_t seed,
                                        const RandomSystemConstraints& constraints = {});

}  // namespace wnsf
