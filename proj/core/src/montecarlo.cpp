#include "wnsf/montecarlo.hpp"

#include "wnsf/crlb.hpp"
#include "wnsf/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace wnsf {

int default_mc_order(int n_x, Index samples) {
  const int rule = static_cast<int>(std::lround(10.0 * std::log(static_cast<double>(samples)))) - 20;
  const int cap = static_cast<int>(samples / 10);
  return std::min(std::max(2 * n_x + 1, rule), std::max(cap, n_x + 1));
}

int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("WNSF_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> g(failure_lock);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

Vector flatten_rows(const std::vector<RowVector>& a, const RowVector& eta) {
  ParameterVector p{a, eta};
  return p.flatten();
}

}  // namespace

MonteCarloResult run_monte_carlo(const MonteCarloConfig& cfg) {
  if (cfg.trials < 2) throw_invalid("montecarlo", "need at least two trials");
  if (cfg.sample_grid.empty()) throw_invalid("montecarlo", "empty sample grid");
  if (!cfg.order_grid.empty() && cfg.order_grid.size() != cfg.sample_grid.size())
    throw_invalid("montecarlo", "order grid must match the sample grid");
  const CanonicalStructure& s = cfg.structure;
  const bool armax = cfg.coordinates == Coordinates::Armax;
  if (armax && (s.n_y != 1 || s.n_u > 1)) throw_invalid("montecarlo", "ARMAX coordinates need a SISO model");

  MonteCarloResult out;
  const Vector theta = extract_parameters(cfg.model, s).flatten();
  const CrlbResult bound = crlb(cfg.model, s, cfg.experiment);
  if (bound.singular) throw_numerical("montecarlo", "the CRLB information matrix is singular");
  Matrix t = Matrix::Identity(theta.size(), theta.size());
  if (armax) {
    t = canonical_to_armax_jacobian(s.n_x, s.n_u);
    for (int i = 0; i < s.n_x; ++i) out.names.push_back("f" + std::to_string(i + 1));
    for (int i = 0; i < s.n_x && s.n_u == 1; ++i) out.names.push_back("l" + std::to_string(i + 1));
    for (int i = 0; i < s.n_x; ++i) out.names.push_back("a" + std::to_string(i + 1));
  } else {
    out.names = s.parameter_names();
  }
  out.truth = t * theta;
  out.covariance = t * bound.covariance * t.transpose();
  const int workers = worker_count(cfg.threads);

  for (std::size_t gi = 0; gi < cfg.sample_grid.size(); ++gi) {
    const Index n_samples = cfg.sample_grid[gi];
    const int order = cfg.order_grid.empty() ? default_mc_order(s.n_x, n_samples) : cfg.order_grid[gi];
    ExperimentConfig exp = cfg.experiment;
    exp.samples = n_samples;

    std::vector<std::optional<Vector>> wls(cfg.trials), ols(cfg.trials);
    std::vector<std::string> errors(cfg.trials);
    parallel_for(cfg.trials, workers, [&](int trial) {
      try {
        const Dataset data = simulate(cfg.model, exp, static_cast<std::uint64_t>(trial));
        const FitResult fit = wnsf_fit(data, s.n_x, order, s, cfg.options);
        wls[trial] = t * fit.params.flatten();
        ols[trial] = t * flatten_rows(fit.a_ols, fit.eta_ols);
      } catch (const Error& e) {
        errors[trial] = "trial " + std::to_string(trial) + ": [" + e.step() + "] " + e.what();
      }
    });

    GridResult g;
    g.samples = n_samples;
    g.order = order;
    for (int i = 0; i < cfg.trials; ++i) {
      if (wls[i])
        ++g.succeeded;
      else
        g.errors.push_back(errors[i]);
    }
    g.failed = cfg.trials - g.succeeded;
    g.wls.resize(g.succeeded, out.truth.size());
    g.ols.resize(g.succeeded, out.truth.size());
    for (int i = 0, r = 0; i < cfg.trials; ++i) {
      if (!wls[i]) continue;
      g.wls.row(r) = wls[i]->transpose();
      g.ols.row(r) = ols[i]->transpose();
      ++r;
    }
    if (g.succeeded >= 2) {
      const MseRatio mw = mse_vs_covariance(g.wls, out.truth, out.covariance, n_samples);
      const MseRatio mo = mse_vs_covariance(g.ols, out.truth, out.covariance, n_samples);
      g.mse_wls = mw.mse;
      g.mse_ols = mo.mse;
      g.bound = mw.bound;
      g.ratio_wls = mw.ratio;
      g.ratio_ols = mo.ratio;
    }
    out.grid.push_back(std::move(g));
  }
  return out;
}

}  // namespace wnsf
