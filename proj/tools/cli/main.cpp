#include "wnsf/io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

using namespace wnsf;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNumerical = 2 };

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_text_file(path, text);
}

StateSpaceModel load_model(const std::string& path) { return model_from_json(read_text_file(path)); }

// "auto" means no fixed structure.
std::optional<CanonicalStructure> parse_structure(const std::string& text, int n_u) {
  if (text.empty() || text == "auto") return std::nullopt;
  return CanonicalStructure::make(n_u, parse_int_list(text));
}

// Structure of a model file: explicit flag, then the stored Kronecker index, then the SISO observer form.
CanonicalStructure structure_for(const StateSpaceModel& m, const std::string& flag) {
  if (auto s = parse_structure(flag, m.n_u())) return *s;
  if (m.kronecker_index()) return CanonicalStructure::make(m.n_u(), *m.kronecker_index());
  if (m.n_y() == 1) return CanonicalStructure::make(m.n_u(), {m.n_x()});
  throw_invalid("structure", "multi-output model without a Kronecker index; pass --structure");
}

struct SimulateArgs {
  std::string model, experiment, out;
  std::uint64_t trial = 0;
};

int run_simulate(const SimulateArgs& a) {
  const auto model = load_model(a.model);
  const auto cfg = experiment_from_json(read_text_file(a.experiment));
  emit(a.out, dataset_to_csv(simulate(model, cfg, a.trial)));
  return kOk;
}

struct FitArgs {
  std::string data, structure = "auto", order_grid, out, report;
  int nx = 0;
  int order = 0;
  WnsfOptions options;
};

int run_fit(const FitArgs& a) {
  const auto data = dataset_from_csv(read_text_file(a.data));
  const auto structure = parse_structure(a.structure, data.n_u());
  FitResult fit = [&] {
    if (a.order > 0) return wnsf_fit(data, a.nx, a.order, structure, a.options);
    const auto grid = a.order_grid.empty() ? default_order_grid(a.nx, data.samples()) : parse_int_range(a.order_grid);
    return select_order(data, grid, a.nx, structure, a.options).fit;
  }();
  for (const auto& w : fit.report.warnings) std::cerr << "wnsf: warning: " << w << "\n";
  StateSpaceModel model = fit.model;
  model.set_kronecker_index(fit.structure.kronecker_index);
  emit(a.out, model_to_json(model));
  if (!a.report.empty()) emit(a.report, fit_report_to_json(fit));
  return kOk;
}

struct EvalArgs {
  std::string truth, estimate, data, out;
  int horizon = 200;
  double split = 0.7;
};

int run_eval(const EvalArgs& a) {
  const auto est = load_model(a.estimate);
  if (!a.truth.empty()) {
    const auto truth = load_model(a.truth);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double fit = truth.n_u() > 0 ? fit_impulse(truth, est, a.horizon) : nan;
    emit(a.out, fit_eval_to_json(fit, fit_impulse_noise(truth, est, a.horizon), a.horizon));
    return kOk;
  }
  const auto data = dataset_from_csv(read_text_file(a.data));
  if (data.n_u() != est.n_u() || data.n_y() != est.n_y())
    throw_invalid("eval", "dataset columns do not match the model dimensions");
  const auto pred = predict_one_step(est, data);
  emit(a.out, idval_to_json(id_val_errors(data.y(), pred.y_hat, a.split), a.split));
  return kOk;
}

struct MonteCarloArgs {
  std::string model, experiment, structure, grid_n, order_grid, coordinates = "auto", out;
  int trials = 200;
  int threads = 0;
  WnsfOptions options;
};

int run_montecarlo(const MonteCarloArgs& a) {
  MonteCarloConfig cfg;
  const auto model = load_model(a.model);
  cfg.structure = structure_for(model, a.structure);
  cfg.model = to_canonical(model, cfg.structure);
  cfg.experiment = experiment_from_json(read_text_file(a.experiment));
  cfg.trials = a.trials;
  for (int n : parse_int_list(a.grid_n)) cfg.sample_grid.push_back(n);
  if (!a.order_grid.empty()) cfg.order_grid = parse_int_range(a.order_grid);
  cfg.options = a.options;
  cfg.threads = a.threads;
  const bool armax_ok = model.n_y() == 1 && model.n_u() <= 1;
  if (a.coordinates == "armax" && !armax_ok) throw_invalid("montecarlo", "ARMAX coordinates need a SISO or output-only model");
  cfg.coordinates = a.coordinates == "canonical" || (a.coordinates == "auto" && !armax_ok) ? Coordinates::Canonical
                                                                                             : Coordinates::Armax;
  const auto result = run_monte_carlo(cfg);
  for (const auto& g : result.grid)
    if (g.failed > 0) std::cerr << "wnsf: N=" << g.samples << ": " << g.failed << " trials failed\n";
  emit(a.out, montecarlo_to_csv(result));
  return kOk;
}

struct CrlbArgs {
  std::string model, experiment, structure, out;
};

int run_crlb(const CrlbArgs& a) {
  const auto model = load_model(a.model);
  const auto structure = structure_for(model, a.structure);
  const auto cfg = experiment_from_json(read_text_file(a.experiment));
  const double s2 = cfg.sigma_e2.value_or(model.sigma_e2());
  const auto result = crlb(to_canonical(model, structure), structure, cfg);
  emit(a.out, crlb_to_json(result, s2));
  return result.singular ? kNumerical : kOk;
}

struct BaselineArgs {
  std::string data, out, report;
  int nx = 0, f = 0, p = 0, order = 0;
};

int run_baseline(const BaselineArgs& a) {
  const auto data = dataset_from_csv(read_text_file(a.data));
  const int p = a.p > 0 ? a.p : a.f;
  const int order = a.order > 0 ? a.order : a.f + p - 1;
  const auto markov = estimate_hoarx(data, order);
  const auto result = ho_kalman(markov, a.nx, a.f, p);
  for (const auto& w : result.warnings) std::cerr << "wnsf: warning: " << w << "\n";
  emit(a.out, model_to_json(result.model));
  if (!a.report.empty()) emit(a.report, baseline_report_to_json(result));
  return kOk;
}

struct RandsysArgs {
  int nx = 0, ny = 1, nu = 1;
  std::uint64_t seed = 0;
  std::string structure, out;
  RandomSystemConstraints constraints;
};

int run_randsys(const RandsysArgs& a) {
  if (a.structure.empty()) {
    emit(a.out, model_to_json(random_system(a.nx, a.nu, a.ny, a.seed, a.constraints)));
    return kOk;
  }
  const auto s = CanonicalStructure::make(a.nu, parse_int_list(a.structure));
  if (s.n_x != a.nx || s.n_y != a.ny) throw_invalid("randsys", "structure does not match --nx/--ny");
  auto m = random_canonical_system(s, a.seed, a.constraints);
  m.set_kronecker_index(s.kronecker_index);
  emit(a.out, model_to_json(m));
  return kOk;
}

void add_options(CLI::App* cmd, WnsfOptions& o) {
  o.ridge = -1.0;
  cmd->add_option("--a-iterations", o.a_iterations, "WLS passes for the a-rows")->check(CLI::PositiveNumber);
  cmd->add_option("--eta-iterations", o.eta_iterations, "WLS passes for eta")->check(CLI::PositiveNumber);
  cmd->add_option("--ridge", o.ridge, "HOARX ridge; negative adds a tiny ridge only if the Gram matrix is singular");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"State-space identification by weighted null-space fitting"};
  app.require_subcommand(1);
  std::function<int()> action;

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate a model under an experiment");
  c_sim->add_option("--model", sim.model, "model JSON")->required();
  c_sim->add_option("--experiment", sim.experiment, "experiment JSON")->required();
  c_sim->add_option("--trial", sim.trial, "trial index selecting the random streams");
  c_sim->add_option("--out", sim.out, "dataset CSV (default stdout)");
  c_sim->callback([&] { action = [&] { return run_simulate(sim); }; });

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Identify a model from data");
  c_fit->add_option("--data", fit.data, "dataset CSV")->required();
  c_fit->add_option("--nx", fit.nx, "model order")->required()->check(CLI::PositiveNumber);
  auto* o_order = c_fit->add_option("--order", fit.order, "HOARX order")->check(CLI::PositiveNumber);
  c_fit->add_option("--order-grid", fit.order_grid, "HOARX orders, start:step:stop or a list")->excludes(o_order);
  c_fit->add_option("--structure", fit.structure, "Kronecker index such as 1,3, or auto");
  c_fit->add_option("--out", fit.out, "model JSON (default stdout)");
  c_fit->add_option("--report", fit.report, "fit report JSON");
  add_options(c_fit, fit.options);
  c_fit->callback([&] { action = [&] { return run_fit(fit); }; });

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate an estimate against a true model or data");
  auto* o_true = c_eval->add_option("--true", ev.truth, "true model JSON (impulse-response FIT)");
  auto* o_data = c_eval->add_option("--data", ev.data, "dataset CSV (identification/validation errors)");
  o_true->excludes(o_data);
  c_eval->add_option("--est", ev.estimate, "estimated model JSON")->required();
  c_eval->add_option("--horizon", ev.horizon, "impulse response length")->check(CLI::PositiveNumber);
  c_eval->add_option("--split", ev.split, "identification fraction")->check(CLI::Range(0.0, 1.0));
  c_eval->add_option("--out", ev.out, "result JSON (default stdout)");
  c_eval->callback([&] {
    if (ev.truth.empty() && ev.data.empty()) throw CLI::RequiredError("--true or --data");
    action = [&] { return run_eval(ev); };
  });

  MonteCarloArgs mc;
  auto* c_mc = app.add_subcommand("montecarlo", "MSE versus CRLB over seeded trials");
  c_mc->add_option("--model", mc.model, "true model JSON")->required();
  c_mc->add_option("--experiment", mc.experiment, "experiment JSON")->required();
  c_mc->add_option("--trials", mc.trials, "trials per sample size")->check(CLI::Range(2, 1000000));
  c_mc->add_option("--grid-N", mc.grid_n, "sample sizes, comma separated")->required();
  c_mc->add_option("--grid-n", mc.order_grid, "HOARX order per sample size (default rule if absent)");
  c_mc->add_option("--structure", mc.structure, "Kronecker index of the parameterization");
  c_mc->add_option("--coordinates", mc.coordinates, "auto, canonical or armax")
      ->check(CLI::IsMember({"auto", "canonical", "armax"}));
  c_mc->add_option("--threads", mc.threads, "worker threads (default WNSF_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  c_mc->add_option("--out", mc.out, "tidy CSV (default stdout)");
  add_options(c_mc, mc.options);
  c_mc->callback([&] { action = [&] { return run_montecarlo(mc); }; });

  CrlbArgs cr;
  auto* c_crlb = app.add_subcommand("crlb", "Cramer-Rao bound for an experiment");
  c_crlb->add_option("--model", cr.model, "model JSON")->required();
  c_crlb->add_option("--experiment", cr.experiment, "experiment JSON")->required();
  c_crlb->add_option("--structure", cr.structure, "Kronecker index of the parameterization");
  c_crlb->add_option("--out", cr.out, "result JSON (default stdout)");
  c_crlb->callback([&] { action = [&] { return run_crlb(cr); }; });

  BaselineArgs bl;
  auto* c_bl = app.add_subcommand("baseline", "Ho-Kalman realization from HOARX Markov parameters");
  c_bl->add_option("--data", bl.data, "dataset CSV")->required();
  c_bl->add_option("--nx", bl.nx, "model order")->required()->check(CLI::PositiveNumber);
  c_bl->add_option("--f", bl.f, "future horizon")->required()->check(CLI::PositiveNumber);
  c_bl->add_option("--p", bl.p, "past horizon (default f)")->check(CLI::PositiveNumber);
  c_bl->add_option("--order", bl.order, "HOARX order (default f + p - 1)")->check(CLI::PositiveNumber);
  c_bl->add_option("--out", bl.out, "model JSON (default stdout)");
  c_bl->add_option("--report", bl.report, "realization report JSON");
  c_bl->callback([&] { action = [&] { return run_baseline(bl); }; });

  RandsysArgs rs;
  auto* c_rs = app.add_subcommand("randsys", "Draw a random stable system");
  c_rs->add_option("--nx", rs.nx, "states")->required()->check(CLI::PositiveNumber);
  c_rs->add_option("--ny", rs.ny, "outputs")->check(CLI::PositiveNumber);
  c_rs->add_option("--nu", rs.nu, "inputs")->check(CLI::NonNegativeNumber);
  c_rs->add_option("--seed", rs.seed, "random seed");
  c_rs->add_option("--structure", rs.structure, "return the model in this canonical form");
  c_rs->add_option("--max-pole", rs.constraints.max_pole, "pole magnitude cap");
  c_rs->add_option("--h2-min", rs.constraints.h2_min, "lower H2 bound of the input path");
  c_rs->add_option("--h2-max", rs.constraints.h2_max, "upper H2 bound of the input path");
  c_rs->add_option("--sigma-e2", rs.constraints.sigma_e2, "innovation variance")->check(CLI::NonNegativeNumber);
  c_rs->add_option("--out", rs.out, "model JSON (default stdout)");
  c_rs->callback([&] { action = [&] { return run_randsys(rs); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const auto used = app.get_subcommands();
    std::cerr << "wnsf: " << e.what() << "\n\n" << (used.empty() ? app.help() : used.front()->help());
    return kUsage;
  }
  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "wnsf: " << e.what() << "\n";
    return e.kind() == ErrorKind::Numerical ? kNumerical : kUsage;
  } catch (const std::exception& e) {
    std::cerr << "wnsf: " << e.what() << "\n";
    return kNumerical;
  }
}
