#pragma once

#include "wnsf/baseline.hpp"
#include "wnsf/crlb.hpp"
#include "wnsf/dataset.hpp"
#include "wnsf/metrics.hpp"
#include "wnsf/model.hpp"
#include "wnsf/montecarlo.hpp"
#include "wnsf/pipeline.hpp"
#include "wnsf/simulate.hpp"

#include <string>

namespace wnsf {

/// Version stamped into every JSON document and CSV header comment.
inline constexpr int kSchemaVersion = 1;

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// {"A", "B", "C", "K", "sigma_e2", "canonical": {"kronecker_index"}}; B may have zero columns.
StateSpaceModel model_from_json(const std::string& text);
std::string model_to_json(const StateSpaceModel& model);

ExperimentConfig experiment_from_json(const std::string& text);
std::string experiment_to_json(const ExperimentConfig& config);

/// Header u1..u{n_u}, y1..y{n_y}; lines starting with '#' are comments.
Dataset dataset_from_csv(const std::string& text);
std::string dataset_to_csv(const Dataset& data);

std::string fit_report_to_json(const FitResult& fit);
std::string crlb_to_json(const CrlbResult& result, double sigma_e2);
std::string baseline_report_to_json(const HoKalmanResult& result);
std::string fit_eval_to_json(double fit_input, double fit_noise, int horizon);
std::string idval_to_json(const IdValErrors& errors, double split);

/// Tidy table: N, order, parameter, truth, crlb, mse_wls, mse_ols, ratio_wls, ratio_ols, trials, failed.
std::string montecarlo_to_csv(const MonteCarloResult& result);

/// Parses "1,3" into {1, 3}; throws on anything else.
std::vector<int> parse_int_list(const std::string& text);
/// "40:10:150" (start:step:stop, inclusive) or a comma list.
std::vector<int> parse_int_range(const std::string& text);

}  // namespace wnsf
