#include "wnsf/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace wnsf {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& message) {
  throw_invalid("io", "field '" + field + "': " + message);
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw_invalid("io", "malformed " + what + " JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) field_error(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) field_error(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

double as_number(const json& j, const std::string& field) {
  if (!j.is_number()) field_error(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) field_error(field, "not finite");
  return v;
}

std::int64_t as_integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) field_error(field, "expected an integer");
  return j.get<std::int64_t>();
}

std::vector<double> as_vector(const json& j, const std::string& field) {
  if (!j.is_array()) field_error(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

/// Rows of numbers. An empty array gives `rows_hint` x 0.
Matrix as_matrix(const json& j, const std::string& field, Index rows_hint = 0) {
  if (!j.is_array()) field_error(field, "expected an array of rows");
  if (j.empty()) return Matrix(rows_hint, 0);
  const Index rows = static_cast<Index>(j.size());
  Index cols = -1;
  Matrix m;
  for (Index r = 0; r < rows; ++r) {
    const std::string rf = field + "[" + std::to_string(r) + "]";
    const std::vector<double> row = as_vector(j[r], rf);
    if (cols < 0) {
      cols = static_cast<Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Index>(row.size()) != cols) {
      field_error(rf, "row length " + std::to_string(row.size()) + " differs from " + std::to_string(cols));
    }
    for (Index c = 0; c < cols; ++c) m(r, c) = row[c];
  }
  return m;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json filter_json(const RationalFilter& f) { return json{{"num", f.num}, {"den", f.den}}; }

RationalFilter filter_from(const json& j, const std::string& field) {
  RationalFilter f;
  f.num = as_vector(require(j, "num", field), field + ".num");
  f.den = as_vector(require(j, "den", field), field + ".den");
  if (f.num.empty() || f.den.empty()) field_error(field, "num and den must be nonempty");
  if (f.den[0] == 0.0) field_error(field + ".den[0]", "leading coefficient must be nonzero");
  return f;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_invalid("io", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_invalid("io", "cannot write '" + path + "'");
  out << text;
  if (!out) throw_invalid("io", "write to '" + path + "' failed");
}

StateSpaceModel model_from_json(const std::string& text) {
  const json j = parse_json(text, "model");
  const Matrix a = as_matrix(require(j, "A", ""), "A");
  const Matrix b = as_matrix(require(j, "B", ""), "B", a.rows());
  const Matrix c = as_matrix(require(j, "C", ""), "C");
  const Matrix k = as_matrix(require(j, "K", ""), "K");
  const double s2 = j.contains("sigma_e2") ? as_number(j["sigma_e2"], "sigma_e2") : 1.0;
  if (s2 < 0.0) field_error("sigma_e2", "must be non-negative");
  StateSpaceModel m = [&] {
    try {
      return StateSpaceModel(a, b, c, k, s2);
    } catch (const Error& e) {
      field_error("model", e.what());
    }
  }();
  if (j.contains("canonical") && !j["canonical"].is_null()) {
    const json& can = j["canonical"];
    const json& idx = require(can, "kronecker_index", "canonical");
    std::vector<int> nu;
    if (!idx.is_array()) field_error("canonical.kronecker_index", "expected an array");
    for (std::size_t i = 0; i < idx.size(); ++i)
      nu.push_back(static_cast<int>(as_integer(idx[i], "canonical.kronecker_index[" + std::to_string(i) + "]")));
    m.set_kronecker_index(nu);
  }
  return m;
}

std::string model_to_json(const StateSpaceModel& m) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["A"] = matrix_json(m.A());
  j["B"] = matrix_json(m.B());
  j["C"] = matrix_json(m.C());
  j["K"] = matrix_json(m.K());
  j["sigma_e2"] = m.sigma_e2();
  if (m.kronecker_index()) j["canonical"] = json{{"kronecker_index", *m.kronecker_index()}};
  return j.dump(2) + "\n";
}

ExperimentConfig experiment_from_json(const std::string& text) {
  const json j = parse_json(text, "experiment");
  if (!j.is_object()) field_error("", "expected an object");
  ExperimentConfig cfg;
  cfg.samples = as_integer(require(j, "samples", ""), "samples");
  if (cfg.samples <= 0) field_error("samples", "must be positive");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) field_error("seed", "expected an integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("sigma_e2") && !j["sigma_e2"].is_null()) {
    cfg.sigma_e2 = as_number(j["sigma_e2"], "sigma_e2");
    if (*cfg.sigma_e2 < 0.0) field_error("sigma_e2", "must be non-negative");
  }
  if (j.contains("burn_in")) {
    cfg.burn_in = as_integer(j["burn_in"], "burn_in");
    if (cfg.burn_in < 0) field_error("burn_in", "must be non-negative");
  }
  if (j.contains("excitation")) {
    const json& e = j["excitation"];
    const json& kind = require(e, "kind", "excitation");
    if (!kind.is_string()) field_error("excitation.kind", "expected a string");
    const std::string k = kind.get<std::string>();
    if (e.contains("variance")) cfg.excitation.variance = as_number(e["variance"], "excitation.variance");
    if (cfg.excitation.variance < 0.0) field_error("excitation.variance", "must be non-negative");
    if (k == "white") {
      cfg.excitation.kind = Excitation::Kind::White;
    } else if (k == "filtered_white") {
      cfg.excitation.kind = Excitation::Kind::FilteredWhite;
      cfg.excitation.shaping = filter_from(require(e, "shaping", "excitation"), "excitation.shaping");
    } else if (k == "multisine") {
      cfg.excitation.kind = Excitation::Kind::Multisine;
      const json& tones = require(e, "tones", "excitation");
      if (!tones.is_array()) field_error("excitation.tones", "expected one array of tones per input");
      for (std::size_t c = 0; c < tones.size(); ++c) {
        const std::string cf = "excitation.tones[" + std::to_string(c) + "]";
        if (!tones[c].is_array()) field_error(cf, "expected an array of tones");
        std::vector<Tone> channel;
        for (std::size_t t = 0; t < tones[c].size(); ++t) {
          const std::string tf = cf + "[" + std::to_string(t) + "]";
          const json& tj = tones[c][t];
          Tone tone;
          tone.frequency = as_number(require(tj, "frequency", tf), tf + ".frequency");
          if (tj.contains("amplitude")) tone.amplitude = as_number(tj["amplitude"], tf + ".amplitude");
          if (tj.contains("phase")) tone.phase = as_number(tj["phase"], tf + ".phase");
          channel.push_back(tone);
        }
        cfg.excitation.tones.push_back(std::move(channel));
      }
      if (e.contains("dither_variance"))
        cfg.excitation.dither_variance = as_number(e["dither_variance"], "excitation.dither_variance");
      if (cfg.excitation.dither_variance < 0.0) field_error("excitation.dither_variance", "must be non-negative");
    } else {
      field_error("excitation.kind", "unknown kind '" + k + "' (white, filtered_white, multisine)");
    }
  }
  if (j.contains("loop")) {
    const json& l = j["loop"];
    const json& kind = require(l, "kind", "loop");
    if (!kind.is_string()) field_error("loop.kind", "expected a string");
    const std::string k = kind.get<std::string>();
    if (k == "open") {
      cfg.loop.kind = LoopConfig::Kind::Open;
    } else if (k == "static") {
      cfg.loop.kind = LoopConfig::Kind::StaticGain;
      cfg.loop.gain = as_matrix(require(l, "gain", "loop"), "loop.gain");
    } else if (k == "rational") {
      cfg.loop.kind = LoopConfig::Kind::Rational;
      cfg.loop.filter = filter_from(l, "loop");
    } else {
      field_error("loop.kind", "unknown kind '" + k + "' (open, static, rational)");
    }
  }
  return cfg;
}

std::string experiment_to_json(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["samples"] = cfg.samples;
  j["seed"] = cfg.seed;
  if (cfg.sigma_e2) j["sigma_e2"] = *cfg.sigma_e2;
  j["burn_in"] = cfg.burn_in;
  json e;
  e["variance"] = cfg.excitation.variance;
  switch (cfg.excitation.kind) {
    case Excitation::Kind::White:
      e["kind"] = "white";
      break;
    case Excitation::Kind::FilteredWhite:
      e["kind"] = "filtered_white";
      e["shaping"] = filter_json(cfg.excitation.shaping);
      break;
    case Excitation::Kind::Multisine: {
      e["kind"] = "multisine";
      json tones = json::array();
      for (const auto& ch : cfg.excitation.tones) {
        json c = json::array();
        for (const Tone& t : ch) c.push_back(json{{"frequency", t.frequency}, {"amplitude", t.amplitude}, {"phase", t.phase}});
        tones.push_back(c);
      }
      e["tones"] = tones;
      e["dither_variance"] = cfg.excitation.dither_variance;
      break;
    }
  }
  j["excitation"] = e;
  switch (cfg.loop.kind) {
    case LoopConfig::Kind::Open:
      j["loop"] = json{{"kind", "open"}};
      break;
    case LoopConfig::Kind::StaticGain:
      j["loop"] = json{{"kind", "static"}, {"gain", matrix_json(cfg.loop.gain)}};
      break;
    case LoopConfig::Kind::Rational:
      j["loop"] = json{{"kind", "rational"}, {"num", cfg.loop.filter.num}, {"den", cfg.loop.filter.den}};
      break;
  }
  return j.dump(2) + "\n";
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

[[noreturn]] void csv_error(std::size_t line, std::size_t field, const std::string& message) {
  throw_invalid("io", "line " + std::to_string(line) + ", field " + std::to_string(field) + ": " + message);
}

}  // namespace

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_fields(line);
    break;
  }
  if (header.empty()) throw_invalid("io", "dataset CSV has no header");
  int nu = 0, ny = 0;
  for (std::size_t f = 0; f < header.size(); ++f) {
    const std::string& h = header[f];
    const bool is_u = !h.empty() && h[0] == 'u';
    const bool is_y = !h.empty() && h[0] == 'y';
    const int expected = is_u ? nu + 1 : ny + 1;
    if ((!is_u && !is_y) || h.substr(1) != std::to_string(expected))
      csv_error(line_no, f + 1, "expected header u1..u{n_u}, y1..y{n_y}, got '" + h + "'");
    if (is_u && ny > 0) csv_error(line_no, f + 1, "input columns must precede output columns");
    (is_u ? nu : ny) += 1;
  }
  if (ny == 0) csv_error(line_no, 1, "need at least one output column");

  std::vector<double> values;
  Index rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      csv_error(line_no, std::min(fields.size(), header.size()) + 1,
                "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    for (std::size_t f = 0; f < fields.size(); ++f) {
      const std::string& s = fields[f];
      double v = 0.0;
      const char* begin = s.data();
      const char* end = s.data() + s.size();
      if (!s.empty() && *begin == '+') ++begin;
      auto [ptr, ec] = std::from_chars(begin, end, v);
      if (s.empty() || ec != std::errc() || ptr != end) csv_error(line_no, f + 1, "not a number: '" + s + "'");
      if (!std::isfinite(v)) csv_error(line_no, f + 1, "not finite");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw_invalid("io", "dataset CSV has no samples");
  const Index cols = static_cast<Index>(header.size());
  Matrix all = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), rows, cols);
  return Dataset(all.leftCols(nu), all.rightCols(ny));
}

std::string dataset_to_csv(const Dataset& data) {
  std::ostringstream os;
  os.precision(17);
  for (int i = 0; i < data.n_u(); ++i) os << 'u' << i + 1 << ',';
  for (int i = 0; i < data.n_y(); ++i) os << 'y' << i + 1 << (i + 1 < data.n_y() ? "," : "\n");
  for (Index k = 0; k < data.samples(); ++k) {
    for (int i = 0; i < data.n_u(); ++i) os << data.u()(k, i) << ',';
    for (int i = 0; i < data.n_y(); ++i) os << data.y()(k, i) << (i + 1 < data.n_y() ? "," : "\n");
  }
  return os.str();
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json report_json(const FitReport& r) {
  json j;
  j["structure"] = r.structure;
  j["order"] = r.order;
  j["samples"] = r.samples;
  j["effective_samples"] = r.effective_samples;
  j["sigma_e2_hat"] = finite_or_null(r.sigma_e2_hat);
  j["gram_min_eigenvalue"] = finite_or_null(r.gram_min_eigenvalue);
  j["plus_condition"] = finite_or_null(r.plus_condition);
  j["admissibility"] = json{{"admissible", r.admissible},
                            {"condition", finite_or_null(r.admissibility_condition)},
                            {"residual", finite_or_null(r.admissibility_residual)}};
  j["residuals"] = json{{"ols_a", finite_or_null(r.ols_a_residual)},
                        {"wls_a", finite_or_null(r.wls_a_residual)},
                        {"ols_eta", finite_or_null(r.ols_eta_residual)},
                        {"wls_eta", finite_or_null(r.wls_eta_residual)}};
  j["predictor"] = json{{"spectral_radius", finite_or_null(r.predictor_radius)}, {"stable", r.predictor_stable}};
  j["prediction_error"] = r.prediction_error ? finite_or_null(*r.prediction_error) : json(nullptr);
  j["iterations"] = json{{"a", r.a_iterations}, {"eta", r.eta_iterations}};
  j["warnings"] = r.warnings;
  json cands = json::array();
  for (const auto& c : r.candidates) {
    json cj{{"structure", c.structure}, {"order", c.order}, {"ok", c.ok}};
    cj["score"] = c.ok ? finite_or_null(c.score) : json(nullptr);
    if (!c.error.empty()) cj["error"] = c.error;
    cands.push_back(cj);
  }
  j["candidates"] = cands;
  return j;
}

}  // namespace

std::string fit_report_to_json(const FitResult& fit) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["report"] = report_json(fit.report);
  j["kronecker_index"] = fit.structure.kronecker_index;
  j["parameters"] = json{{"names", fit.structure.parameter_names()}, {"values", vector_json(fit.params.flatten())}};
  return j.dump(2) + "\n";
}

std::string crlb_to_json(const CrlbResult& r, double sigma_e2) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["names"] = r.names;
  j["sigma_e2"] = sigma_e2;
  j["M"] = matrix_json(r.M);
  j["singular"] = r.singular;
  j["min_eigenvalue"] = r.min_eigenvalue;
  j["covariance"] = r.singular ? json(nullptr) : matrix_json(r.covariance);
  return j.dump(2) + "\n";
}

std::string baseline_report_to_json(const HoKalmanResult& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["singular_values"] = vector_json(r.singular_values);
  j["ambiguous_order"] = r.ambiguous_order;
  j["predictor_stable"] = r.predictor_stable;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

std::string fit_eval_to_json(double fit_input, double fit_noise, int horizon) {
  json j{{"schema_version", kSchemaVersion}, {"horizon", horizon}, {"fit", finite_or_null(fit_input)},
         {"fit_noise", finite_or_null(fit_noise)}};
  return j.dump(2) + "\n";
}

std::string idval_to_json(const IdValErrors& e, double split) {
  json j{{"schema_version", kSchemaVersion}, {"split", split}, {"split_index", e.split_index},
         {"e_identification", e.identification}, {"e_validation", e.validation}};
  return j.dump(2) + "\n";
}

std::string montecarlo_to_csv(const MonteCarloResult& r) {
  std::ostringstream os;
  os.precision(10);
  os << "# schema_version=" << kSchemaVersion << "\n";
  os << "N,order,parameter,truth,crlb,mse_wls,mse_ols,ratio_wls,ratio_ols,trials,failed\n";
  for (const GridResult& g : r.grid) {
    for (std::size_t i = 0; i < r.names.size(); ++i) {
      os << g.samples << ',' << g.order << ',' << r.names[i] << ',' << r.truth(i) << ',';
      if (g.succeeded >= 2)
        os << g.bound(i) << ',' << g.mse_wls(i) << ',' << g.mse_ols(i) << ',' << g.ratio_wls(i) << ','
           << g.ratio_ols(i);
      else
        os << r.covariance(i, i) / static_cast<double>(g.samples) << ",,,,";
      os << ',' << g.succeeded << ',' << g.failed << '\n';
    }
  }
  return os.str();
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const std::string& f : split_fields(text)) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
      throw_invalid("io", "not an integer list: '" + text + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<int> parse_int_range(const std::string& text) {
  if (text.find(':') == std::string::npos) return parse_int_list(text);
  std::string t = text;
  for (char& c : t)
    if (c == ':') c = ',';
  const std::vector<int> p = parse_int_list(t);
  if (p.size() != 3 || p[1] <= 0 || p[2] < p[0]) throw_invalid("io", "range must be start:step:stop, got '" + text + "'");
  std::vector<int> out;
  for (int v = p[0]; v <= p[2]; v += p[1]) out.push_back(v);
  return out;
}

}  // namespace wnsf
