#pragma once

// File formats of the skf tool: JSON run configuration, per-step CSV,
// summary and manifest JSON.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "skf/experiments.hpp"

namespace skf::io {

using nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kCsvSchema = "skf-trials/1";

/// Bad configuration input (maps to the usage exit code).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- JSON conversion of vectors and matrices ------------------------------

inline ordered_json to_json(const Vector& v) {
  ordered_json j = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

inline ordered_json to_json(const Matrix& m) {
  ordered_json j = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) j.push_back(to_json(Vector(m.row(i).transpose())));
  return j;
}

inline ordered_json to_json(const std::vector<double>& v) {
  ordered_json j = ordered_json::array();
  for (double x : v) j.push_back(std::isfinite(x) ? ordered_json(x) : ordered_json(nullptr));
  return j;
}

inline double number(const ordered_json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("config: '" + key + "' must be a number");
  return j.get<double>();
}

inline int integer(const ordered_json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError("config: '" + key + "' must be an integer");
  return j.get<int>();
}

inline Vector vector_from(const ordered_json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError("config: '" + key + "' must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], key);
  return v;
}

/// Rows of numbers; a bare number is read as a 1x1 matrix.
inline Matrix matrix_from(const ordered_json& j, const std::string& key) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError("config: '" + key + "' must be a matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 0);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError("config: '" + key + "' rows must be arrays of equal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number(row[static_cast<std::size_t>(c)], key);
  }
  return m;
}

// --- configuration --------------------------------------------------------

inline ordered_json config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["which"] = to_string(cfg.which);
  j["steps"] = cfg.steps;
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["eta"] = cfg.eta;
  j["x0"] = to_json(cfg.x0);
  j["c0"] = to_json(cfg.c0);
  j["s0"] = to_json(cfg.s0);
  j["process_noise_cov"] = to_json(cfg.process_noise_cov);
  j["ubb_process_shape"] = to_json(cfg.ubb_process_shape);
  j["meas_noise_cov"] = to_json(cfg.meas_noise_cov);
  j["ubb_meas_shape"] = to_json(cfg.ubb_meas_shape);
  if (cfg.which == ExampleId::example2) {
    j["station1"] = to_json(cfg.station1);
    j["station2"] = to_json(cfg.station2);
    j["dt"] = cfg.dt;
    j["initial_heading"] = cfg.initial_heading;
    ordered_json segs = ordered_json::array();
    for (const auto& s : cfg.trajectory) {
      segs.push_back({{"steps", s.steps}, {"accel", s.accel}, {"turn_rate", s.turn_rate}});
    }
    j["trajectory"] = segs;
    j["crossing_halfwidth"] = cfg.crossing_halfwidth;
  }
  j["filter"] = {{"t_lo", cfg.filter.t_lo},
                 {"t_hi", cfg.filter.t_hi},
                 {"beta_tol", cfg.filter.beta_tol},
                 {"max_iters", cfg.filter.max_iters},
                 {"cov_floor", cfg.filter.cov_floor}};
  return j;
}

/// Overrides fields of cfg with those present in j. A manifest is accepted
/// too, in which case its "config" member is used. Unknown keys are errors.
inline void apply_config(ExperimentConfig& cfg, const ordered_json& input) {
  const ordered_json& j = input.contains("config") && input["config"].is_object() ? input["config"] : input;
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "which") {
      if (!value.is_string() || value.get<std::string>() != to_string(cfg.which)) {
        throw ConfigError("config: 'which' does not match the subcommand");
      }
    } else if (key == "steps") {
      cfg.steps = integer(value, key);
    } else if (key == "trials") {
      cfg.trials = integer(value, key);
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) throw ConfigError("config: 'seed' must be a non-negative integer");
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "eta") {
      cfg.eta = number(value, key);
    } else if (key == "x0") {
      cfg.x0 = vector_from(value, key);
    } else if (key == "c0") {
      cfg.c0 = matrix_from(value, key);
    } else if (key == "s0") {
      cfg.s0 = matrix_from(value, key);
    } else if (key == "process_noise_cov") {
      cfg.process_noise_cov = matrix_from(value, key);
    } else if (key == "ubb_process_shape") {
      cfg.ubb_process_shape = matrix_from(value, key);
    } else if (key == "meas_noise_cov") {
      cfg.meas_noise_cov = matrix_from(value, key);
    } else if (key == "ubb_meas_shape") {
      cfg.ubb_meas_shape = matrix_from(value, key);
    } else if (key == "station1") {
      cfg.station1 = vector_from(value, key);
    } else if (key == "station2") {
      cfg.station2 = vector_from(value, key);
    } else if (key == "dt") {
      cfg.dt = number(value, key);
    } else if (key == "initial_heading") {
      cfg.initial_heading = number(value, key);
    } else if (key == "crossing_halfwidth") {
      cfg.crossing_halfwidth = number(value, key);
    } else if (key == "trajectory") {
      if (!value.is_array()) throw ConfigError("config: 'trajectory' must be an array");
      cfg.trajectory.clear();
      for (const auto& s : value) {
        if (!s.is_object()) throw ConfigError("config: trajectory segments must be objects");
        TrajectorySegment seg;
        for (const auto& [k, v] : s.items()) {
          if (k == "steps") seg.steps = integer(v, "trajectory.steps");
          else if (k == "accel") seg.accel = number(v, "trajectory.accel");
          else if (k == "turn_rate") seg.turn_rate = number(v, "trajectory.turn_rate");
          else throw ConfigError("config: unknown trajectory key '" + k + "'");
        }
        cfg.trajectory.push_back(seg);
      }
    } else if (key == "filter") {
      if (!value.is_object()) throw ConfigError("config: 'filter' must be an object");
      for (const auto& [k, v] : value.items()) {
        if (k == "t_lo") cfg.filter.t_lo = number(v, "filter.t_lo");
        else if (k == "t_hi") cfg.filter.t_hi = number(v, "filter.t_hi");
        else if (k == "beta_tol") cfg.filter.beta_tol = number(v, "filter.beta_tol");
        else if (k == "max_iters") cfg.filter.max_iters = integer(v, "filter.max_iters");
        else if (k == "cov_floor") cfg.filter.cov_floor = number(v, "filter.cov_floor");
        else throw ConfigError("config: unknown filter key '" + k + "'");
      }
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
}

inline ordered_json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

// --- trials.csv -----------------------------------------------------------

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::vector<std::string> csv_header(const ExperimentConfig& cfg) {
  const auto n = cfg.x0.size();
  const auto m = cfg.meas_noise_cov.rows();
  std::vector<std::string> h{"trial", "k"};
  for (Eigen::Index i = 0; i < n; ++i) h.push_back("x_true_" + std::to_string(i));
  for (Eigen::Index i = 0; i < m; ++i) h.push_back("y_" + std::to_string(i));
  for (Eigen::Index i = 0; i < n; ++i) h.push_back("skf_center_" + std::to_string(i));
  for (Eigen::Index i = 0; i < n; ++i) h.push_back("ekf_state_" + std::to_string(i));
  h.insert(h.end(), {"beta_star", "skf_dist", "ekf_dist"});
  return h;
}

inline void write_csv(std::ostream& out, const ExperimentConfig& cfg,
                      const std::vector<Trial>& trials) {
  const auto header = csv_header(cfg);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (std::size_t t = 0; t < trials.size(); ++t) {
    for (const auto& r : trials[t]) {
      out << t << ',' << r.k;
      for (Eigen::Index i = 0; i < r.true_state.size(); ++i) out << ',' << fmt(r.true_state(i));
      for (Eigen::Index i = 0; i < r.measurement.size(); ++i) out << ',' << fmt(r.measurement(i));
      for (Eigen::Index i = 0; i < r.skf_center.size(); ++i) out << ',' << fmt(r.skf_center(i));
      for (Eigen::Index i = 0; i < r.ekf_state.size(); ++i) out << ',' << fmt(r.ekf_state(i));
      out << ',' << fmt(r.beta_star) << ',' << fmt(r.skf_dist) << ',' << fmt(r.ekf_dist) << '\n';
    }
  }
}

// --- summary.json ---------------------------------------------------------

inline ordered_json crossing_json(const Summary& s) {
  std::vector<double> ratios, angles;
  ordered_json per_trial = ordered_json::array();
  int found = 0;
  for (const auto& c : s.crossings) {
    per_trial.push_back({{"window_begin", c.window_begin},
                         {"window_end", c.window_end},
                         {"peak_step", c.peak_step},
                         {"peak_semi_axis", c.peak_semi_axis},
                         {"median_semi_axis", c.median_semi_axis},
                         {"ratio", std::isfinite(c.ratio) ? ordered_json(c.ratio) : ordered_json(nullptr)},
                         {"angle_to_normal_deg", std::isfinite(c.angle_to_normal_deg)
                                                     ? ordered_json(c.angle_to_normal_deg)
                                                     : ordered_json(nullptr)}});
    if (c.peak_step >= 0) {
      ++found;
      ratios.push_back(c.ratio);
      angles.push_back(c.angle_to_normal_deg);
    }
  }
  ordered_json j;
  j["trials_with_crossing"] = found;
  if (!ratios.empty()) {
    j["semi_axis_ratio_min"] = *std::min_element(ratios.begin(), ratios.end());
    j["semi_axis_ratio_median"] = median(ratios);
    j["angle_to_normal_deg_max"] = *std::max_element(angles.begin(), angles.end());
    j["angle_to_normal_deg_median"] = median(angles);
  }
  j["per_trial"] = per_trial;
  return j;
}

inline ordered_json summary_to_json(const ExperimentConfig& cfg, const Summary& s) {
  ordered_json j;
  j["which"] = to_string(s.which);
  j["trials"] = s.trials;
  j["steps"] = s.steps;
  j["eta"] = cfg.eta;
  j["seed"] = cfg.seed;
  j["l2"] = {{"skf", to_json(s.skf_l2)},
             {"ekf", to_json(s.ekf_l2)},
             {"skf_mean", s.skf_l2_mean},
             {"ekf_mean", s.ekf_l2_mean},
             {"skf_median", s.skf_l2_median},
             {"ekf_median", s.ekf_l2_median},
             {"win_rate", s.win_rate}};
  j["beta_star"] = {{"optimized_updates", s.beta_count},
                    {"mean", s.beta_mean},
                    {"median", s.beta_median},
                    {"min", s.beta_min},
                    {"max", s.beta_max}};
  j["max_step_gap"] = {{"center", s.max_center_gap}, {"cov", s.max_cov_gap}};
  j["semi_axis"] = {{"overall_max", s.semi_axis_overall_max},
                    {"overall_median", s.semi_axis_overall_median},
                    {"per_step_median", to_json(s.semi_axis_median)},
                    {"per_step_max", to_json(s.semi_axis_max)}};
  j["step_error"] = {
      {"skf", {{"mean", to_json(s.skf_step_dist.mean)}, {"p50", to_json(s.skf_step_dist.p50)}, {"p95", to_json(s.skf_step_dist.p95)}}},
      {"ekf", {{"mean", to_json(s.ekf_step_dist.mean)}, {"p50", to_json(s.ekf_step_dist.p50)}, {"p95", to_json(s.ekf_step_dist.p95)}}}};
  j["hygiene"] = {{"worst_cov_min_eig_rel", s.worst_cov_min_eig_rel},
                  {"worst_shape_min_eig_rel", s.worst_shape_min_eig_rel},
                  {"worst_asymmetry_rel", s.worst_asymmetry_rel},
                  {"floor_count", s.floor_count}};
  if (s.which == ExampleId::example2) {
    j["crossing"] = crossing_json(s);
    j["angle_dominance"] = {{"range_m", 85.0},
                            {"bearing_bound_m", s.bearing_bound_at_85m},
                            {"range_bound_m", s.range_bound},
                            {"bearing_dominates", s.bearing_bound_at_85m > s.range_bound}};
    if (s.steps >= 225) {
      const auto window_max = [](const std::vector<double>& v) {
        return *std::max_element(v.begin() + 199, v.begin() + 225);
      };
      j["window_200_225"] = {{"skf_p95_max", window_max(s.skf_step_dist.p95)},
                             {"ekf_p95_max", window_max(s.ekf_step_dist.p95)},
                             {"skf_p95_run_median", median(s.skf_step_dist.p95)}};
    }
  }
  return j;
}

inline ordered_json sweep_to_json(const std::vector<SweepRow>& rows) {
  ordered_json j = ordered_json::array();
  for (const auto& r : rows) {
    j.push_back({{"label", r.label},
                 {"scale", r.scale},
                 {"max_semi_axis", r.max_semi_axis},
                 {"median_semi_axis", r.median_semi_axis}});
  }
  return j;
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace skf::io
