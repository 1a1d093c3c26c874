// skf: run the benchmark experiments and the invariant suite.
//
//   skf example1|example2|sweep [--trials N] [--steps N] [--eta R] [--seed N]
//                               [--out DIR] [--config FILE]
//   skf validate [--quick] [--seed N]
//
// Exit codes: 0 success, 1 runtime or validation failure, 2 bad usage.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "skf/experiments.hpp"
#include "skf/validation.hpp"
#include "skf_io.hpp"

namespace {

namespace fs = std::filesystem;
using skf::io::ordered_json;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct RunFlags {
  int trials = 0;
  int steps = 0;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::string out = "skf-out";
  std::string config;
  CLI::Option* trials_opt = nullptr;
  CLI::Option* steps_opt = nullptr;
  CLI::Option* eta_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

unsigned thread_budget() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SKF_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1) {
      throw UsageError(std::string("SKF_THREADS must be a positive integer, got '") + env + "'");
    }
    n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  f.trials_opt = cmd->add_option("--trials", f.trials, "Number of Monte Carlo trials")
                     ->check(CLI::PositiveNumber);
  f.steps_opt = cmd->add_option("--steps", f.steps, "Steps per trial")->check(CLI::PositiveNumber);
  f.eta_opt = cmd->add_option("--eta", f.eta, "Weight of the bounded part in the cost")
                  ->check(CLI::Range(0.0, 1.0));
  f.seed_opt = cmd->add_option("--seed", f.seed, "Root seed of all random streams");
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
  cmd->add_option("--config", f.config, "JSON file overriding the defaults")
      ->check(CLI::ExistingFile);
}

/// defaults < config file < flags
skf::ExperimentConfig resolve(skf::ExampleId which, const RunFlags& f) {
  skf::ExperimentConfig cfg = skf::default_config(which);
  if (!f.config.empty()) skf::io::apply_config(cfg, skf::io::read_json_file(f.config));
  if (f.trials_opt->count()) cfg.trials = f.trials;
  if (f.steps_opt->count()) cfg.steps = f.steps;
  if (f.eta_opt->count()) cfg.eta = f.eta;
  if (f.seed_opt->count()) cfg.seed = f.seed;
  cfg.filter.eta = cfg.eta;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

ordered_json manifest(const std::string& command, const skf::ExperimentConfig& cfg,
                      const std::string& started, const fs::path& out,
                      const std::vector<std::string>& files, unsigned threads) {
  ordered_json j;
  j["tool"] = "skf";
  j["version"] = skf::io::kVersion;
  j["command"] = command;
  j["seed"] = cfg.seed;
  j["started_utc"] = started;
  j["finished_utc"] = utc_now();
  j["threads"] = threads;
  j["csv_schema"] = skf::io::kCsvSchema;
  ordered_json paths = ordered_json::object();
  for (const auto& f : files) paths[f] = (out / f).string();
  j["outputs"] = paths;
  j["config"] = skf::io::config_to_json(cfg);
  return j;
}

int run_example(skf::ExampleId which, const RunFlags& f) {
  const std::string started = utc_now();
  const skf::ExperimentConfig cfg = resolve(which, f);
  const unsigned threads = thread_budget();
  const auto trials = skf::run_trials(cfg, threads);
  const skf::Summary summary = skf::aggregate(cfg, trials);

  const fs::path out(f.out);
  fs::create_directories(out);
  std::ostringstream csv;
  skf::io::write_csv(csv, cfg, trials);
  skf::io::write_file((out / "trials.csv").string(), csv.str());
  skf::io::write_file((out / "summary.json").string(),
                      skf::io::summary_to_json(cfg, summary).dump(2) + "\n");
  skf::io::write_file(
      (out / "manifest.json").string(),
      manifest(skf::to_string(which), cfg, started, out,
               {"trials.csv", "summary.json", "manifest.json"}, threads)
              .dump(2) +
          "\n");

  std::cout << skf::to_string(which) << ": " << cfg.trials << " trials x " << cfg.steps
            << " steps, eta " << cfg.eta << "\n"
            << "  mean l2  skf " << summary.skf_l2_mean << "  ekf " << summary.ekf_l2_mean << "\n"
            << "  win rate " << summary.win_rate << "\n"
            << "  max |skf - ekf| center " << summary.max_center_gap << "\n"
            << "  output " << out.string() << "\n";
  return 0;
}

int run_sweep(const RunFlags& f) {
  const std::string started = utc_now();
  const skf::ExperimentConfig base = resolve(skf::ExampleId::example2, f);
  const unsigned threads = thread_budget();
  std::vector<skf::SweepRow> rows = skf::sensitivity_sweep(base, {1.0, 10.0, 100.0}, threads);
  rows.push_back(skf::sweep_row(skf::realistic_bounds(base), "realistic", 1.0, threads));

  const fs::path out(f.out);
  fs::create_directories(out);
  std::ostringstream csv;
  csv << "label,scale,max_semi_axis,median_semi_axis\n";
  for (const auto& r : rows) {
    csv << r.label << ',' << skf::io::fmt(r.scale) << ',' << skf::io::fmt(r.max_semi_axis) << ','
        << skf::io::fmt(r.median_semi_axis) << '\n';
  }
  skf::io::write_file((out / "sweep.csv").string(), csv.str());
  ordered_json summary;
  summary["which"] = "sweep";
  summary["trials"] = base.trials;
  summary["steps"] = base.steps;
  summary["rows"] = skf::io::sweep_to_json(rows);
  skf::io::write_file((out / "summary.json").string(), summary.dump(2) + "\n");
  skf::io::write_file((out / "manifest.json").string(),
                      manifest("sweep", base, started, out,
                               {"sweep.csv", "summary.json", "manifest.json"}, threads)
                              .dump(2) +
                          "\n");

  for (const auto& r : rows) {
    std::cout << "  " << r.label << "  max semi-axis " << r.max_semi_axis << "  median "
              << r.median_semi_axis << "\n";
  }
  return 0;
}

int run_validate(bool quick, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  for (const auto& r : skf::run_validation({quick, seed})) {
    ok = ok && r.passed;
    std::cout << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  worst " << r.worst
              << " (limit " << r.threshold << ")  " << r.detail << "\n";
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << (ok ? "all properties hold" : "some properties failed") << " in " << secs
            << " s\n";
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Set-membership Kalman filter experiments"};
  app.require_subcommand(1);

  RunFlags ex1, ex2, sweep;
  auto* ex1_cmd = app.add_subcommand("example1", "Scalar growth benchmark, SKF vs EKF");
  add_run_flags(ex1_cmd, ex1);
  auto* ex2_cmd = app.add_subcommand("example2", "Two-station range/bearing tracking");
  add_run_flags(ex2_cmd, ex2);
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Example 2 bounds scaled by 1, 10, 100 and a realistic variant");
  add_run_flags(sweep_cmd, sweep);

  bool quick = false;
  std::uint64_t validate_seed = 1;
  auto* validate_cmd = app.add_subcommand("validate", "Run the built-in invariant suite");
  validate_cmd->add_flag("--quick", quick, "Reduced sample counts");
  validate_cmd->add_option("--seed", validate_seed, "Seed of the random cases");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*ex1_cmd) return run_example(skf::ExampleId::example1, ex1);
    if (*ex2_cmd) return run_example(skf::ExampleId::example2, ex2);
    if (*sweep_cmd) return run_sweep(sweep);
    if (*validate_cmd) return run_validate(quick, validate_seed);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const skf::io::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const skf::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const skf::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
