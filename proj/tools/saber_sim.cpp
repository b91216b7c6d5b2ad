// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
//
// saber_sim: command-line frontend over the simulator library. calibrate
// profiles the engine and fits the load-speed models; run executes one
// scheduling scenario; sweep scans the mix x rps x cap grid and compares
// admission control against every static batch cap. The library itself
// never touches the filesystem: all reads and writes happen here, and
// every output is written to a temp path then renamed so files are either
// fully written or absent.
//
// Exit codes: 0 success, 2 usage or config error, 3 runtime failure.

#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "saber/calibration.hpp"
#include "saber/metrics.hpp"
#include "saber/scheduler.hpp"
#include "saber/simloop.hpp"
#include "saber/text_io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

// Config mistakes the caller can fix from the message alone.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path dir = path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("short write on " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::uint64_t default_seed() {
  const char* env = std::getenv("SABER_SIM_SEED");
  if (!env || !*env) return 42;
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0')
    throw UsageError("SABER_SIM_SEED must be an unsigned integer, got \"" +
                     std::string(env) + "\"");
  return v;
}

double parse_strict_double(const std::string& token) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (errno != 0 || end == token.c_str() || *end != '\0')
    throw UsageError("malformed number \"" + token + "\"");
  return v;
}

// Grid list grammar: comma-separated items, each a scalar or a-b[:step]
// (step defaults to 1). "1-10,15,20" or "10-100:10".
std::vector<double> parse_range_list(const std::string& text,
                                     const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      const auto dash = item.find('-', 1);  // position 0 would be a sign
      if (dash == std::string::npos) {
        out.push_back(parse_strict_double(item));
        continue;
      }
      const std::string lo_s = item.substr(0, dash);
      std::string hi_s = item.substr(dash + 1);
      double step = 1.0;
      if (const auto colon = hi_s.find(':'); colon != std::string::npos) {
        step = parse_strict_double(hi_s.substr(colon + 1));
        hi_s = hi_s.substr(0, colon);
      }
      const double lo = parse_strict_double(lo_s);
      const double hi = parse_strict_double(hi_s);
      if (!(step > 0.0) || hi < lo)
        throw UsageError("empty or backward range \"" + item + "\"");
      for (int k = 0;; ++k) {
        const double v = lo + step * k;
        if (v > hi * (1.0 + 1e-12) && v > hi + 1e-12) break;
        out.push_back(std::min(v, hi));
      }
    } catch (const UsageError& e) {
      throw UsageError(flag + ": " + e.what());
    }
  }
  if (out.empty()) throw UsageError(flag + ": empty list \"" + text + "\"");
  return out;
}

std::vector<int> parse_cap_list(const std::string& text) {
  std::vector<int> caps;
  for (const double v : parse_range_list(text, "--caps")) {
    const int c = static_cast<int>(v);
    if (v != static_cast<double>(c) || c < 1)
      throw UsageError("--caps: caps must be positive integers, got " +
                       std::to_string(v));
    caps.push_back(c);
  }
  return caps;
}

saber::WorkloadMix parse_mix_arg(const std::string& arg) {
  if (arg == "w1" || arg == "w2" || arg == "w3") return saber::preset_mix(arg);
  saber::WorkloadMix mix;
  try {
    const auto j = nlohmann::json::parse(read_file(arg));
    mix.proportions = j.get<std::map<std::string, double>>();
  } catch (const std::exception& e) {
    throw UsageError("--mix: expected w1, w2, w3, or a JSON file of task "
                     "proportions: " +
                     std::string(e.what()));
  }
  saber::validate_mix(mix);
  return mix;
}

saber::SpeedModel load_model(const fs::path& path) {
  try {
    return saber::model_from_json(read_file(path));
  } catch (const std::exception& e) {
    throw UsageError("--model: " + std::string(e.what()));
  }
}

saber::SimConfig load_base_config(const std::string& config_path) {
  if (config_path.empty()) return saber::SimConfig{};
  try {
    return saber::sim_config_from_json(read_file(config_path));
  } catch (const std::exception& e) {
    throw UsageError("--config: " + std::string(e.what()));
  }
}

struct CalibrateArgs {
  std::string out;
  int l_max = 50;
  int samples = 1000;
  std::uint64_t seed = 42;
  std::string mix = "w3";
  double jitter = 0.2;
};

int cmd_calibrate(const CalibrateArgs& args) {
  if (saber::planned_distinct_loads(args.samples, args.l_max) < 3)
    throw UsageError(
        "insufficient distinct loads: the sample budget reaches fewer than "
        "3 burst sizes; raise --samples or lower --lmax");

  saber::WorkloadSpec spec;
  spec.mix = parse_mix_arg(args.mix);
  spec.num_requests = args.samples;
  spec.seed = args.seed;
  spec.length_jitter = args.jitter;

  const saber::EngineConfig engine_config;
  const auto samples = saber::profile(engine_config, spec, args.l_max);
  const auto report = saber::calibrate(samples);

  const fs::path out(args.out);
  write_file_atomic(out / "samples.csv", saber::samples_to_csv(samples));
  write_file_atomic(out / "models.json", saber::to_json(report));
  write_file_atomic(out / "best_model.json", saber::to_json(report.best));
  std::cout << "calibrated " << samples.size() << " samples, best family "
            << saber::to_string(report.best.family) << "\n";
  return 0;
}

struct RunArgs {
  std::string out;
  std::string config;
  std::string mix;
  std::string scheduler;
  std::string model;
  double rps = -1.0;
  int requests = -1;
  int cap = -1;
  int window = -1;
  double tick = -1.0;
  double jitter = -1.0;
  double prefill_rate = -1.0;
  double horizon = -1.0;
  std::optional<std::uint64_t> seed;
};

int cmd_run(const RunArgs& args) {
  saber::SimConfig cfg = load_base_config(args.config);
  if (!args.mix.empty()) cfg.workload.mix = parse_mix_arg(args.mix);
  if (args.rps >= 0.0) cfg.workload.rps = args.rps;
  if (args.requests >= 0) cfg.workload.num_requests = args.requests;
  if (args.jitter >= 0.0) cfg.workload.length_jitter = args.jitter;
  if (!args.scheduler.empty()) {
    if (args.scheduler == "saber")
      cfg.scheduler.mode = saber::SchedulerMode::Saber;
    else if (args.scheduler == "static")
      cfg.scheduler.mode = saber::SchedulerMode::Static;
    else
      throw UsageError("--scheduler: expected saber or static, got \"" +
                       args.scheduler + "\"");
  }
  if (args.cap >= 0) cfg.scheduler.static_batch_size = args.cap;
  if (args.window >= 0) cfg.scheduler.window_size = args.window;
  if (args.tick >= 0.0) cfg.scheduler.tick = args.tick;
  if (!args.model.empty()) cfg.model = load_model(args.model);
  if (args.prefill_rate >= 0.0) cfg.engine.prefill_rate = args.prefill_rate;
  if (args.horizon >= 0.0) cfg.horizon = args.horizon;
  if (args.seed) {
    cfg.workload.seed = *args.seed;
    cfg.seed = *args.seed;
  }

  if (cfg.scheduler.mode == saber::SchedulerMode::Saber && !cfg.model)
    throw UsageError("saber scheduler requires --model");
  if (cfg.scheduler.mode == saber::SchedulerMode::Static &&
      cfg.scheduler.static_batch_size < 1)
    throw UsageError("static scheduler requires --cap");

  const saber::RunOutput run = saber::run(cfg);

  const fs::path out(args.out);
  write_file_atomic(out / "records.csv", saber::records_to_csv(run.records));
  write_file_atomic(out / "decisions.csv",
                    saber::decisions_to_csv(run.decisions));
  write_file_atomic(out / "metrics.json", saber::to_json(run.metrics));
  std::cout << "ran " << run.records.size() << " requests, goodput "
            << saber::format_double(run.metrics.goodput) << "\n";
  return 0;
}

struct SweepArgs {
  std::string out;
  std::string config;
  std::string mixes = "w1,w2,w3";
  std::string rps = "1-10,15,20";
  std::string caps = "10-100:10";
  bool with_saber = false;
  std::string model;
  int repeats = -1;
  int requests = -1;
  int window = -1;
  double tick = -1.0;
  double jitter = -1.0;
  double prefill_rate = -1.0;
  int jobs = 0;
  std::optional<std::uint64_t> seed;
};

int cmd_sweep(const SweepArgs& args) {
  saber::SimConfig base = load_base_config(args.config);
  if (args.repeats >= 0) base.repeats = args.repeats;
  if (args.requests >= 0) base.workload.num_requests = args.requests;
  if (args.window >= 0) base.scheduler.window_size = args.window;
  if (args.tick >= 0.0) base.scheduler.tick = args.tick;
  if (args.jitter >= 0.0) base.workload.length_jitter = args.jitter;
  if (args.prefill_rate >= 0.0) base.engine.prefill_rate = args.prefill_rate;
  if (!args.model.empty()) base.model = load_model(args.model);
  if (args.seed) base.seed = *args.seed;

  saber::SweepGrid grid;
  std::stringstream ss(args.mixes);
  std::string mix;
  while (std::getline(ss, mix, ',')) {
    try {
      saber::preset_mix(mix);
    } catch (const std::invalid_argument&) {
      throw UsageError("--mixes: unknown preset \"" + mix + "\"");
    }
    grid.mixes.push_back(mix);
  }
  if (grid.mixes.empty()) throw UsageError("--mixes: empty list");
  grid.rps_list = parse_range_list(args.rps, "--rps");
  grid.caps = parse_cap_list(args.caps);
  grid.with_saber = args.with_saber;
  if (grid.with_saber && !base.model)
    throw UsageError("--with-saber requires --model");

  const saber::SweepResult result = saber::sweep(grid, base, args.jobs);

  const fs::path out(args.out);
  write_file_atomic(out / "results.csv", saber::results_to_csv(result.rows));
  write_file_atomic(out / "summary.json", saber::summary_to_json(result));
  std::cout << "swept " << result.rows.size() << " rows over "
            << grid.mixes.size() << " mixes\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "saber_sim: deterministic simulator for SLA-aware admission control "
      "in continuous-batching serving"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  RunArgs run;
  SweepArgs sweep;
  std::uint64_t run_seed = 0;
  std::uint64_t sweep_seed = 0;

  try {
    cal.seed = default_seed();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App* c = app.add_subcommand(
      "calibrate", "Profile the engine and fit the speed models");
  c->add_option("--out", cal.out, "Output directory")->required();
  c->add_option("--lmax", cal.l_max, "Largest burst size to profile")
      ->check(CLI::PositiveNumber);
  c->add_option("--samples", cal.samples, "Total profiling requests")
      ->check(CLI::PositiveNumber);
  c->add_option("--seed", cal.seed, "Profiling seed");
  c->add_option("--mix", cal.mix, "Preset id or JSON proportions file");
  c->add_option("--jitter", cal.jitter, "Relative length jitter")
      ->check(CLI::Range(0.0, 1.0));

  CLI::App* r = app.add_subcommand("run", "Run one scheduling scenario");
  r->add_option("--out", run.out, "Output directory")->required();
  r->add_option("--config", run.config, "Base config JSON file");
  r->add_option("--mix", run.mix, "Preset id or JSON proportions file");
  r->add_option("--rps", run.rps, "Mean arrival rate")
      ->check(CLI::PositiveNumber);
  r->add_option("--requests", run.requests, "Requests to generate")
      ->check(CLI::PositiveNumber);
  r->add_option("--scheduler", run.scheduler, "saber or static");
  r->add_option("--cap", run.cap, "Static batch cap")
      ->check(CLI::PositiveNumber);
  r->add_option("--model", run.model, "Speed model JSON file");
  r->add_option("--window", run.window, "Admission window size")
      ->check(CLI::PositiveNumber);
  r->add_option("--tick", run.tick, "Scheduler tick seconds")
      ->check(CLI::PositiveNumber);
  r->add_option("--jitter", run.jitter, "Relative length jitter")
      ->check(CLI::Range(0.0, 1.0));
  r->add_option("--prefill-rate", run.prefill_rate,
                "Prefill tokens per second (0 = free prefill)");
  r->add_option("--horizon", run.horizon, "Simulation horizon seconds")
      ->check(CLI::PositiveNumber);
  CLI::Option* r_seed = r->add_option("--seed", run_seed, "Run seed");

  CLI::App* s = app.add_subcommand(
      "sweep", "Scan mixes x rates x caps and summarize");
  s->add_option("--out", sweep.out, "Output directory")->required();
  s->add_option("--config", sweep.config, "Base config JSON file");
  s->add_option("--mixes", sweep.mixes, "Comma list of mix presets");
  s->add_option("--rps", sweep.rps, "Rate list, e.g. 1-10,15,20");
  s->add_option("--caps", sweep.caps, "Cap list, e.g. 10-100:10");
  s->add_flag("--with-saber", sweep.with_saber,
              "Also run the admission-control scheduler per (mix, rps)");
  s->add_option("--model", sweep.model, "Speed model JSON file");
  s->add_option("--repeats", sweep.repeats, "Repeats per cell")
      ->check(CLI::PositiveNumber);
  s->add_option("--requests", sweep.requests, "Requests per cell")
      ->check(CLI::PositiveNumber);
  s->add_option("--window", sweep.window, "Admission window size")
      ->check(CLI::PositiveNumber);
  s->add_option("--tick", sweep.tick, "Scheduler tick seconds")
      ->check(CLI::PositiveNumber);
  s->add_option("--jitter", sweep.jitter, "Relative length jitter")
      ->check(CLI::Range(0.0, 1.0));
  s->add_option("--prefill-rate", sweep.prefill_rate,
                "Prefill tokens per second (0 = free prefill)");
  s->add_option("--jobs", sweep.jobs,
                "Worker threads (0 = available parallelism)")
      ->check(CLI::NonNegativeNumber);
  CLI::Option* s_seed = s->add_option("--seed", sweep_seed, "Base seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (r_seed->count() > 0)
      run.seed = run_seed;
    else if (run.config.empty())
      run.seed = default_seed();
    if (s_seed->count() > 0)
      sweep.seed = sweep_seed;
    else if (sweep.config.empty())
      sweep.seed = default_seed();

    if (c->parsed()) return cmd_calibrate(cal);
    if (r->parsed()) return cmd_run(run);
    return cmd_sweep(sweep);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
