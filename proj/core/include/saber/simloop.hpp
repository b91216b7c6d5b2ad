// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "saber/engine.hpp"
#include "saber/estimator.hpp"
#include "saber/metrics.hpp"
#include "saber/scheduler.hpp"
#include "saber/workload.hpp"

namespace saber {

// One experiment cell. workload.seed drives arrivals and lengths; seed drives
// the scheduler's sampling rng (the CLI sets both from --seed). horizon
// defaults to the last arrival plus ten times the largest SLA in the
// workload, far past the point where any request could still meet its SLA.
struct SimConfig {
  WorkloadSpec workload;
  SchedulerConfig scheduler;
  std::optional<SpeedModel> model;  // required in saber mode
  EngineConfig engine;
  std::optional<double> horizon;
  int repeats = 3;
  std::uint64_t seed = 0;
};

// Throws std::invalid_argument on bad sub-configs, saber mode without a
// model, repeats < 1, or a non-positive horizon.
void validate(const SimConfig& config);

struct RunOutput {
  std::vector<Request> requests;  // final states, id == index
  std::vector<RunRecord> records;
  std::vector<Decision> decisions;
  std::vector<EngineEvent> engine_trace;
  MetricsReport metrics;
};

// Tick loop: at each boundary, enqueue due arrivals, refresh tiers (saber),
// run one admission step (saber) or fill free slots (static), then advance
// the engine one tick, feeding completions back to the scheduler. Stops at
// the horizon or when every request completed. Pure in config.
RunOutput run(const SimConfig& config);

// Same loop over a caller-supplied workload (replay); ids must be 0..n-1 in
// arrival order, as produced by generate() or trace_from_csv().
RunOutput run_with_requests(const SimConfig& config,
                            std::vector<Request> requests);

struct SweepGrid {
  std::vector<std::string> mixes;  // preset ids
  std::vector<double> rps_list;
  std::vector<int> caps;           // static schedulers, one per cap
  bool with_saber = false;
};

struct SweepRow {
  std::string mix;
  double rps = 0.0;
  SchedulerMode scheduler = SchedulerMode::Static;
  int static_cap = 0;  // 0 on saber rows
  std::uint64_t repeat_seed = 0;
  double goodput = 0.0;
  double ratio_mean = 0.0;  // NaN when no request completed
  double ratio_std = 0.0;
  double cv = 0.0;
};

// Per-mix aggregate: means are taken per (rps) cell across repeats, then
// averaged over the rps grid. The static baseline picks the best cap
// independently at every rps (argmax of the cell mean; ties to the smaller
// cap). CVs come in two flavors: ratios pooled per request across the sweep
// (default reading) and the CV of per-rps mean ratios.
struct MixSummary {
  double saber_mean_goodput = 0.0;  // NaN unless saber ran
  double best_static_mean_goodput = 0.0;
  double delta = 0.0;  // saber - best static
  double saber_pooled_cv = 0.0;
  double best_static_pooled_cv = 0.0;
  double saber_rps_mean_cv = 0.0;
  double best_static_rps_mean_cv = 0.0;
  std::map<double, int> best_cap_by_rps;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // grid order, repeats innermost
  std::map<std::string, MixSummary> summary;
};

// Runs every (mix, rps, variant) cell `repeats` times with derived seeds
// base+i; cells execute on `jobs` worker threads (0 = hardware concurrency)
// with output independent of the parallelism.
SweepResult sweep(const SweepGrid& grid, const SimConfig& base, int jobs = 0);

// Long-format CSV: mix, rps, scheduler, static_cap, repeat_seed, goodput,
// ratio_mean, ratio_std, cv (empty static_cap on saber rows, empty ratio
// fields when undefined).
std::string results_to_csv(const std::vector<SweepRow>& rows);

std::string summary_to_json(const SweepResult& result);

// SimConfig JSON round trip; `mix` accepts a preset id or a name->fraction
// object. Used by the CLI's --config.
SimConfig sim_config_from_json(const std::string& text);
std::string to_json(const SimConfig& config);

}  // namespace saber
