// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "saber/types.hpp"

namespace saber {

// Outcome of one request, detached from simulation state so metric functions
// stay pure. met_sla holds exactly when the request completed and its
// end-to-end latency is within the SLA.
struct RunRecord {
  std::uint64_t request_id = 0;
  std::string task;
  double arrival_time = 0.0;
  std::optional<double> admit_time;
  std::optional<double> completion_time;  // absent: never finished in-horizon
  double sla = 1.0;
  bool met_sla = false;
  std::string final_tier = "high";  // "low" once a request was ever demoted
};

RunRecord make_record(const Request& request);

// count(met_sla) / count(all). Throws std::domain_error on empty input.
double goodput(const std::vector<RunRecord>& records);

// (completion - arrival)/sla for completed records only, in input order.
// Never-completed requests have no latency and are skipped here while still
// counting against goodput and CDF denominators.
std::vector<double> ratio_to_sla(const std::vector<RunRecord>& records);

// Population standard deviation over mean. Throws std::domain_error on empty
// input or zero mean.
double cv(const std::vector<double>& values);

// Empirical CDF of end-to-end latency for one task, as (latency, cumulative
// fraction) with one point per distinct latency. Fractions divide by the
// task's issued count, so the curve plateaus below 1 when requests never
// completed. Unknown task or no records: empty list.
std::vector<std::pair<double, double>> cdf(
    const std::vector<RunRecord>& records, std::string_view task);

// Issue-count-weighted average over tasks of the CDF mass at each task's SLA;
// equals goodput(records) up to rounding (cross-checked in tests on every
// simulated run).
double goodput_from_cdfs(const std::vector<RunRecord>& records);

struct TaskMetrics {
  int issued = 0;
  double goodput = 0.0;
  std::vector<std::pair<double, double>> cdf_points;
};

// NaN marks undefined ratio statistics (no completed requests); the JSON
// writer emits null for those.
struct MetricsReport {
  double goodput = 0.0;
  double ratio_mean = 0.0;
  double ratio_std = 0.0;
  double cv = 0.0;
  std::map<std::string, TaskMetrics> per_task;
};

MetricsReport compute_metrics(const std::vector<RunRecord>& records);

std::string to_json(const MetricsReport& report);

// Record CSV: request_id, task, arrival_time, admit_time, completion_time,
// sla, met_sla, final_tier (empty fields for absent optionals).
std::string records_to_csv(const std::vector<RunRecord>& records);
std::vector<RunRecord> records_from_csv(const std::string& text);

}  // namespace saber
