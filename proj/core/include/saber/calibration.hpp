// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "saber/engine.hpp"
#include "saber/estimator.hpp"
#include "saber/workload.hpp"

namespace saber {

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Offline load-speed measurement. Injects bursts of sizes cycling 1..l_max
// into a drained engine behind a static scheduler with cap 10*l_max, until
// profiling_spec.num_requests samples are issued. Each burst is homogeneous:
// one task drawn from the mix, one jittered length, so every member decodes
// at a constant concurrency and the sample (load, speed) is noise-free up to
// load rounding. Each completed request yields one sample with load = its
// time-weighted mean concurrency (rounded) and speed = generated tokens over
// decode seconds. profiling_spec.rps is unused: bursts replace paced
// arrivals. Throws CalibrationError when fewer than 3 distinct loads result.
std::vector<LoadSpeedSample> profile(const EngineConfig& engine_config,
                                     const WorkloadSpec& profiling_spec,
                                     int l_max = 50);

// Distinct burst sizes the schedule above reaches for a given request
// budget. Lets callers reject undersized budgets (< 3 distinct loads)
// before running the engine.
int planned_distinct_loads(int num_requests, int l_max = 50);

struct FamilyFit {
  ModelFamily family = ModelFamily::Usl;
  bool ok = false;
  SpeedModel model;   // valid when ok
  std::string error;  // set when !ok
};

struct CalibrationReport {
  SpeedModel best;
  std::vector<FamilyFit> fits;  // usl, logistic, linear, in that order
};

// Fits all three families and keeps the best R²; ties break toward the
// earlier family (usl > logistic > linear). Succeeds when at least one
// family fits; throws CalibrationError otherwise or when the samples span
// fewer than 3 distinct loads.
CalibrationReport calibrate(const std::vector<LoadSpeedSample>& samples);

// Sample CSV: load, speed.
std::string samples_to_csv(const std::vector<LoadSpeedSample>& samples);
std::vector<LoadSpeedSample> samples_from_csv(const std::string& text);

// Selection report JSON: best model plus per-family outcome.
std::string to_json(const CalibrationReport& report);

}  // namespace saber
