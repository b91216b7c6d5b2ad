// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#include "saber/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "saber/scheduler.hpp"
#include "saber/text_io.hpp"

namespace saber {
namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

const TaskProfile& sample_task(std::mt19937_64& rng, const WorkloadMix& mix) {
  const double u = uniform01(rng);
  double cum = 0.0;
  const TaskProfile* last = nullptr;
  for (const auto& [name, frac] : mix.proportions) {
    const TaskProfile& t = find_task(name);
    last = &t;
    cum += frac;
    if (u < cum) return t;
  }
  return *last;
}

int jittered_length(std::mt19937_64& rng, int avg, double jitter) {
  const double lo = avg * (1.0 - jitter);
  const double hi = avg * (1.0 + jitter);
  return std::max(1, static_cast<int>(std::llround(lo + uniform01(rng) *
                                                            (hi - lo))));
}

}  // namespace

int planned_distinct_loads(int num_requests, int l_max) {
  if (l_max < 1 || num_requests < 1) return 0;
  int issued = 0;
  int size = 0;
  int bursts = 0;
  while (issued < num_requests) {
    size = size % l_max + 1;
    issued += size;
    ++bursts;
  }
  return std::min(bursts, l_max);
}

std::vector<LoadSpeedSample> profile(const EngineConfig& engine_config,
                                     const WorkloadSpec& profiling_spec,
                                     int l_max) {
  if (l_max < 1) throw CalibrationError("profile: l_max must be >= 1");
  validate_mix(profiling_spec.mix);
  if (profiling_spec.num_requests < 1)
    throw CalibrationError("profile: target sample count must be >= 1");

  std::mt19937_64 rng(profiling_spec.seed);

  // Plan the burst schedule first so request storage never reallocates under
  // the engine.
  struct Burst {
    int size;
    const TaskProfile* task;
    int input_tokens;
    int output_tokens;
  };
  std::vector<Burst> bursts;
  int issued = 0;
  int size = 0;
  while (issued < profiling_spec.num_requests) {
    size = size % l_max + 1;
    const TaskProfile& task = sample_task(rng, profiling_spec.mix);
    bursts.push_back({size, &task,
                      jittered_length(rng, task.avg_input_tokens,
                                      profiling_spec.length_jitter),
                      jittered_length(rng, task.avg_output_tokens,
                                      profiling_spec.length_jitter)});
    issued += size;
  }

  std::vector<Request> store;
  store.reserve(static_cast<std::size_t>(issued));

  Engine engine(engine_config);
  SchedulerConfig cfg;
  cfg.mode = SchedulerMode::Static;
  cfg.static_batch_size = 10 * l_max;
  StaticScheduler scheduler(cfg);

  std::vector<LoadSpeedSample> samples;
  samples.reserve(static_cast<std::size_t>(issued));

  for (const Burst& burst : bursts) {
    const double now = engine.clock();
    for (int i = 0; i < burst.size; ++i) {
      Request r;
      r.id = store.size();
      r.task = burst.task->name;
      r.arrival_time = now;
      r.input_tokens = burst.input_tokens;
      r.max_output_tokens = burst.output_tokens;
      r.sla_seconds = burst.task->sla_seconds;
      r.deadline = deadline_of(now, *burst.task);
      store.push_back(std::move(r));
      scheduler.enqueue(store.back());
    }
    scheduler.static_step(store, engine, now);

    // Drain before the next burst so loads do not bleed across bursts.
    while (engine.observe_load() > 0) {
      for (const CompletionEvent& ev : engine.advance_to(engine.clock() + 60.0)) {
        const double speed = store[ev.request_id].max_output_tokens /
                             ev.decode_duration;
        samples.push_back(
            {static_cast<int>(std::llround(ev.mean_decode_load)), speed});
      }
    }
  }

  std::set<int> distinct;
  for (const auto& s : samples) distinct.insert(s.load);
  if (distinct.size() < 3)
    throw CalibrationError("profile: insufficient distinct loads (" +
                           std::to_string(distinct.size()) + " < 3)");
  return samples;
}

CalibrationReport calibrate(const std::vector<LoadSpeedSample>& samples) {
  std::set<int> distinct;
  for (const auto& s : samples) distinct.insert(s.load);
  if (distinct.size() < 3)
    throw CalibrationError("calibrate: insufficient distinct loads (" +
                           std::to_string(distinct.size()) + " < 3)");

  CalibrationReport report;
  bool have_best = false;
  double best_r2 = 0.0;
  for (const ModelFamily family :
       {ModelFamily::Usl, ModelFamily::Logistic, ModelFamily::Linear}) {
    FamilyFit entry;
    entry.family = family;
    try {
      entry.model = fit(samples, family);
      entry.ok = true;
      // Strict '>' keeps the earlier family on ties: usl > logistic > linear.
      if (!have_best || *entry.model.fit_r2 > best_r2) {
        have_best = true;
        best_r2 = *entry.model.fit_r2;
        report.best = entry.model;
      }
    } catch (const FitError& e) {
      entry.error = e.what();
    }
    report.fits.push_back(std::move(entry));
  }
  if (!have_best)
    throw CalibrationError("calibrate: no model family produced a fit");
  return report;
}

std::string samples_to_csv(const std::vector<LoadSpeedSample>& samples) {
  std::string out = "load,speed\n";
  for (const auto& s : samples)
    out += csv_row({std::to_string(s.load), format_double(s.speed)});
  return out;
}

std::vector<LoadSpeedSample> samples_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      csv_split(line) != std::vector<std::string>{"load", "speed"})
    throw std::invalid_argument("samples csv: bad header");
  std::vector<LoadSpeedSample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 2) throw std::invalid_argument("samples csv: bad row");
    out.push_back({std::stoi(f[0]), std::stod(f[1])});
  }
  return out;
}

std::string to_json(const CalibrationReport& report) {
  nlohmann::json j;
  j["best"] = nlohmann::json::parse(to_json(report.best));
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : report.fits) {
    nlohmann::json entry;
    entry["family"] = to_string(f.family);
    entry["ok"] = f.ok;
    if (f.ok) {
      entry["model"] = nlohmann::json::parse(to_json(f.model));
      entry["r2"] = *f.model.fit_r2;
    } else {
      entry["error"] = f.error;
    }
    fits.push_back(entry);
  }
  j["fits"] = fits;
  return j.dump(2) + "\n";
}

}  // namespace saber
