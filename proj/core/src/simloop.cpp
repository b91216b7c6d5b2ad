// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#include "saber/simloop.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "saber/text_io.hpp"

namespace saber {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double cv_or_nan(const std::vector<double>& values) {
  if (values.empty()) return kNaN;
  try {
    return cv(values);
  } catch (const std::domain_error&) {
    return kNaN;
  }
}

}  // namespace

void validate(const SimConfig& config) {
  validate(config.workload);
  validate(config.scheduler);
  if (config.scheduler.mode == SchedulerMode::Saber && !config.model)
    throw std::invalid_argument("saber mode requires a speed model");
  if (config.repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  if (config.horizon && !(*config.horizon > 0.0))
    throw std::invalid_argument("horizon must be > 0");
  if (max_speed(config.engine.ground_truth) <= 0.0)
    throw std::invalid_argument("engine ground truth must be positive");
}

RunOutput run_with_requests(const SimConfig& config,
                            std::vector<Request> requests) {
  validate(config);
  if (requests.empty()) throw std::invalid_argument("run: no requests");
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (requests[i].id != i)
      throw std::invalid_argument("run: request ids must be 0..n-1");
  }

  const std::size_t n = requests.size();
  double max_sla = 0.0;
  for (const auto& r : requests) max_sla = std::max(max_sla, r.sla_seconds);
  const double horizon =
      config.horizon.value_or(requests.back().arrival_time + 10.0 * max_sla);

  Engine engine(config.engine);
  std::optional<SaberScheduler> saber;
  std::optional<StaticScheduler> fixed;
  if (config.scheduler.mode == SchedulerMode::Saber)
    saber.emplace(*config.model, config.scheduler, config.seed);
  else
    fixed.emplace(config.scheduler);

  const double tick = config.scheduler.tick;
  std::size_t next_arrival = 0;
  std::size_t completed = 0;
  double t = 0.0;

  while (true) {
    while (next_arrival < n && requests[next_arrival].arrival_time <= t) {
      if (saber)
        saber->enqueue(requests[next_arrival]);
      else
        fixed->enqueue(requests[next_arrival]);
      ++next_arrival;
    }
    if (saber) {
      saber->refresh_tiers(requests, t, engine.observe_load());
      saber->admission_step(requests, engine, t);
    } else {
      fixed->static_step(requests, engine, t);
    }

    if (t >= horizon) break;
    const double next = std::min(t + tick, horizon);
    for (const CompletionEvent& ev : engine.advance_to(next)) {
      ++completed;
      if (saber) saber->on_completion(ev.request_id);
    }
    t = next;
    if (completed == n) break;  // nothing left anywhere
  }

  RunOutput out;
  out.records.reserve(n);
  for (const auto& r : requests) out.records.push_back(make_record(r));
  out.decisions = saber ? saber->decisions() : fixed->decisions();
  out.engine_trace = engine.trace();
  out.metrics = compute_metrics(out.records);
  out.requests = std::move(requests);
  return out;
}

RunOutput run(const SimConfig& config) {
  validate(config);
  return run_with_requests(config, generate(config.workload));
}

namespace {

struct CellTask {
  std::string mix;
  double rps;
  SchedulerMode mode;
  int cap;  // 0 for saber
  std::uint64_t seed;
};

}  // namespace

SweepResult sweep(const SweepGrid& grid, const SimConfig& base, int jobs) {
  if (grid.mixes.empty() || grid.rps_list.empty() ||
      (grid.caps.empty() && !grid.with_saber))
    throw std::invalid_argument("sweep: empty grid");
  if (grid.with_saber && !base.model)
    throw std::invalid_argument("sweep: saber variant requires a model");

  std::vector<CellTask> tasks;
  for (const auto& mix : grid.mixes) {
    preset_mix(mix);  // validates the id early
    for (const double rps : grid.rps_list) {
      for (const int cap : grid.caps) {
        for (int i = 0; i < base.repeats; ++i)
          tasks.push_back({mix, rps, SchedulerMode::Static, cap,
                           base.seed + static_cast<std::uint64_t>(i)});
      }
      if (grid.with_saber) {
        for (int i = 0; i < base.repeats; ++i)
          tasks.push_back({mix, rps, SchedulerMode::Saber, 0,
                           base.seed + static_cast<std::uint64_t>(i)});
      }
    }
  }

  std::vector<SweepRow> rows(tasks.size());
  std::vector<std::vector<double>> ratios(tasks.size());

  auto run_cell = [&](std::size_t idx) {
    const CellTask& cell = tasks[idx];
    SimConfig cfg = base;
    cfg.workload.mix = preset_mix(cell.mix);
    cfg.workload.rps = cell.rps;
    cfg.workload.seed = cell.seed;
    cfg.seed = cell.seed;
    cfg.scheduler.mode = cell.mode;
    cfg.scheduler.static_batch_size = cell.cap;
    if (cell.mode == SchedulerMode::Static) cfg.model.reset();

    const RunOutput out = run(cfg);
    SweepRow row;
    row.mix = cell.mix;
    row.rps = cell.rps;
    row.scheduler = cell.mode;
    row.static_cap = cell.cap;
    row.repeat_seed = cell.seed;
    row.goodput = out.metrics.goodput;
    row.ratio_mean = out.metrics.ratio_mean;
    row.ratio_std = out.metrics.ratio_std;
    row.cv = out.metrics.cv;
    rows[idx] = std::move(row);
    ratios[idx] = ratio_to_sla(out.records);
  };

  int workers = jobs > 0 ? jobs
                         : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = cursor.fetch_add(1); i < tasks.size();
             i = cursor.fetch_add(1)) {
          run_cell(i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  SweepResult result;
  result.rows = rows;

  // Per-(mix, rps): cell means over repeats, then the static argmax.
  for (const auto& mix : grid.mixes) {
    MixSummary s;
    std::vector<double> saber_cell_means, static_best_means;
    std::vector<double> saber_pool, static_pool;
    std::vector<double> saber_rps_means, static_rps_means;

    for (const double rps : grid.rps_list) {
      std::map<int, std::vector<std::size_t>> static_cells;  // cap -> rows
      std::vector<std::size_t> saber_cells;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].mix != mix || tasks[i].rps != rps) continue;
        if (tasks[i].mode == SchedulerMode::Static)
          static_cells[tasks[i].cap].push_back(i);
        else
          saber_cells.push_back(i);
      }

      if (!static_cells.empty()) {
        int best_cap = 0;
        double best_mean = -1.0;
        for (const auto& [cap, idxs] : static_cells) {
          std::vector<double> gs;
          for (std::size_t i : idxs) gs.push_back(rows[i].goodput);
          const double m = mean_of(gs);
          if (m > best_mean) {  // map order: ties keep the smaller cap
            best_mean = m;
            best_cap = cap;
          }
        }
        s.best_cap_by_rps[rps] = best_cap;
        static_best_means.push_back(best_mean);
        std::vector<double> cell_ratios;
        for (std::size_t i : static_cells[best_cap]) {
          static_pool.insert(static_pool.end(), ratios[i].begin(),
                             ratios[i].end());
          cell_ratios.insert(cell_ratios.end(), ratios[i].begin(),
                             ratios[i].end());
        }
        if (!cell_ratios.empty())
          static_rps_means.push_back(mean_of(cell_ratios));
      }

      if (!saber_cells.empty()) {
        std::vector<double> gs;
        std::vector<double> cell_ratios;
        for (std::size_t i : saber_cells) {
          gs.push_back(rows[i].goodput);
          saber_pool.insert(saber_pool.end(), ratios[i].begin(),
                            ratios[i].end());
          cell_ratios.insert(cell_ratios.end(), ratios[i].begin(),
                             ratios[i].end());
        }
        saber_cell_means.push_back(mean_of(gs));
        if (!cell_ratios.empty())
          saber_rps_means.push_back(mean_of(cell_ratios));
      }
    }

    s.saber_mean_goodput =
        saber_cell_means.empty() ? kNaN : mean_of(saber_cell_means);
    s.best_static_mean_goodput =
        static_best_means.empty() ? kNaN : mean_of(static_best_means);
    s.delta = s.saber_mean_goodput - s.best_static_mean_goodput;
    s.saber_pooled_cv = cv_or_nan(saber_pool);
    s.best_static_pooled_cv = cv_or_nan(static_pool);
    s.saber_rps_mean_cv = cv_or_nan(saber_rps_means);
    s.best_static_rps_mean_cv = cv_or_nan(static_rps_means);
    result.summary[mix] = std::move(s);
  }
  return result;
}

std::string results_to_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "mix,rps,scheduler,static_cap,repeat_seed,goodput,ratio_mean,ratio_std,"
      "cv\n";
  for (const auto& r : rows) {
    out += csv_row(
        {r.mix, format_double(r.rps), to_string(r.scheduler),
         r.scheduler == SchedulerMode::Static ? std::to_string(r.static_cap)
                                              : "",
         std::to_string(r.repeat_seed), format_double(r.goodput),
         std::isnan(r.ratio_mean) ? "" : format_double(r.ratio_mean),
         std::isnan(r.ratio_std) ? "" : format_double(r.ratio_std),
         std::isnan(r.cv) ? "" : format_double(r.cv)});
  }
  return out;
}

std::string summary_to_json(const SweepResult& result) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [mix, s] : result.summary) {
    nlohmann::json m;
    m["saber_mean_goodput"] = s.saber_mean_goodput;
    m["best_static_mean_goodput"] = s.best_static_mean_goodput;
    m["delta"] = s.delta;
    m["saber_pooled_cv"] = s.saber_pooled_cv;
    m["best_static_pooled_cv"] = s.best_static_pooled_cv;
    m["saber_rps_mean_cv"] = s.saber_rps_mean_cv;
    m["best_static_rps_mean_cv"] = s.best_static_rps_mean_cv;
    nlohmann::json caps = nlohmann::json::object();
    for (const auto& [rps, cap] : s.best_cap_by_rps)
      caps[format_double(rps)] = cap;
    m["best_cap_by_rps"] = caps;
    j[mix] = m;
  }
  return j.dump(2) + "\n";
}

namespace {

SpeedModel model_from_json_value(const nlohmann::json& j) {
  return model_from_json(j.dump());
}

nlohmann::json model_to_json_value(const SpeedModel& m) {
  return nlohmann::json::parse(to_json(m));
}

}  // namespace

SimConfig sim_config_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  SimConfig cfg;

  if (j.contains("workload")) {
    const auto& w = j["workload"];
    if (w.contains("mix")) {
      if (w["mix"].is_string())
        cfg.workload.mix = preset_mix(w["mix"].get<std::string>());
      else
        cfg.workload.mix.proportions =
            w["mix"].get<std::map<std::string, double>>();
    }
    if (w.contains("rps")) cfg.workload.rps = w["rps"].get<double>();
    if (w.contains("num_requests"))
      cfg.workload.num_requests = w["num_requests"].get<int>();
    if (w.contains("seed")) cfg.workload.seed = w["seed"].get<std::uint64_t>();
    if (w.contains("length_jitter"))
      cfg.workload.length_jitter = w["length_jitter"].get<double>();
  }
  if (j.contains("scheduler")) {
    const auto& s = j["scheduler"];
    if (s.contains("mode")) {
      const auto mode = s["mode"].get<std::string>();
      if (mode == "saber")
        cfg.scheduler.mode = SchedulerMode::Saber;
      else if (mode == "static")
        cfg.scheduler.mode = SchedulerMode::Static;
      else
        throw std::invalid_argument("config: unknown scheduler mode " + mode);
    }
    if (s.contains("window_size"))
      cfg.scheduler.window_size = s["window_size"].get<int>();
    if (s.contains("tick")) cfg.scheduler.tick = s["tick"].get<double>();
    if (s.contains("static_batch_size"))
      cfg.scheduler.static_batch_size = s["static_batch_size"].get<int>();
  }
  if (j.contains("model") && !j["model"].is_null())
    cfg.model = model_from_json_value(j["model"]);
  if (j.contains("engine")) {
    const auto& e = j["engine"];
    if (e.contains("ground_truth"))
      cfg.engine.ground_truth = model_from_json_value(e["ground_truth"]);
    if (e.contains("prefill_rate"))
      cfg.engine.prefill_rate = e["prefill_rate"].get<double>();
  }
  if (j.contains("horizon") && !j["horizon"].is_null())
    cfg.horizon = j["horizon"].get<double>();
  if (j.contains("repeats")) cfg.repeats = j["repeats"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  return cfg;
}

std::string to_json(const SimConfig& config) {
  nlohmann::json j;
  j["workload"]["mix"] = config.workload.mix.proportions;
  j["workload"]["rps"] = config.workload.rps;
  j["workload"]["num_requests"] = config.workload.num_requests;
  j["workload"]["seed"] = config.workload.seed;
  j["workload"]["length_jitter"] = config.workload.length_jitter;
  j["scheduler"]["mode"] = to_string(config.scheduler.mode);
  j["scheduler"]["window_size"] = config.scheduler.window_size;
  j["scheduler"]["tick"] = config.scheduler.tick;
  j["scheduler"]["static_batch_size"] = config.scheduler.static_batch_size;
  j["model"] = config.model ? model_to_json_value(*config.model)
                            : nlohmann::json();
  j["engine"]["ground_truth"] = model_to_json_value(config.engine.ground_truth);
  j["engine"]["prefill_rate"] = config.engine.prefill_rate;
  j["horizon"] = config.horizon ? nlohmann::json(*config.horizon)
                                : nlohmann::json();
  j["repeats"] = config.repeats;
  j["seed"] = config.seed;
  return j.dump(2) + "\n";
}

}  // namespace saber
