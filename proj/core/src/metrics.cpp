// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#include "saber/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "saber/text_io.hpp"

namespace saber {

RunRecord make_record(const Request& request) {
  RunRecord rec;
  rec.request_id = request.id;
  rec.task = request.task;
  rec.arrival_time = request.arrival_time;
  rec.admit_time = request.admit_time;
  rec.completion_time = request.completion_time;
  rec.sla = request.sla_seconds;
  rec.met_sla = request.completion_time.has_value() &&
                *request.completion_time - request.arrival_time <=
                    request.sla_seconds;
  rec.final_tier = request.demoted ? "low" : "high";
  return rec;
}

double goodput(const std::vector<RunRecord>& records) {
  if (records.empty()) throw std::domain_error("goodput: no records");
  std::size_t met = 0;
  for (const auto& r : records) met += r.met_sla ? 1 : 0;
  return static_cast<double>(met) / static_cast<double>(records.size());
}

std::vector<double> ratio_to_sla(const std::vector<RunRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.completion_time)
      out.push_back((*r.completion_time - r.arrival_time) / r.sla);
  }
  return out;
}

double cv(const std::vector<double>& values) {
  if (values.empty()) throw std::domain_error("cv: no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (mean == 0.0) throw std::domain_error("cv: zero mean");
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());  // population variance
  return std::sqrt(var) / mean;
}

std::vector<std::pair<double, double>> cdf(
    const std::vector<RunRecord>& records, std::string_view task) {
  std::vector<double> latencies;
  int issued = 0;
  for (const auto& r : records) {
    if (r.task != task) continue;
    ++issued;
    if (r.completion_time)
      latencies.push_back(*r.completion_time - r.arrival_time);
  }
  std::vector<std::pair<double, double>> points;
  if (issued == 0 || latencies.empty()) return points;
  std::sort(latencies.begin(), latencies.end());
  std::size_t seen = 0;
  for (std::size_t i = 0; i < latencies.size(); ++i) {
    ++seen;
    const bool last_of_tie =
        i + 1 == latencies.size() || latencies[i + 1] != latencies[i];
    if (last_of_tie) {
      points.emplace_back(latencies[i], static_cast<double>(seen) /
                                            static_cast<double>(issued));
    }
  }
  return points;
}

double goodput_from_cdfs(const std::vector<RunRecord>& records) {
  if (records.empty()) throw std::domain_error("goodput_from_cdfs: no records");
  std::map<std::string, std::pair<int, double>> tasks;  // issued, sla
  for (const auto& r : records) {
    auto& slot = tasks[r.task];
    slot.first += 1;
    slot.second = r.sla;
  }
  double weighted = 0.0;
  for (const auto& [task, info] : tasks) {
    const auto points = cdf(records, task);
    double mass = 0.0;
    for (const auto& [latency, fraction] : points) {
      if (latency <= info.second) mass = fraction;  // points are sorted
    }
    weighted += mass * info.first;
  }
  return weighted / static_cast<double>(records.size());
}

MetricsReport compute_metrics(const std::vector<RunRecord>& records) {
  MetricsReport report;
  report.goodput = goodput(records);

  const std::vector<double> ratios = ratio_to_sla(records);
  if (ratios.empty()) {
    report.ratio_mean = report.ratio_std = report.cv =
        std::numeric_limits<double>::quiet_NaN();
  } else {
    double mean = 0.0;
    for (double v : ratios) mean += v;
    mean /= static_cast<double>(ratios.size());
    double var = 0.0;
    for (double v : ratios) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ratios.size());
    report.ratio_mean = mean;
    report.ratio_std = std::sqrt(var);
    report.cv = mean == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                            : report.ratio_std / mean;
  }

  for (const auto& r : records) report.per_task[r.task].issued += 1;
  for (auto& [task, tm] : report.per_task) {
    int met = 0, issued = 0;
    for (const auto& r : records) {
      if (r.task != task) continue;
      ++issued;
      met += r.met_sla ? 1 : 0;
    }
    tm.goodput = static_cast<double>(met) / static_cast<double>(issued);
    tm.cdf_points = cdf(records, task);
  }
  return report;
}

std::string to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["goodput"] = report.goodput;
  j["ratio_mean"] = report.ratio_mean;
  j["ratio_std"] = report.ratio_std;
  j["cv"] = report.cv;
  nlohmann::json per_task = nlohmann::json::object();
  for (const auto& [task, tm] : report.per_task) {
    nlohmann::json t;
    t["issued"] = tm.issued;
    t["goodput"] = tm.goodput;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& [latency, fraction] : tm.cdf_points)
      pts.push_back({latency, fraction});
    t["cdf_points"] = pts;
    per_task[task] = t;
  }
  j["per_task"] = per_task;
  return j.dump(2) + "\n";
}

std::string records_to_csv(const std::vector<RunRecord>& records) {
  std::string out =
      "request_id,task,arrival_time,admit_time,completion_time,sla,met_sla,"
      "final_tier\n";
  for (const auto& r : records) {
    out += csv_row({std::to_string(r.request_id), r.task,
                    format_double(r.arrival_time),
                    r.admit_time ? format_double(*r.admit_time) : "",
                    r.completion_time ? format_double(*r.completion_time) : "",
                    format_double(r.sla), r.met_sla ? "1" : "0",
                    r.final_tier});
  }
  return out;
}

std::vector<RunRecord> records_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || csv_split(line).size() != 8)
    throw std::invalid_argument("records csv: bad header");
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 8) throw std::invalid_argument("records csv: bad row");
    RunRecord r;
    r.request_id = std::stoull(f[0]);
    r.task = f[1];
    r.arrival_time = std::stod(f[2]);
    if (!f[3].empty()) r.admit_time = std::stod(f[3]);
    if (!f[4].empty()) r.completion_time = std::stod(f[4]);
    r.sla = std::stod(f[5]);
    r.met_sla = f[6] == "1";
    r.final_tier = f[7];
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace saber
