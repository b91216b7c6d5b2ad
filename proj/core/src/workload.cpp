// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#include "saber/workload.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "saber/text_io.hpp"

namespace saber {
namespace {

// Uniform in [0, 1) from the top 53 bits; keeps the stream layout independent
// of the standard library's distribution implementations.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int jittered_length(std::mt19937_64& rng, int avg, double jitter) {
  const double lo = avg * (1.0 - jitter);
  const double hi = avg * (1.0 + jitter);
  const double v = lo + uniform01(rng) * (hi - lo);
  return std::max(1, static_cast<int>(std::llround(v)));
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
  return *last;  // u landed in the rounding gap at the top
}

}  // namespace

void validate(const WorkloadSpec& spec) {
  if (!(spec.rps > 0.0)) throw std::invalid_argument("rps must be > 0");
  if (spec.num_requests < 1)
    throw std::invalid_argument("num_requests must be >= 1");
  if (spec.length_jitter < 0.0 || spec.length_jitter >= 1.0)
    throw std::invalid_argument("length_jitter must be in [0, 1)");
  validate_mix(spec.mix);
}

std::vector<Request> generate(const WorkloadSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::vector<Request> out;
  out.reserve(spec.num_requests);

  double t = 0.0;
  for (int i = 0; i < spec.num_requests; ++i) {
    const double gap = -std::log(1.0 - uniform01(rng)) / spec.rps;
    double arrival = t + gap;
    if (!(arrival > t)) arrival = t + 1e-6;  // strict increase
    t = arrival;

    const TaskProfile& task = sample_task(rng, spec.mix);
    Request r;
    r.id = static_cast<std::uint64_t>(i);
    r.task = task.name;
    r.arrival_time = arrival;
    r.input_tokens = jittered_length(rng, task.avg_input_tokens,
                                     spec.length_jitter);
    r.max_output_tokens = jittered_length(rng, task.avg_output_tokens,
                                          spec.length_jitter);
    r.sla_seconds = task.sla_seconds;
    r.deadline = deadline_of(arrival, task);
    out.push_back(std::move(r));
  }
  return out;
}

const std::vector<double>& default_rps_sweep() {
  static const std::vector<double> grid = {1, 2, 3, 4, 5, 6,
                                           7, 8, 9, 10, 15, 20};
  return grid;
}

std::string trace_to_csv(const std::vector<Request>& requests) {
  std::string out = "id,task,arrival_time,input_tokens,output_tokens\n";
  for (const auto& r : requests) {
    out += csv_row({std::to_string(r.id), r.task, format_double(r.arrival_time),
                    std::to_string(r.input_tokens),
                    std::to_string(r.max_output_tokens)});
  }
  return out;
}

std::vector<Request> trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      csv_split(line) != std::vector<std::string>{"id", "task", "arrival_time",
                                                  "input_tokens",
                                                  "output_tokens"}) {
    throw std::invalid_argument("trace csv: bad header");
  }
  std::vector<Request> out;
  double prev_arrival = -1.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 5) throw std::invalid_argument("trace csv: bad row");
    const TaskProfile* task_ptr = nullptr;
    try {
      task_ptr = &find_task(f[1]);
    } catch (const std::out_of_range&) {
      throw std::invalid_argument("trace csv: unknown task " + f[1]);
    }
    const TaskProfile& task = *task_ptr;
    Request r;
    r.id = std::stoull(f[0]);
    if (r.id != out.size())
      throw std::invalid_argument("trace csv: ids must be 0..n-1 in order");
    r.task = task.name;
    r.arrival_time = std::stod(f[2]);
    if (!(r.arrival_time > prev_arrival))
      throw std::invalid_argument("trace csv: arrivals must increase");
    prev_arrival = r.arrival_time;
    r.input_tokens = std::stoi(f[3]);
    r.max_output_tokens = std::stoi(f[4]);
    if (r.input_tokens < 1 || r.max_output_tokens < 1)
      throw std::invalid_argument("trace csv: token counts must be >= 1");
    r.sla_seconds = task.sla_seconds;
    r.deadline = deadline_of(r.arrival_time, task);
    out.push_back(std::move(r));
  }
  if (out.empty()) throw std::invalid_argument("trace csv: no rows");
  return out;
}

}  // namespace saber
