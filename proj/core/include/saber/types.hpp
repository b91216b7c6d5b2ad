// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace saber {

// One task class: average prompt/response lengths and the latency SLA a
// request of this class must meet end to end.
struct TaskProfile {
  std::string name;
  int avg_input_tokens = 1;   // >= 1
  int avg_output_tokens = 1;  // >= 1
  double sla_seconds = 1.0;   // > 0
};

// The four built-in task classes, in catalog order.
const std::vector<TaskProfile>& task_catalog();

// Throws std::out_of_range for unknown names.
const TaskProfile& find_task(std::string_view name);

// Task-name -> fraction; fractions sum to 1 within 1e-9.
struct WorkloadMix {
  std::map<std::string, double> proportions;
};

// Built-in presets: "w1" (heavy-task majority), "w2" (light-task majority),
// "w3" (uniform). Throws std::invalid_argument for other ids.
WorkloadMix preset_mix(std::string_view id);

// Throws std::invalid_argument when fractions are out of range, reference
// unknown tasks, or do not sum to 1.
void validate_mix(const WorkloadMix& mix);

enum class RequestState { QueuedHigh, QueuedLow, Executing, Completed };

struct Request {
  std::uint64_t id = 0;
  std::string task;
  double arrival_time = 0.0;
  int input_tokens = 1;
  int max_output_tokens = 1;
  double sla_seconds = 1.0;
  double deadline = 0.0;  // absolute; always arrival_time + sla_seconds
  double generated_tokens = 0.0;  // fluid progress in [0, max_output_tokens]
  RequestState state = RequestState::QueuedHigh;
  std::optional<double> admit_time;
  std::optional<double> completion_time;
  std::optional<double> recorded_required_speed;  // snapshot at admission
  bool demoted = false;  // ever placed in the low tier
};

// Legal transitions: queued_high -> {queued_low, executing},
// queued_low -> executing, executing -> completed. Anything else throws
// std::logic_error; simulations never take a forbidden edge.
void transition(Request& request, RequestState next);

inline constexpr double kInfeasibleSpeed =
    std::numeric_limits<double>::infinity();

// Tokens/second the request must sustain from `now` to finish by its
// deadline: (max_output_tokens - generated_tokens) / (deadline - now).
// Returns kInfeasibleSpeed once now >= deadline; never divides by zero.
double required_speed(const Request& request, double now);

double deadline_of(double arrival, const TaskProfile& task);

enum class SchedulerMode { Saber, Static };

struct SchedulerConfig {
  SchedulerMode mode = SchedulerMode::Saber;
  int window_size = 8;           // admission window over the high-tier head
  double tick = 0.01;            // scheduler period, seconds
  int static_batch_size = 0;     // concurrency cap, static mode only
};

// Throws std::invalid_argument on window_size < 1, tick <= 0, or a static
// config without a positive cap.
void validate(const SchedulerConfig& cfg);

const char* to_string(RequestState s);
const char* to_string(SchedulerMode m);

}  // namespace saber
