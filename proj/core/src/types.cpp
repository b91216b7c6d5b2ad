// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#include "saber/types.hpp"

#include <cmath>
#include <stdexcept>

namespace saber {

const std::vector<TaskProfile>& task_catalog() {
  static const std::vector<TaskProfile> catalog = {
      {"code_qna", 186, 43, 1.0},
      {"code_generation", 463, 387, 8.0},
      {"code_summary", 31, 30, 1.0},
      {"code_translation", 670, 617, 12.0},
  };
  return catalog;
}

const TaskProfile& find_task(std::string_view name) {
  for (const auto& t : task_catalog()) {
    if (t.name == name) return t;
  }
  throw std::out_of_range("unknown task: " + std::string(name));
}

WorkloadMix preset_mix(std::string_view id) {
  if (id == "w1") {
    return {{{"code_translation", 0.4},
             {"code_generation", 0.4},
             {"code_qna", 0.1},
             {"code_summary", 0.1}}};
  }
  if (id == "w2") {
    return {{{"code_qna", 0.4},
             {"code_summary", 0.4},
             {"code_generation", 0.1},
             {"code_translation", 0.1}}};
  }
  if (id == "w3") {
    return {{{"code_qna", 0.25},
             {"code_generation", 0.25},
             {"code_summary", 0.25},
             {"code_translation", 0.25}}};
  }
  throw std::invalid_argument("unknown mix preset: " + std::string(id));
}

void validate_mix(const WorkloadMix& mix) {
  if (mix.proportions.empty())
    throw std::invalid_argument("mix has no tasks");
  double sum = 0.0;
  for (const auto& [name, frac] : mix.proportions) {
    try {
      find_task(name);
    } catch (const std::out_of_range&) {
      throw std::invalid_argument("mix references unknown task: " + name);
    }
    if (frac < 0.0 || frac > 1.0)
      throw std::invalid_argument("mix fraction out of [0,1] for " + name);
    sum += frac;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("mix fractions sum to " + std::to_string(sum));
}

void transition(Request& request, RequestState next) {
  const RequestState cur = request.state;
  const bool ok =
      (cur == RequestState::QueuedHigh && (next == RequestState::QueuedLow ||
                                           next == RequestState::Executing)) ||
      (cur == RequestState::QueuedLow && next == RequestState::Executing) ||
      (cur == RequestState::Executing && next == RequestState::Completed);
  if (!ok) {
    throw std::logic_error(std::string("forbidden request transition ") +
                           to_string(cur) + " -> " + to_string(next));
  }
  request.state = next;
  if (next == RequestState::QueuedLow) request.demoted = true;
}

double required_speed(const Request& request, double now) {
  if (now >= request.deadline) return kInfeasibleSpeed;
  const double remaining_tokens =
      static_cast<double>(request.max_output_tokens) - request.generated_tokens;
  if (remaining_tokens <= 0.0) return 0.0;
  return remaining_tokens / (request.deadline - now);
}

double deadline_of(double arrival, const TaskProfile& task) {
  return arrival + task.sla_seconds;
}

void validate(const SchedulerConfig& cfg) {
  if (cfg.window_size < 1)
    throw std::invalid_argument("window_size must be >= 1");
  if (!(cfg.tick > 0.0)) throw std::invalid_argument("tick must be > 0");
  if (cfg.mode == SchedulerMode::Static && cfg.static_batch_size < 1)
    throw std::invalid_argument("static mode requires a positive batch size");
}

const char* to_string(RequestState s) {
  switch (s) {
    case RequestState::QueuedHigh: return "queued_high";
    case RequestState::QueuedLow: return "queued_low";
    case RequestState::Executing: return "executing";
    case RequestState::Completed: return "completed";
  }
  return "?";
}

const char* to_string(SchedulerMode m) {
  return m == SchedulerMode::Saber ? "saber" : "static";
}

}  // namespace saber
