// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#include "saber/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "saber/text_io.hpp"

namespace saber {
namespace {

// Boundaries within this relative distance of the nearest one fire together;
// keeps lockstep requests (identical bursts) from straggling by one ulp.
constexpr double kGroupTol = 1e-12;

}  // namespace

Engine::Engine(const EngineConfig& config) : config_(config) {
  if (max_speed(config_.ground_truth) <= 0.0)
    throw std::invalid_argument("engine ground truth must be positive");
}

void Engine::admit(Request& request, double now) {
  if (now != clock_)
    throw std::logic_error("admit: now must equal the engine clock");
  for (const auto& slot : active_) {
    if (slot.request->id == request.id)
      throw std::logic_error("admit: request already active");
  }
  transition(request, RequestState::Executing);  // throws if not queued
  request.admit_time = now;
  request.recorded_required_speed = required_speed(request, now);

  Slot slot;
  slot.request = &request;
  slot.prefill_left = config_.prefill_rate > 0.0
                          ? request.input_tokens / config_.prefill_rate
                          : 0.0;
  active_.push_back(slot);
  trace_.push_back({now, EngineEventKind::Admit, request.id, observe_load()});
  if (slot.prefill_left == 0.0) {
    active_.back().decode_start = now;
    trace_.push_back(
        {now, EngineEventKind::DecodeStart, request.id, observe_load()});
  }
}

std::vector<CompletionEvent> Engine::advance_to(double t) {
  if (t < clock_) throw std::domain_error("advance_to: time moves forward");
  std::vector<CompletionEvent> completions;

  while (clock_ < t) {
    if (active_.empty()) {
      clock_ = t;
      break;
    }
    const int load = observe_load();
    const double speed = predict(config_.ground_truth, load);

    // Next event: the closest prefill end or decode completion, capped at t.
    double dt = t - clock_;
    for (const auto& slot : active_) {
      double boundary;
      if (slot.prefill_left > 0.0) {
        boundary = slot.prefill_left;
      } else {
        const double remaining =
            slot.request->max_output_tokens - slot.request->generated_tokens;
        boundary = remaining / speed;
      }
      dt = std::min(dt, boundary);
    }
    const double group = dt * (1.0 + kGroupTol);

    for (auto& slot : active_) {
      if (slot.prefill_left > 0.0) {
        slot.prefill_left =
            slot.prefill_left <= group ? 0.0 : slot.prefill_left - dt;
      } else {
        slot.request->generated_tokens += speed * dt;
        slot.load_time += load * dt;
      }
    }
    clock_ += dt;

    // Prefill -> decode transitions at this instant.
    for (auto& slot : active_) {
      if (slot.prefill_left == 0.0 && slot.decode_start < 0.0) {
        slot.decode_start = clock_;
        trace_.push_back({clock_, EngineEventKind::DecodeStart,
                          slot.request->id, load});
      }
    }

    // Completions: anything whose remaining work fit inside this step.
    for (size_t i = 0; i < active_.size();) {
      Slot& slot = active_[i];
      Request& r = *slot.request;
      const bool done =
          slot.decode_start >= 0.0 &&
          r.generated_tokens + speed * (group - dt) >= r.max_output_tokens;
      if (!done) {
        ++i;
        continue;
      }
      r.generated_tokens = r.max_output_tokens;  // exact demand
      r.completion_time = clock_;
      transition(r, RequestState::Completed);

      CompletionEvent ev;
      ev.time = clock_;
      ev.request_id = r.id;
      ev.decode_start = slot.decode_start;
      ev.decode_duration = clock_ - slot.decode_start;
      ev.mean_decode_load = slot.load_time / ev.decode_duration;
      completions.push_back(ev);

      active_.erase(active_.begin() + static_cast<std::ptrdiff_t>(i));
      trace_.push_back(
          {clock_, EngineEventKind::Complete, ev.request_id, observe_load()});
    }
  }
  return completions;
}

std::string engine_trace_to_csv(const std::vector<EngineEvent>& trace) {
  std::string out = "time,event,request_id,load_after\n";
  for (const auto& ev : trace) {
    out += csv_row({format_double(ev.time), to_string(ev.kind),
                    std::to_string(ev.request_id),
                    std::to_string(ev.load_after)});
  }
  return out;
}

const char* to_string(EngineEventKind kind) {
  switch (kind) {
    case EngineEventKind::Admit: return "admit";
    case EngineEventKind::DecodeStart: return "decode_start";
    case EngineEventKind::Complete: return "complete";
  }
  return "?";
}

}  // namespace saber
