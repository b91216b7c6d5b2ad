// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saber/estimator.hpp"
#include "saber/types.hpp"

namespace saber {

// Engine ground truth plus the prefill cost model. prefill_rate <= 0 means
// prefill is free (zero debt).
struct EngineConfig {
  SpeedModel ground_truth{ModelFamily::Usl, {100.0, 0.05, 0.001}, {}};
  double prefill_rate = 2000.0;  // tokens/second
};

enum class EngineEventKind { Admit, DecodeStart, Complete };

struct EngineEvent {
  double time = 0.0;
  EngineEventKind kind = EngineEventKind::Admit;
  std::uint64_t request_id = 0;
  int load_after = 0;  // |active| once the event took effect
};

struct CompletionEvent {
  double time = 0.0;
  std::uint64_t request_id = 0;
  double decode_start = 0.0;
  double decode_duration = 0.0;
  double mean_decode_load = 0.0;  // time-weighted |active| over the decode window
};

// Fluid continuous-batching engine. Every admitted request first pays a
// prefill debt of input_tokens/prefill_rate seconds (occupying a batch slot),
// then generates tokens at ground_truth(L) where L = |active|, including
// slots still in prefill. Dynamics are piecewise constant between events, so
// advance_to resolves completions analytically rather than by stepping.
class Engine {
 public:
  explicit Engine(const EngineConfig& config);

  double clock() const { return clock_; }
  int observe_load() const { return static_cast<int>(active_.size()); }
  const SpeedModel& ground_truth() const { return config_.ground_truth; }

  // Pre: now == clock() and the request is queued. The request object must
  // outlive the engine's use of it (callers keep requests in stable storage).
  // Throws std::logic_error on duplicate admission or clock mismatch.
  void admit(Request& request, double now);

  // Advances to t (>= clock), returning completions in time order. Requests
  // reaching max_output_tokens leave the batch and the survivors speed up
  // from that instant. advance_to(clock()) is a no-op.
  std::vector<CompletionEvent> advance_to(double t);

  // Full event log: admit / decode_start / complete.
  const std::vector<EngineEvent>& trace() const { return trace_; }

 private:
  struct Slot {
    Request* request = nullptr;
    double prefill_left = 0.0;   // seconds of prefill debt remaining
    double decode_start = -1.0;  // clock when decoding began
    double load_time = 0.0;      // integral of L over this slot's decode time
  };

  EngineConfig config_;
  double clock_ = 0.0;
  std::vector<Slot> active_;
  std::vector<EngineEvent> trace_;
};

// Event-trace CSV: time, event, request_id, load_after.
std::string engine_trace_to_csv(const std::vector<EngineEvent>& trace);

const char* to_string(EngineEventKind kind);

}  // namespace saber
