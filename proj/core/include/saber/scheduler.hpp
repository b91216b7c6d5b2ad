// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "saber/engine.hpp"
#include "saber/estimator.hpp"
#include "saber/types.hpp"

namespace saber {

// Requests are owned by the caller in a vector indexed by request id.
using RequestStore = std::vector<Request>;

// Two priority tiers: `high` in arrival order, `low` in demotion order.
// A request sits in at most one tier; demotion happens exactly when its
// required speed exceeds what the model says the engine can ever deliver.
struct TwoTierQueue {
  std::deque<std::uint64_t> high;
  std::deque<std::uint64_t> low;
};

// Required speeds of the currently executing requests, snapshotted at their
// admission instants. Keys are exactly the gate-admitted (high-tier) active
// requests; low-tier admissions never enter the ledger.
struct ActiveLedger {
  std::map<std::uint64_t, double> entries;

  // True when pred dips below any recorded requirement.
  bool violates(double pred) const {
    for (const auto& [id, speed] : entries) {
      if (pred < speed) return true;
    }
    return false;
  }
};

enum class DecisionKind { AdmitHigh, AdmitLow, RejectOwn, RejectActive, Demote };

struct Decision {
  double time = 0.0;
  std::uint64_t request_id = 0;
  DecisionKind kind = DecisionKind::AdmitHigh;
  int load_before = 0;  // engine load when the decision was made
  std::optional<double> pred_speed;  // f(load_before+1); f(1) for demotions
  std::optional<double> req_speed;
};

// Admission control: windowed sampling over the high-tier head, a predictive
// gate against the request's own requirement and every ledger entry, and
// best-effort low-tier service when the high tier is empty.
class SaberScheduler {
 public:
  SaberScheduler(SpeedModel model, SchedulerConfig cfg, std::uint64_t seed);

  // Arrival entry point; requests must be in state queued_high.
  // Throws std::logic_error on re-enqueue.
  void enqueue(const Request& request);

  // Demotes every high-tier request whose required speed now exceeds
  // max_speed(model) (or whose deadline has passed); relative order is kept
  // in both tiers. `engine_load` only annotates the decision trace.
  void refresh_tiers(RequestStore& store, double now, int engine_load);

  // One admission step: admits at most one request into the engine.
  // High tier: shuffle the first min(window_size, |high|) positions, admit
  // the first candidate passing both gate conditions, recording its required
  // speed in the ledger. Low tier (only when high is empty): admit the head
  // unconditionally with no ledger entry.
  std::optional<std::uint64_t> admission_step(RequestStore& store,
                                              Engine& engine, double now);

  // Ledger hygiene; call for every engine completion. Throws std::logic_error
  // for ids that are neither ledgered nor low-tier active.
  void on_completion(std::uint64_t request_id);

  const std::vector<Decision>& decisions() const { return decisions_; }
  const TwoTierQueue& queue() const { return queue_; }
  const ActiveLedger& ledger() const { return ledger_; }
  const SpeedModel& model() const { return model_; }

 private:
  SpeedModel model_;
  SchedulerConfig cfg_;
  std::mt19937_64 rng_;
  TwoTierQueue queue_;
  ActiveLedger ledger_;
  std::set<std::uint64_t> enqueued_;
  std::set<std::uint64_t> low_active_;
  std::vector<Decision> decisions_;
};

// Fixed-concurrency baseline: FIFO admission up to the cap, no demotion, no
// speed checks.
class StaticScheduler {
 public:
  explicit StaticScheduler(SchedulerConfig cfg);

  void enqueue(const Request& request);

  // Fills free slots FIFO until |active| == static_batch_size or the queue
  // empties; returns the admitted ids.
  std::vector<std::uint64_t> static_step(RequestStore& store, Engine& engine,
                                         double now);

  void on_completion(std::uint64_t request_id);

  const std::vector<Decision>& decisions() const { return decisions_; }
  const TwoTierQueue& queue() const { return queue_; }

 private:
  SchedulerConfig cfg_;
  TwoTierQueue queue_;
  std::set<std::uint64_t> enqueued_;
  std::vector<Decision> decisions_;
};

// Decision-trace CSV: time, request_id, decision, load_before, pred_speed,
// req_speed (empty fields where a speed was not evaluated).
std::string decisions_to_csv(const std::vector<Decision>& decisions);

const char* to_string(DecisionKind kind);

}  // namespace saber
