// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#include "saber/scheduler.hpp"

#include <algorithm>
#include <stdexcept>

#include "saber/text_io.hpp"

namespace saber {
namespace {

// Distinct stream from the workload generator seeded with the same value.
constexpr std::uint64_t kSchedulerSeedSalt = 0x9e3779b97f4a7c15ull;

void check_new_enqueue(std::set<std::uint64_t>& enqueued, const Request& r) {
  if (r.state != RequestState::QueuedHigh)
    throw std::logic_error("enqueue: request is not in queued_high state");
  if (!enqueued.insert(r.id).second)
    throw std::logic_error("enqueue: request already enqueued");
}

}  // namespace

SaberScheduler::SaberScheduler(SpeedModel model, SchedulerConfig cfg,
                               std::uint64_t seed)
    : model_(std::move(model)), cfg_(cfg), rng_(seed ^ kSchedulerSeedSalt) {
  validate(cfg_);
  if (cfg_.mode != SchedulerMode::Saber)
    throw std::invalid_argument("SaberScheduler requires saber mode config");
}

void SaberScheduler::enqueue(const Request& request) {
  check_new_enqueue(enqueued_, request);
  queue_.high.push_back(request.id);
}

void SaberScheduler::refresh_tiers(RequestStore& store, double now,
                                   int engine_load) {
  const double ceiling = max_speed(model_);
  std::deque<std::uint64_t> keep;
  for (const std::uint64_t id : queue_.high) {
    Request& r = store[id];
    const double need = required_speed(r, now);
    if (need > ceiling) {
      transition(r, RequestState::QueuedLow);
      queue_.low.push_back(id);
      decisions_.push_back(
          {now, id, DecisionKind::Demote, engine_load, ceiling, need});
    } else {
      keep.push_back(id);
    }
  }
  queue_.high = std::move(keep);
}

std::optional<std::uint64_t> SaberScheduler::admission_step(RequestStore& store,
                                                            Engine& engine,
                                                            double now) {
  if (!queue_.high.empty()) {
    const int window = std::min<int>(cfg_.window_size,
                                     static_cast<int>(queue_.high.size()));
    // Fisher-Yates over the first `window` queue positions.
    std::vector<int> order(window);
    for (int i = 0; i < window; ++i) order[i] = i;
    for (int i = window - 1; i > 0; --i) {
      const int j = static_cast<int>(rng_() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[i], order[j]);
    }

    const int load = engine.observe_load();
    const double pred = predict(model_, load + 1);
    for (const int pos : order) {
      const std::uint64_t id = queue_.high[pos];
      Request& r = store[id];
      const double need = required_speed(r, now);
      if (pred < need) {
        decisions_.push_back(
            {now, id, DecisionKind::RejectOwn, load, pred, need});
        continue;
      }
      if (ledger_.violates(pred)) {
        decisions_.push_back(
            {now, id, DecisionKind::RejectActive, load, pred, need});
        continue;
      }
      engine.admit(r, now);
      ledger_.entries.emplace(id, need);
      queue_.high.erase(queue_.high.begin() + pos);
      decisions_.push_back(
          {now, id, DecisionKind::AdmitHigh, load, pred, need});
      return id;
    }
    return std::nullopt;
  }

  if (!queue_.low.empty()) {
    const std::uint64_t id = queue_.low.front();
    queue_.low.pop_front();
    Request& r = store[id];
    const int load = engine.observe_load();
    const double need = required_speed(r, now);
    engine.admit(r, now);
    low_active_.insert(id);
    decisions_.push_back(
        {now, id, DecisionKind::AdmitLow, load, std::nullopt, need});
    return id;
  }
  return std::nullopt;
}

void SaberScheduler::on_completion(std::uint64_t request_id) {
  if (ledger_.entries.erase(request_id) == 1) return;
  if (low_active_.erase(request_id) == 1) return;
  throw std::logic_error("on_completion: unknown or already-completed request");
}

StaticScheduler::StaticScheduler(SchedulerConfig cfg) : cfg_(cfg) {
  validate(cfg_);
  if (cfg_.mode != SchedulerMode::Static)
    throw std::invalid_argument("StaticScheduler requires static mode config");
}

void StaticScheduler::enqueue(const Request& request) {
  check_new_enqueue(enqueued_, request);
  queue_.high.push_back(request.id);
}

std::vector<std::uint64_t> StaticScheduler::static_step(RequestStore& store,
                                                        Engine& engine,
                                                        double now) {
  std::vector<std::uint64_t> admitted;
  while (engine.observe_load() < cfg_.static_batch_size &&
         !queue_.high.empty()) {
    const std::uint64_t id = queue_.high.front();
    queue_.high.pop_front();
    const int load = engine.observe_load();
    engine.admit(store[id], now);
    decisions_.push_back({now, id, DecisionKind::AdmitHigh, load, std::nullopt,
                          std::nullopt});
    admitted.push_back(id);
  }
  return admitted;
}

void StaticScheduler::on_completion(std::uint64_t) {}

std::string decisions_to_csv(const std::vector<Decision>& decisions) {
  std::string out = "time,request_id,decision,load_before,pred_speed,req_speed\n";
  for (const auto& d : decisions) {
    out += csv_row({format_double(d.time), std::to_string(d.request_id),
                    to_string(d.kind), std::to_string(d.load_before),
                    d.pred_speed ? format_double(*d.pred_speed) : "",
                    d.req_speed ? format_double(*d.req_speed) : ""});
  }
  return out;
}

const char* to_string(DecisionKind kind) {
  switch (kind) {
    case DecisionKind::AdmitHigh: return "admit_high";
    case DecisionKind::AdmitLow: return "admit_low";
    case DecisionKind::RejectOwn: return "reject_own";
    case DecisionKind::RejectActive: return "reject_active";
    case DecisionKind::Demote: return "demote";
  }
  return "?";
}

}  // namespace saber
