// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saber/types.hpp"

namespace saber {

// Open-loop arrival process: Poisson arrivals at `rps`, task classes drawn
// from `mix`, token lengths uniform in [avg*(1-jitter), avg*(1+jitter)].
struct WorkloadSpec {
  WorkloadMix mix;
  double rps = 1.0;
  int num_requests = 100;
  std::uint64_t seed = 0;
  double length_jitter = 0.2;  // in [0, 1)
};

// Throws std::invalid_argument on rps <= 0, num_requests < 1, jitter outside
// [0, 1), or an invalid mix.
void validate(const WorkloadSpec& spec);

// Deterministic in spec (one mt19937_64 stream; fixed draw order per request:
// gap, task, input length, output length). Arrival times are strictly
// increasing; a zero-width gap is bumped by one microsecond. Request ids are
// 0..n-1 in arrival order.
std::vector<Request> generate(const WorkloadSpec& spec);

// The request-rate grid used by the experiment sweeps: 1..10, 15, 20.
const std::vector<double>& default_rps_sweep();

// Trace round trip, so one workload can be replayed across schedulers.
// Columns: id, task, arrival_time, input_tokens, output_tokens.
std::string trace_to_csv(const std::vector<Request>& requests);
std::vector<Request> trace_from_csv(const std::string& text);

}  // namespace saber
