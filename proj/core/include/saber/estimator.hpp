// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace saber {

// One calibration observation: per-request generation speed measured while
// `load` requests shared the engine.
struct LoadSpeedSample {
  int load = 1;        // >= 1
  double speed = 1.0;  // tokens/second, > 0
};

enum class ModelFamily { Usl, Logistic, Linear };

// v̂ = f(L), the load -> per-request-speed estimate.
//   usl:      v1 / (1 + sigma*(L-1) + kappa*L*(L-1)),  params {v1, sigma, kappa}
//   logistic: vmax / (1 + exp(k*(L - L0))),            params {vmax, k, L0}
//   linear:   max(a*L + b, floor),                     params {a, b}
// Fitted models are non-increasing in L (usl by constraint v1>0, sigma>=0,
// kappa>=0; logistic by k>=0; linear checked numerically).
struct SpeedModel {
  ModelFamily family = ModelFamily::Usl;
  std::array<double, 3> params{};  // linear uses the first two slots
  std::optional<double> fit_r2;
};

// Floor for linear predictions so downstream division never sees <= 0.
inline constexpr double kLinearFloor = 1e-6;

// Defined for all integer load >= 1; throws std::domain_error below that.
double predict(const SpeedModel& model, int load);

// The engine is fastest serving a single request: predict(model, 1).
double max_speed(const SpeedModel& model);

// Thrown when fitting cannot produce an acceptable model; carries the best
// parameters seen so the caller can report how close the optimizer got.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, ModelFamily family,
           std::array<double, 3> best_params, double best_sse)
      : std::runtime_error(what),
        family(family),
        best_params(best_params),
        best_sse(best_sse) {}

  ModelFamily family;
  std::array<double, 3> best_params;
  double best_sse;
};

// Least-squares fit of one family. Linear is solved in closed form and needs
// two distinct loads; the curved families run bounded-iteration
// Levenberg-Marquardt from five deterministic starts and need three or more
// samples over three distinct loads. fit_r2 is always populated on success.
SpeedModel fit(const std::vector<LoadSpeedSample>& samples, ModelFamily family);

// 1 - SS_res/SS_tot. When SS_tot == 0 (constant target): 1 if SS_res == 0
// else 0, so constant-data fits are still comparable.
double r_squared(const SpeedModel& model,
                 const std::vector<LoadSpeedSample>& samples);
double r_squared_from_predictions(const std::vector<double>& predicted,
                                  const std::vector<double>& actual);

// JSON shape: {"family": "...", "params": [...], "fit_r2": ...}; values
// round-trip within 1e-12.
std::string to_json(const SpeedModel& model);
SpeedModel model_from_json(const std::string& text);

const char* to_string(ModelFamily family);
ModelFamily family_from_string(std::string_view name);

}  // namespace saber
