// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#include "saber/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "json.hpp"

namespace saber {
namespace {

double eval(ModelFamily family, const std::array<double, 3>& p, double load) {
  switch (family) {
    case ModelFamily::Usl: {
      const double denom =
          1.0 + p[1] * (load - 1.0) + p[2] * load * (load - 1.0);
      return p[0] / denom;
    }
    case ModelFamily::Logistic: {
      const double arg = std::clamp(p[1] * (load - p[2]), -700.0, 700.0);
      return p[0] / (1.0 + std::exp(arg));
    }
    case ModelFamily::Linear:
      return std::max(p[0] * load + p[1], kLinearFloor);
  }
  return 0.0;
}

double sse_of(ModelFamily family, const std::array<double, 3>& p,
              const std::vector<LoadSpeedSample>& samples) {
  double sse = 0.0;
  for (const auto& s : samples) {
    const double r = eval(family, p, s.load) - s.speed;
    sse += r * r;
  }
  return sse;
}

using Projection = std::function<void(std::array<double, 3>&)>;

struct LmOutcome {
  std::array<double, 3> params{};
  double sse = 0.0;
  bool converged = false;
};

// Damped Gauss-Newton with Marquardt diagonal scaling, numeric central-diff
// Jacobian, and projection onto the family's parameter constraints after
// every trial step.
LmOutcome levenberg_marquardt(ModelFamily family, int n_params,
                              std::array<double, 3> theta,
                              const Projection& project,
                              const std::vector<LoadSpeedSample>& samples) {
  constexpr int kMaxIter = 400;
  const int m = static_cast<int>(samples.size());

  project(theta);
  double sse = sse_of(family, theta, samples);
  double lambda = 1e-3;
  bool converged = false;

  std::vector<double> residual(m);
  std::vector<std::array<double, 3>> jac(m);

  for (int iter = 0; iter < kMaxIter; ++iter) {
    for (int i = 0; i < m; ++i)
      residual[i] = eval(family, theta, samples[i].load) - samples[i].speed;

    for (int j = 0; j < n_params; ++j) {
      const double h = 1e-6 * std::max(std::abs(theta[j]), 1e-3);
      std::array<double, 3> lo = theta, hi = theta;
      lo[j] -= h;
      hi[j] += h;
      for (int i = 0; i < m; ++i) {
        jac[i][j] = (eval(family, hi, samples[i].load) -
                     eval(family, lo, samples[i].load)) /
                    (2.0 * h);
      }
    }

    double a[3][3] = {};
    double g[3] = {};
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n_params; ++j) {
        g[j] += jac[i][j] * residual[i];
        for (int k = j; k < n_params; ++k) a[j][k] += jac[i][j] * jac[i][k];
      }
    }
    for (int j = 0; j < n_params; ++j)
      for (int k = 0; k < j; ++k) a[j][k] = a[k][j];

    bool stepped = false;
    while (lambda <= 1e12) {
      double s[3][3];
      double rhs[3];
      for (int j = 0; j < n_params; ++j) {
        for (int k = 0; k < n_params; ++k) s[j][k] = a[j][k];
        s[j][j] += lambda * std::max(a[j][j], 1e-12);
        rhs[j] = -g[j];
      }

      // Gaussian elimination with partial pivoting on the (<=3)x(<=3) system.
      int perm[3] = {0, 1, 2};
      bool singular = false;
      for (int col = 0; col < n_params; ++col) {
        int piv = col;
        for (int r = col + 1; r < n_params; ++r)
          if (std::abs(s[perm[r]][col]) > std::abs(s[perm[piv]][col])) piv = r;
        std::swap(perm[col], perm[piv]);
        const double d = s[perm[col]][col];
        if (std::abs(d) < 1e-300) {
          singular = true;
          break;
        }
        for (int r = col + 1; r < n_params; ++r) {
          const double f = s[perm[r]][col] / d;
          for (int c = col; c < n_params; ++c) s[perm[r]][c] -= f * s[perm[col]][c];
          rhs[perm[r]] -= f * rhs[perm[col]];
        }
      }
      std::array<double, 3> delta{};
      if (!singular) {
        for (int col = n_params - 1; col >= 0; --col) {
          double v = rhs[perm[col]];
          for (int c = col + 1; c < n_params; ++c)
            v -= s[perm[col]][c] * delta[c];
          delta[col] = v / s[perm[col]][col];
        }
      }

      std::array<double, 3> trial = theta;
      for (int j = 0; j < n_params; ++j) trial[j] += delta[j];
      project(trial);
      const double trial_sse =
          singular ? std::numeric_limits<double>::infinity()
                   : sse_of(family, trial, samples);

      if (trial_sse < sse) {
        double step = 0.0;
        double scale = 1.0;
        for (int j = 0; j < n_params; ++j) {
          step = std::max(step, std::abs(trial[j] - theta[j]));
          scale = std::max(scale, std::abs(trial[j]));
        }
        const double gain = sse - trial_sse;
        theta = trial;
        sse = trial_sse;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if (gain <= 1e-8 * (1.0 + sse) || step <= 1e-9 * scale)
          converged = true;
        break;
      }
      lambda *= 4.0;
    }

    if (!stepped) {
      // No descent direction at any damping: local minimum.
      converged = true;
    }
    if (converged) break;
  }

  return {theta, sse, converged};
}

std::vector<std::array<double, 3>> starting_points(
    ModelFamily family, const std::vector<LoadSpeedSample>& samples) {
  double vmax = 0.0;
  double load_lo = samples.front().load, load_hi = samples.front().load;
  for (const auto& s : samples) {
    vmax = std::max(vmax, s.speed);
    load_lo = std::min<double>(load_lo, s.load);
    load_hi = std::max<double>(load_hi, s.load);
  }
  const double mid = 0.5 * (load_lo + load_hi);

  // Load closest to half the peak speed: a direct guess for the logistic
  // midpoint L0.
  double half_load = mid;
  double half_gap = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    const double gap = std::abs(s.speed - 0.5 * vmax);
    if (gap < half_gap) {
      half_gap = gap;
      half_load = s.load;
    }
  }

  if (family == ModelFamily::Usl) {
    return {{vmax, 1e-3, 1e-6},
            {vmax, 1e-2, 1e-4},
            {vmax, 5e-2, 1e-3},
            {vmax, 2e-1, 1e-3},
            {1.1 * vmax, 5e-1, 1e-2}};
  }
  return {{1.05 * vmax, 0.02, half_load},
          {1.05 * vmax, 0.05, half_load},
          {1.05 * vmax, 0.1, half_load},
          {1.05 * vmax, 0.3, mid},
          {1.5 * vmax, 1.0, half_load}};
}

SpeedModel fit_linear(const std::vector<LoadSpeedSample>& samples) {
  const double n = static_cast<double>(samples.size());
  double mx = 0.0, my = 0.0;
  for (const auto& s : samples) {
    mx += s.load;
    my += s.speed;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& s : samples) {
    sxx += (s.load - mx) * (s.load - mx);
    sxy += (s.load - mx) * (s.speed - my);
  }
  const double a = sxy / sxx;  // sxx > 0: two distinct loads guaranteed
  const double b = my - a * mx;
  SpeedModel model{ModelFamily::Linear, {a, b, 0.0}, std::nullopt};
  if (a > 0.0)
    throw FitError("fitted linear model is increasing in load",
                   ModelFamily::Linear, model.params, sse_of(
                       ModelFamily::Linear, model.params, samples));
  return model;
}

}  // namespace

double predict(const SpeedModel& model, int load) {
  if (load < 1) throw std::domain_error("predict: load must be >= 1");
  return eval(model.family, model.params, load);
}

double max_speed(const SpeedModel& model) { return predict(model, 1); }

SpeedModel fit(const std::vector<LoadSpeedSample>& samples,
               ModelFamily family) {
  std::set<int> distinct;
  for (const auto& s : samples) distinct.insert(s.load);

  const int need_samples = family == ModelFamily::Linear ? 2 : 3;
  const int need_loads = family == ModelFamily::Linear ? 2 : 3;
  if (static_cast<int>(samples.size()) < need_samples ||
      static_cast<int>(distinct.size()) < need_loads) {
    throw FitError("too few samples or distinct loads to fit " +
                       std::string(to_string(family)),
                   family, {}, std::numeric_limits<double>::infinity());
  }

  SpeedModel model;
  if (family == ModelFamily::Linear) {
    model = fit_linear(samples);
  } else {
    double peak = 0.0;
    for (const auto& s : samples) peak = std::max(peak, s.speed);
    // Caps keep the logistic out of its unidentifiable ridge (vmax -> inf,
    // L0 -> -inf with only vmax*exp(k*L0) pinned by the data): no speed
    // model should predict far above the fastest observed request anyway.
    const Projection project =
        family == ModelFamily::Usl
            ? Projection([](std::array<double, 3>& p) {
                p[0] = std::max(p[0], 1e-9);   // v1 > 0
                p[1] = std::max(p[1], 0.0);    // sigma >= 0
                p[2] = std::max(p[2], 0.0);    // kappa >= 0
              })
            : Projection([peak](std::array<double, 3>& p) {
                p[0] = std::clamp(p[0], 1e-9, 2.0 * peak);  // vmax > 0, bounded
                p[1] = std::max(p[1], 0.0);    // k >= 0 keeps f non-increasing
                p[2] = std::clamp(p[2], -1e4, 1e4);
              });

    LmOutcome best;
    best.sse = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    for (const auto& start : starting_points(family, samples)) {
      const LmOutcome out =
          levenberg_marquardt(family, 3, start, project, samples);
      any_converged = any_converged || out.converged;
      if (out.sse < best.sse) best = out;
    }
    if (!any_converged || !std::isfinite(best.sse)) {
      throw FitError("optimizer did not converge for " +
                         std::string(to_string(family)),
                     family, best.params, best.sse);
    }
    // The amplitude (v1 / vmax) enters linearly, so an exact least-squares
    // rescale at fixed shape can only improve the fit. Shape parameters the
    // optimizer left within rounding of zero are then tried at exactly zero
    // (with the amplitude re-solved): flat data must reduce to the exact
    // mean, or the zero-variance r^2 convention scores the fit 0, not 1.
    const auto polish_amplitude = [&](std::array<double, 3> p) {
      double num = 0.0;
      double den = 0.0;
      for (const auto& s : samples) {
        const double shape = eval(family, {1.0, p[1], p[2]}, s.load);
        num += shape * s.speed;
        den += shape * shape;
      }
      if (den > 0.0 && std::isfinite(num / den)) {
        p[0] = num / den;
        project(p);
      }
      return p;
    };
    const auto consider = [&](const std::array<double, 3>& p) {
      const double sse = sse_of(family, p, samples);
      if (sse <= best.sse) {
        best.params = p;
        best.sse = sse;
      }
    };
    consider(polish_amplitude(best.params));
    for (std::size_t j = 1; j < 3; ++j) {
      if (best.params[j] != 0.0 && std::abs(best.params[j]) <= 1e-7) {
        std::array<double, 3> snapped = best.params;
        snapped[j] = 0.0;
        project(snapped);
        consider(polish_amplitude(snapped));
      }
    }
    model.family = family;
    model.params = best.params;
  }

  // usl is non-increasing by construction; sweep the others.
  if (model.family != ModelFamily::Usl) {
    double prev = predict(model, 1);
    for (int load = 2; load <= 1000; ++load) {
      const double cur = predict(model, load);
      if (cur > prev + 1e-9 * std::max(1.0, std::abs(prev))) {
        throw FitError("fitted model is not non-increasing in load",
                       model.family, model.params,
                       sse_of(model.family, model.params, samples));
      }
      prev = cur;
    }
  }

  model.fit_r2 = r_squared(model, samples);
  return model;
}

double r_squared(const SpeedModel& model,
                 const std::vector<LoadSpeedSample>& samples) {
  std::vector<double> pred, actual;
  pred.reserve(samples.size());
  actual.reserve(samples.size());
  for (const auto& s : samples) {
    pred.push_back(predict(model, s.load));
    actual.push_back(s.speed);
  }
  return r_squared_from_predictions(pred, actual);
}

double r_squared_from_predictions(const std::vector<double>& predicted,
                                  const std::vector<double>& actual) {
  if (actual.empty() || predicted.size() != actual.size())
    throw std::domain_error("r_squared: empty or mismatched inputs");
  double mean = 0.0;
  for (double y : actual) mean += y;
  mean /= static_cast<double>(actual.size());

  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < actual.size(); ++i) {
    ss_res += (predicted[i] - actual[i]) * (predicted[i] - actual[i]);
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

std::string to_json(const SpeedModel& model) {
  nlohmann::json j;
  j["family"] = to_string(model.family);
  const int n = model.family == ModelFamily::Linear ? 2 : 3;
  j["params"] = std::vector<double>(model.params.begin(),
                                    model.params.begin() + n);
  if (model.fit_r2) j["fit_r2"] = *model.fit_r2;
  return j.dump(2) + "\n";
}

SpeedModel model_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  SpeedModel model;
  model.family = family_from_string(j.at("family").get<std::string>());
  const auto params = j.at("params").get<std::vector<double>>();
  const size_t n = model.family == ModelFamily::Linear ? 2 : 3;
  if (params.size() != n)
    throw std::invalid_argument("model params: expected " + std::to_string(n) +
                                " values");
  std::copy(params.begin(), params.end(), model.params.begin());
  if (j.contains("fit_r2")) model.fit_r2 = j["fit_r2"].get<double>();
  return model;
}

const char* to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::Usl: return "usl";
    case ModelFamily::Logistic: return "logistic";
    case ModelFamily::Linear: return "linear";
  }
  return "?";
}

ModelFamily family_from_string(std::string_view name) {
  if (name == "usl") return ModelFamily::Usl;
  if (name == "logistic") return ModelFamily::Logistic;
  if (name == "linear") return ModelFamily::Linear;
  throw std::invalid_argument("unknown model family: " + std::string(name));
}

}  // namespace saber
