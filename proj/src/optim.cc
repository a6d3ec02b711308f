// SPDX-License-Identifier: Apache-2.0
#include "bva/optim.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bva/errors.h"

namespace bva {

void OptimConfig::validate() const {
  if (max_iters < 0 || !(step_size > 0.0) || !(tolerance > 0.0) ||
      early_stop_patience <= 0 || init_jitter < 0.0) {
    throw std::invalid_argument("optimizer settings out of range");
  }
}

OptimConfig OptimConfig::stage1() { return OptimConfig{}; }

OptimConfig OptimConfig::stage2() {
  OptimConfig cfg;
  cfg.max_iters = 3000;
  cfg.step_size = 0.01;
  cfg.early_stop_patience = 50;
  return cfg;
}

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;
constexpr double kMinStepFraction = 1e-9;

double inf_norm(std::span<const double> g) {
  double m = 0.0;
  for (double v : g) m = std::max(m, std::abs(v));
  return m;
}

void require_finite(double value, std::span<const double> grad, int iter) {
  if (!std::isfinite(value) ||
      !std::all_of(grad.begin(), grad.end(),
                   [](double v) { return std::isfinite(v); })) {
    throw OptimizationError(
        "non-finite objective or gradient at iteration " + std::to_string(iter),
        iter);
  }
}

}  // namespace

OptimTrace maximize(const Objective& objective, const Score& validation,
                    std::vector<double>& x, const OptimConfig& cfg,
                    StallPolicy policy) {
  cfg.validate();
  const std::size_t n = x.size();
  std::vector<double> grad(n), m(n, 0.0), v(n, 0.0);
  std::vector<bool> moved(n, false);
  OptimTrace trace;
  double step = cfg.step_size;

  const bool early_stop =
      policy == StallPolicy::kEarlyStopOnValidation && validation;
  std::vector<double> best_x = x;
  double best_score = -INFINITY;
  int stall = 0;
  double best_train = -INFINITY;
  // Adam's bias correction restarts with every step-size change.
  int t = 0;

  for (int iter = 0;; ++iter) {
    const double value = objective(x, grad);
    require_finite(value, grad, iter);
    for (std::size_t i = 0; i < n; ++i)
      if (grad[i] != 0.0) moved[i] = true;
    trace.objective = value;
    trace.grad_inf_norm = inf_norm(grad);
    trace.iterations = iter;

    if (early_stop) {
      const double score = validation(x);
      if (!std::isfinite(score)) {
        throw OptimizationError(
            "non-finite validation score at iteration " + std::to_string(iter),
            iter);
      }
      if (score > best_score) {
        best_score = score;
        best_x = x;
        trace.best_iteration = iter;
        stall = 0;
      } else if (++stall >= cfg.early_stop_patience) {
        trace.early_stopped = true;
        break;
      }
    } else if (value > best_train) {
      best_train = value;
      stall = 0;
    } else if (++stall >= cfg.early_stop_patience) {
      step *= 0.5;
      stall = 0;
      t = 0;
      std::fill(m.begin(), m.end(), 0.0);
      std::fill(v.begin(), v.end(), 0.0);
      if (step < cfg.step_size * kMinStepFraction) break;
    }

    if (trace.grad_inf_norm < cfg.tolerance) {
      trace.converged = true;
      break;
    }
    if (iter >= cfg.max_iters) break;

    ++t;
    const double c1 = 1.0 - std::pow(kBeta1, t);
    const double c2 = 1.0 - std::pow(kBeta2, t);
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      x[i] += step * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }

  if (early_stop) {
    x = best_x;
    trace.best_validation = best_score;
  } else if (validation) {
    trace.best_validation = validation(x);
  }
  trace.final_step = step;
  for (std::size_t i = 0; i < n; ++i)
    if (!moved[i]) trace.never_moved.push_back(i);
  return trace;
}

}  // namespace bva
