// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace bva {

struct OptimConfig {
  int max_iters = 5000;
  double step_size = 0.05;
  double tolerance = 1e-6;  // stop when the gradient infinity-norm drops below
  std::uint64_t seed = 0;
  int early_stop_patience = 50;
  double init_jitter = 0.0;  // uniform +-jitter around the initial point, seeded

  void validate() const;

  static OptimConfig stage1();
  static OptimConfig stage2();
};

/// How the step size and stopping react to a stalled score.
enum class StallPolicy {
  // Halve the step when the training objective has not improved for
  // `early_stop_patience` iterations; keep going until converged.
  kDecayOnTrainStall,
  // Stop when the validation score has not improved for
  // `early_stop_patience` iterations and return the best-scoring iterate.
  kEarlyStopOnValidation,
};

struct OptimTrace {
  int iterations = 0;
  double grad_inf_norm = 0.0;
  double objective = 0.0;
  bool converged = false;
  bool early_stopped = false;
  double final_step = 0.0;
  double best_validation = 0.0;
  int best_iteration = 0;
  // Coordinates whose gradient was exactly zero at every iteration.
  std::vector<std::size_t> never_moved;
};

/// Objective to maximize: writes the gradient into `grad`, returns the value.
using Objective = std::function<double(std::span<const double> x,
                                       std::span<double> grad)>;
using Score = std::function<double(std::span<const double> x)>;

/// Full-batch gradient ascent with adaptive moment estimation. `x` holds
/// the starting point on entry and the selected iterate on return.
/// Throws OptimizationError when the objective or gradient turns non-finite.
OptimTrace maximize(const Objective& objective, const Score& validation,
                    std::vector<double>& x, const OptimConfig& cfg,
                    StallPolicy policy);

}  // namespace bva
