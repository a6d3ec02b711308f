// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "bva/fm_probs.h"
#include "bva/mnl.h"
#include "bva/optim.h"

namespace bva {

inline constexpr std::size_t kDefaultHiddenUnits = 16;

/// alpha * log q + g(q), with g a K -> H (tanh) -> K network.
struct CorrectionParams {
  double alpha = 0.0;
  std::size_t num_alternatives = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;  // H x K
  std::vector<double> b1;  // H
  std::vector<double> w2;  // K x H
  std::vector<double> b2;  // K

  /// alpha = 0, hidden layer uniform in +-0.1 from `seed`, output layer 0,
  /// so the correction starts out exactly zero.
  static CorrectionParams initial(std::size_t k, std::size_t hidden,
                                  std::uint64_t seed);
  /// Everything zero.
  static CorrectionParams zero(std::size_t k, std::size_t hidden);

  std::size_t num_params() const;
  std::vector<double> flat() const;  // alpha, w1, b1, w2, b2
  static CorrectionParams from_flat(std::size_t k, std::size_t hidden,
                                    std::span<const double> x);

  /// Network output g(q).
  std::vector<double> network(std::span<const double> q) const;
  bool operator==(const CorrectionParams&) const = default;
};

std::vector<double> correction_term(const CorrectionParams& c,
                                    std::span<const double> q);

/// SHA-256 over the exact bit patterns of theta, ASCs and interaction weights.
std::string structural_checksum(const StructuralParams& p);

struct AdapterModel {
  BoundSpec spec;
  StructuralParams structural;
  std::string checksum;  // of `structural` when it was frozen
  CorrectionParams correction;
  std::string fm_source;

  /// Throws ChecksumError if `structural` changed since it was frozen.
  void verify() const;
};

std::vector<double> adapter_utility(const AdapterModel& m, const Observation& obs,
                                    std::span<const double> q);
std::vector<double> predict(const AdapterModel& m, const Observation& obs,
                            std::span<const double> q);

struct Stage2Result {
  CorrectionParams correction;
  OptimTrace trace;
  double train_ll = 0.0;     // total, at the returned parameters
  double init_val_ll = 0.0;  // total, at alpha = 0, g = 0 (the Stage-1 model)
  double val_ll = 0.0;       // total, at the returned parameters
};

/// Stage 2: structural parameters frozen, fit alpha and g on the training
/// log-likelihood with early stopping on validation. The frozen parameters
/// are checked against `frozen_checksum` before and after fitting.
Stage2Result fit_stage2(const Dataset& train, const Dataset& val,
                        const FMProbabilities& fm_train,
                        const FMProbabilities& fm_val,
                        const StructuralParams& frozen,
                        const std::string& frozen_checksum, const BoundSpec& spec,
                        const OptimConfig& cfg = OptimConfig::stage2(),
                        std::size_t hidden = kDefaultHiddenUnits);

/// Adapter log-likelihood (total) and, when `grad` is non-empty, its
/// gradient over CorrectionParams::flat().
double adapter_log_likelihood(const AdapterModel& m, const Dataset& ds,
                              const FMProbabilities& fm, std::span<double> grad = {});

/// FM mass renormalised over each row's available alternatives (uniform
/// over the available set when the FM puts no mass there).
std::vector<std::vector<double>> soft_targets(const Dataset& ds,
                                              const FMProbabilities& fm);

/// Mean cross-entropy -1/n sum_i sum_k t_ik log P_ik.
double cross_entropy(const StructuralParams& p, const BoundSpec& spec,
                     const Dataset& ds,
                     const std::vector<std::vector<double>>& targets);

struct DistillResult {
  StructuralParams params;
  ConvergenceReport report;
  double cross_entropy = 0.0;  // mean, on train
};

/// MNL student trained on the FM's soft labels. The validation split is
/// only used for the reported hard-label log-likelihood.
DistillResult distill_mnl(const Dataset& train, const Dataset& val,
                          const FMProbabilities& fm_train, const BoundSpec& spec,
                          const OptimConfig& cfg = OptimConfig::stage1());

}  // namespace bva
