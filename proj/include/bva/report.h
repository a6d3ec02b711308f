// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bva/audit.h"
#include "bva/data.h"
#include "bva/fm_probs.h"
#include "bva/mnl.h"
#include "bva/optim.h"

namespace bva {

struct ComparisonRow {
  std::string model;
  bool omitted = false;  // perturbation metrics not computable
  std::optional<double> accuracy;
  std::vector<std::optional<double>> monotonicity;  // per ComparisonTable::mono_attributes
  std::vector<std::optional<double>> vot;           // per ComparisonTable::vot_labels
  std::optional<double> leak;                       // probability, not percent

  bool operator==(const ComparisonRow&) const = default;
};

struct ComparisonTable {
  std::string dataset_tag;
  std::vector<std::string> mono_attributes;
  std::vector<std::string> vot_labels;
  std::vector<ComparisonRow> rows;

  bool operator==(const ComparisonTable&) const = default;
};

/// One row per report, in input order. VOT cells show the analytic value
/// when the model has one, otherwise the finite-difference median. Throws
/// std::invalid_argument when the dataset tags differ.
ComparisonTable compare_models(const std::vector<AuditReport>& reports);

/// Monospace table: accuracy, monotonicity and leak in percent, VOT per
/// hour, "---" for omitted or undefined cells.
std::string render_table(const ComparisonTable& table);
std::string render_machine(const ComparisonTable& table);
ComparisonTable parse_comparison(const std::string& text);

struct FmSplits {
  FMProbabilities train;
  FMProbabilities val;
  FMProbabilities test;
};

/// Supplies FM probabilities for the splits of one subsample run.
using FmProvider = std::function<FmSplits(const Splits& splits, std::uint64_t seed)>;

/// Restricts one table covering every id of the dataset to each split.
FmProvider table_provider(FMProbabilities full);
/// Synthetic FM at the given informativeness, drawn per split.
FmProvider synthetic_provider(double informativeness, double smoothing = 0.05);

struct PipelineConfig {
  std::string spec = "generic";  // preset name or JSON spec path
  std::size_t subsample_n = 10000;
  std::array<double, 3> ratios{0.70, 0.15, 0.15};
  OptimConfig stage1 = OptimConfig::stage1();
  OptimConfig stage2 = OptimConfig::stage2();
  std::size_t hidden = 16;
  AuditConfig audit;
};

struct SubsampleRun {
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double mnl_accuracy = 0.0;
  double adapter_accuracy = 0.0;
  double gain = 0.0;  // adapter minus MNL, as a fraction
  double alpha = 0.0;
  std::optional<double> mnl_monotonicity;      // lowest rate over audited attributes
  std::optional<double> adapter_monotonicity;
  std::vector<std::string> failures;           // hard-validity failures, either model

  bool operator==(const SubsampleRun&) const = default;
};

struct SubsampleSummary {
  std::string dataset_tag;
  std::vector<SubsampleRun> runs;  // in seed order as given
  double mean_gain = 0.0;
  std::optional<double> sd_gain;   // sample standard deviation
  std::optional<double> se_gain;
  std::optional<double> ci_low;    // two-sided 95% t-interval, df = runs - 1
  std::optional<double> ci_high;
  bool all_positive = false;

  bool hard_validity_ok() const;
  bool operator==(const SubsampleSummary&) const = default;
};

/// Per seed: subsample, split, Stage 1, FM lookup, Stage 2, audit of both
/// models on the test split. Throws std::invalid_argument on repeated seeds
/// or an empty seed list.
SubsampleSummary subsample_study(const Dataset& ds, const std::vector<std::uint64_t>& seeds,
                                 const PipelineConfig& cfg, const FmProvider& fm);

/// mean, sd, se and the t-interval of the given values.
void summarize_gains(SubsampleSummary& summary);

std::string render_table(const SubsampleSummary& summary);
std::string render_machine(const SubsampleSummary& summary);
SubsampleSummary parse_subsample_summary(const std::string& text);

}  // namespace bva
