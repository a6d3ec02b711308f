// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bva/data.h"
#include "bva/optim.h"

namespace bva {

/// A sign-constrained coefficient beta = -exp(theta) applied to one
/// attribute on a set of alternatives. Listing every alternative gives a
/// generic coefficient.
struct ConstrainedCoefficient {
  std::string name;
  std::string attribute;
  std::vector<std::string> alternatives;

  bool operator==(const ConstrainedCoefficient&) const = default;
};

/// Unconstrained socio covariate term on one alternative.
struct Interaction {
  std::string socio;
  std::string alternative;

  bool operator==(const Interaction&) const = default;
};

/// Drops the `attribute` term on `alternatives` whenever `socio` != 0
/// (the GA travel pass: holders face no marginal train or Swissmetro cost).
struct CostZeroRule {
  std::string socio;
  std::string attribute = "cost";
  std::vector<std::string> alternatives;

  bool operator==(const CostZeroRule&) const = default;
};

struct UtilitySpec {
  std::string name;
  std::vector<std::string> asc_alts;  // the omitted alternative is the reference
  std::vector<ConstrainedCoefficient> coefficients;
  std::vector<Interaction> interactions;
  std::optional<CostZeroRule> cost_zero_rule;

  bool operator==(const UtilitySpec&) const = default;

  /// ASCs on train and sm (car reference), generic time and cost, GA rule.
  static UtilitySpec swissmetro();
  /// ASCs on walk, cycle, pt (drive reference); shared active-mode time,
  /// mode-specific pt/drive time and cost.
  static UtilitySpec lpmc();
  /// ASCs on all but the last alternative; one generic coefficient per
  /// listed attribute.
  static UtilitySpec generic(const AlternativeSet& alts,
                             const std::vector<std::string>& constrained_attrs);
  static UtilitySpec preset(std::string_view name, const AlternativeSet& alts);
};

/// A UtilitySpec resolved against a dataset schema (names -> indices).
class BoundSpec {
 public:
  /// Throws SchemaError when the spec references unknown names.
  BoundSpec(UtilitySpec spec, AlternativeSet alts,
            std::vector<std::string> socio_names);
  BoundSpec(UtilitySpec spec, const Dataset& schema);

  const UtilitySpec& spec() const { return spec_; }
  const AlternativeSet& alternatives() const { return alts_; }
  const std::vector<std::string>& socio_names() const { return socio_; }
  std::size_t num_alternatives() const { return alts_.size(); }
  std::size_t num_coefficients() const { return coef_.size(); }
  std::size_t num_asc() const { return asc_alt_.size(); }
  std::size_t num_interactions() const { return inter_.size(); }
  std::size_t num_params() const {
    return num_coefficients() + num_asc() + num_interactions();
  }
  bool compatible_with(const Dataset& ds) const;

  /// True when attribute `attr` of alternative `alt` enters the utility of
  /// `obs` (some coefficient covers it and no zero rule fires).
  bool enters_utility(const Observation& obs, std::size_t alt,
                      std::size_t attr) const;

  struct Coef {
    std::size_t attr;
    std::vector<std::uint8_t> covers;  // per alternative
  };
  struct Inter {
    std::size_t socio;
    std::size_t alt;
  };
  struct ZeroRule {
    std::size_t socio;
    std::size_t attr;
    std::vector<std::uint8_t> covers;
  };
  const std::vector<Coef>& coefficients() const { return coef_; }
  const std::vector<std::size_t>& asc_alternatives() const { return asc_alt_; }
  const std::vector<Inter>& interactions() const { return inter_; }
  const std::optional<ZeroRule>& zero_rule() const { return zero_; }
  bool zero_rule_fires(const Observation& obs, std::size_t alt,
                       std::size_t attr) const;

 private:
  UtilitySpec spec_;
  AlternativeSet alts_;
  std::vector<std::string> socio_;
  std::vector<Coef> coef_;
  std::vector<std::size_t> asc_alt_;
  std::vector<Inter> inter_;
  std::optional<ZeroRule> zero_;
};

/// Raw parameters; the stored theta is the source of truth and the
/// effective coefficient is always derived as -exp(theta).
struct StructuralParams {
  std::vector<double> theta;    // aligned with spec coefficients
  std::vector<double> asc;      // aligned with spec asc_alts
  std::vector<double> w_inter;  // aligned with spec interactions

  static StructuralParams zeros(const BoundSpec& spec);
  double beta(std::size_t i) const;
  std::vector<double> flat() const;
  static StructuralParams from_flat(const BoundSpec& spec,
                                    std::span<const double> x);
  bool operator==(const StructuralParams&) const = default;
};

inline double effective_beta(double theta) { return -std::exp(theta); }

std::vector<double> structural_utility(const StructuralParams& p,
                                       const BoundSpec& spec,
                                       const Observation& obs);

/// Availability-masked softmax with a max shift. Unavailable entries are
/// exactly zero. Throws std::domain_error when nothing is available.
std::vector<double> choice_probabilities(std::span<const double> v,
                                         std::span<const std::uint8_t> avail);

/// log P_k, accurate even when P_k rounds to 1 (uses log1p over the
/// non-maximal terms). Unavailable entries are -inf.
std::vector<double> log_choice_probabilities(std::span<const double> v,
                                             std::span<const std::uint8_t> avail);

/// Sum over rows of log P_choice.
double log_likelihood(const StructuralParams& p, const BoundSpec& spec,
                      const Dataset& ds);
/// Gradient of log_likelihood, same layout as StructuralParams.
StructuralParams grad_log_likelihood(const StructuralParams& p,
                                     const BoundSpec& spec, const Dataset& ds);

/// Soft-target objective sum_i sum_k t_ik log P_ik. `targets` holds one
/// K-vector per row (zero mass on unavailable alternatives). With `grad`
/// non-empty the gradient over the flat parameter vector is accumulated.
double soft_log_likelihood(const StructuralParams& p, const BoundSpec& spec,
                           const Dataset& ds,
                           const std::vector<std::vector<double>>& targets,
                           std::span<double> grad = {});

struct ConvergenceReport {
  int iterations = 0;
  double grad_inf_norm = 0.0;
  bool converged = false;
  double train_ll = 0.0;  // total
  double val_ll = 0.0;    // total, 0 without validation rows
  double final_step = 0.0;
  std::vector<std::string> non_identified;  // coefficient/ASC names left at init
};

struct Stage1Result {
  StructuralParams params;
  ConvergenceReport report;
};

/// Stage 1: maximum likelihood over the structural parameters with the
/// correction frozen at zero. Initialisation is all-zero (beta = -1) plus
/// the optional seeded jitter.
Stage1Result fit_stage1(const Dataset& train, const Dataset& val,
                        const BoundSpec& spec,
                        const OptimConfig& cfg = OptimConfig::stage1());

/// Which time/cost ratio to report.
struct VotContext {
  // Empty = generic: a single time and cost coefficient covering every
  // alternative. Otherwise the coefficients covering this alternative.
  std::string alternative;

  static VotContext generic() { return {}; }
  static VotContext mode(std::string alt) { return {std::move(alt)}; }
  std::string label() const { return alternative.empty() ? "generic" : alternative; }
};

/// (beta_time / beta_cost) * 60, currency per hour. Throws
/// std::invalid_argument if the context lacks either coefficient.
double vot_analytic(const StructuralParams& p, const BoundSpec& spec,
                    const VotContext& context);

/// Parameter names in flat order: theta:<coef>, asc:<alt>, w:<socio>@<alt>.
std::vector<std::string> param_names(const BoundSpec& spec);

}  // namespace bva
