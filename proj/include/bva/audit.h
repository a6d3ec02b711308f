// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bva/adapter.h"
#include "bva/data.h"
#include "bva/fm_probs.h"
#include "bva/mnl.h"

namespace bva {

enum class Capability { kPerturbable, kFixedTable };

/// Anything that maps an observation to a probability vector over its
/// alternatives. The audit only queries it; no access to internals.
class PredictFn {
 public:
  virtual ~PredictFn() = default;
  virtual std::string name() const = 0;
  virtual Capability capability() const = 0;
  virtual std::vector<double> probabilities(const Observation& obs) const = 0;

  /// log P where the model can compute it without rounding P to 0 or 1.
  /// Monotonicity comparisons use it when present.
  virtual std::optional<std::vector<double>> log_probabilities(const Observation&) const {
    return std::nullopt;
  }
  /// False when `attr` of `alt` provably cannot move the prediction for
  /// `obs` (e.g. GA-zeroed cost). Black-box models keep the default.
  virtual bool structural_effect(const Observation&, std::size_t /*alt*/,
                                 std::size_t /*attr*/) const {
    return true;
  }
  virtual std::optional<double> analytic_vot(const VotContext&) const {
    return std::nullopt;
  }
  /// Models whose monotonicity and zero leak hold by construction.
  virtual bool constructive() const { return false; }
};

class MnlPredictor : public PredictFn {
 public:
  MnlPredictor(BoundSpec spec, StructuralParams params, std::string name = "MNL");
  std::string name() const override { return name_; }
  Capability capability() const override { return Capability::kPerturbable; }
  std::vector<double> probabilities(const Observation& obs) const override;
  std::optional<std::vector<double>> log_probabilities(const Observation& obs) const override;
  bool structural_effect(const Observation& obs, std::size_t alt,
                         std::size_t attr) const override;
  std::optional<double> analytic_vot(const VotContext& ctx) const override;
  bool constructive() const override { return true; }

 private:
  BoundSpec spec_;
  StructuralParams params_;
  std::string name_;
};

/// Adapter with the FM probabilities held fixed per observation id, so a
/// perturbed observation sees the same q as the original.
class AdapterPredictor : public PredictFn {
 public:
  AdapterPredictor(AdapterModel model, FMProbabilities fm, std::string name = "");
  std::string name() const override { return name_; }
  Capability capability() const override { return Capability::kPerturbable; }
  std::vector<double> probabilities(const Observation& obs) const override;
  std::optional<std::vector<double>> log_probabilities(const Observation& obs) const override;
  bool structural_effect(const Observation& obs, std::size_t alt,
                         std::size_t attr) const override;
  std::optional<double> analytic_vot(const VotContext& ctx) const override;
  bool constructive() const override { return true; }
  const AdapterModel& model() const { return model_; }

 private:
  AdapterModel model_;
  FMProbabilities fm_;
  std::string name_;
};

/// Replays a stored probability file by observation id. Cannot answer
/// perturbed inputs.
class TablePredictor : public PredictFn {
 public:
  explicit TablePredictor(FMProbabilities fm, std::string name = "");
  std::string name() const override { return name_; }
  Capability capability() const override { return Capability::kFixedTable; }
  std::vector<double> probabilities(const Observation& obs) const override;

 private:
  FMProbabilities fm_;
  std::string name_;
};

/// Wraps a callable; used for re-queryable black boxes and in tests.
class FunctionPredictor : public PredictFn {
 public:
  using Fn = std::function<std::vector<double>(const Observation&)>;
  FunctionPredictor(std::string name, Fn fn,
                    Capability capability = Capability::kPerturbable)
      : name_(std::move(name)), fn_(std::move(fn)), capability_(capability) {}
  std::string name() const override { return name_; }
  Capability capability() const override { return capability_; }
  std::vector<double> probabilities(const Observation& obs) const override {
    return fn_(obs);
  }

 private:
  std::string name_;
  Fn fn_;
  Capability capability_;
};

/// Copy of `obs` with attrs[alt, attr] += delta.
Observation perturb(const Observation& obs, std::size_t alt, std::size_t attr,
                    double delta);
Observation perturb(const Observation& obs, const AlternativeSet& alts,
                    std::size_t alt, std::string_view attr, double delta);

/// max - min of each (alternative, attribute) over rows where the
/// alternative is available; 0 when it never is. K x A row-major.
std::vector<double> observed_ranges(const Dataset& ds);

struct ObservationFlag {
  std::int64_t id = 0;
  bool evaluated = false;  // at least one cell with a structural effect
  bool passed = true;
};

struct MonotonicityResult {
  std::string attribute;
  std::optional<double> rate;       // passing / evaluated observations
  std::optional<double> cell_rate;  // passing / evaluated (obs, alt) cells
  std::size_t observations_evaluated = 0;
  std::size_t observations_passed = 0;
  std::size_t observations_skipped = 0;  // no evaluated cell
  std::size_t cells_evaluated = 0;
  std::size_t cells_passed = 0;
  std::size_t cells_excluded = 0;  // no structural effect: must not increase
  std::size_t cells_excluded_passed = 0;
  std::size_t cells_skipped = 0;  // zero observed range
  std::vector<ObservationFlag> flags;
};

/// Raises `attr` of every available alternative by `range_fraction` of its
/// observed range and checks that the alternative's probability strictly
/// falls. Cells without structural effect (and rows with a single available
/// alternative) only need to not increase and are counted separately.
/// Throws CapabilityError for fixed-table predictors.
MonotonicityResult monotonicity_rate(const PredictFn& f, const Dataset& ds,
                                     std::string_view attr,
                                     double range_fraction = 0.01);

/// dP/dtime over dP/dcost for alternative `alt`, times 60, both slopes by
/// central differences with half-widths dt and dc; nullopt when the cost
/// response is below 1e-9 in magnitude.
std::optional<double> fd_vot(const PredictFn& f, const AlternativeSet& alts,
                             const Observation& obs, std::size_t alt, double dt,
                             double dc);

/// Mean probability over unavailable (obs, alt) cells; nullopt when every
/// alternative is always available.
std::optional<double> availability_leak(const PredictFn& f, const Dataset& ds);

/// Fraction of rows whose argmax over available alternatives (lowest index
/// wins ties) is the observed choice; nullopt on an empty dataset.
std::optional<double> accuracy(const PredictFn& f, const Dataset& ds);

struct VotContextSpec {
  std::string label;
  std::vector<std::string> alternatives;  // empty = every alternative

  bool operator==(const VotContextSpec&) const = default;
};

/// pt/dr contexts when the alternatives include pt and drive, otherwise one
/// generic context.
std::vector<VotContextSpec> default_vot_contexts(const AlternativeSet& alts);

struct AuditConfig {
  std::vector<std::string> perturb_attributes{"cost", "time"};
  double range_fraction = 0.01;
  std::vector<VotContextSpec> vot_contexts;  // empty = default_vot_contexts
  double vot_ceiling = 200.0;
  std::string dataset_tag;

  bool operator==(const AuditConfig&) const = default;
};

struct VotStats {
  std::string context;
  std::optional<double> analytic;
  std::optional<double> median;  // of finite-difference estimates
  double fraction_negative = 0.0;
  double fraction_above_ceiling = 0.0;
  std::size_t n_defined = 0;
  std::size_t n_undefined = 0;

  bool operator==(const VotStats&) const = default;
};

struct MonotonicitySummary {
  std::string attribute;
  std::optional<double> rate;
  std::optional<double> cell_rate;
  std::size_t observations_evaluated = 0;
  std::size_t cells_evaluated = 0;
  std::size_t cells_excluded = 0;
  std::size_t cells_excluded_passed = 0;
  std::size_t cells_skipped = 0;

  bool operator==(const MonotonicitySummary&) const = default;
};

struct AuditReport {
  std::string model;
  std::string dataset_tag;
  bool constructive = false;
  std::optional<double> accuracy;
  bool perturbation_omitted = false;  // fixed-table model
  std::vector<MonotonicitySummary> monotonicity;
  std::vector<VotStats> vot;
  std::optional<double> availability_leak;
  std::size_t n_evaluated = 0;
  std::size_t n_skipped = 0;
  AuditConfig config;

  /// For constructive models: monotonicity exactly 1, leak below 1e-12,
  /// analytic VOT positive. Always true for other models.
  bool hard_validity_ok() const;
  std::vector<std::string> hard_validity_failures() const;

  bool operator==(const AuditReport&) const = default;
};

AuditReport full_audit(const PredictFn& f, const Dataset& ds, const AuditConfig& cfg);

/// Machine-readable JSON form; parse(render(r)) == r.
std::string render_machine(const AuditReport& report);
AuditReport parse_audit_report(const std::string& text);

}  // namespace bva
