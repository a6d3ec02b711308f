// SPDX-License-Identifier: Apache-2.0
#include "bva/audit.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "bva/errors.h"

namespace bva {

MnlPredictor::MnlPredictor(BoundSpec spec, StructuralParams params, std::string name)
    : spec_(std::move(spec)), params_(std::move(params)), name_(std::move(name)) {}

std::vector<double> MnlPredictor::probabilities(const Observation& obs) const {
  return choice_probabilities(structural_utility(params_, spec_, obs), obs.avail);
}

std::optional<std::vector<double>> MnlPredictor::log_probabilities(
    const Observation& obs) const {
  return log_choice_probabilities(structural_utility(params_, spec_, obs), obs.avail);
}

bool MnlPredictor::structural_effect(const Observation& obs, std::size_t alt,
                                     std::size_t attr) const {
  return spec_.enters_utility(obs, alt, attr);
}

std::optional<double> MnlPredictor::analytic_vot(const VotContext& ctx) const {
  try {
    return vot_analytic(params_, spec_, ctx);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

AdapterPredictor::AdapterPredictor(AdapterModel model, FMProbabilities fm, std::string name)
    : model_(std::move(model)), fm_(std::move(fm)), name_(std::move(name)) {
  model_.verify();
  if (name_.empty()) name_ = "Adapt+" + model_.fm_source;
}

std::vector<double> AdapterPredictor::probabilities(const Observation& obs) const {
  return predict(model_, obs, fm_.at(obs.id));
}

std::optional<std::vector<double>> AdapterPredictor::log_probabilities(
    const Observation& obs) const {
  return log_choice_probabilities(adapter_utility(model_, obs, fm_.at(obs.id)), obs.avail);
}

bool AdapterPredictor::structural_effect(const Observation& obs, std::size_t alt,
                                         std::size_t attr) const {
  return model_.spec.enters_utility(obs, alt, attr);
}

std::optional<double> AdapterPredictor::analytic_vot(const VotContext& ctx) const {
  try {
    return vot_analytic(model_.structural, model_.spec, ctx);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

TablePredictor::TablePredictor(FMProbabilities fm, std::string name)
    : fm_(std::move(fm)), name_(std::move(name)) {
  if (name_.empty()) name_ = fm_.source_tag;
}

std::vector<double> TablePredictor::probabilities(const Observation& obs) const {
  return fm_.at(obs.id);
}

Observation perturb(const Observation& obs, std::size_t alt, std::size_t attr,
                    double delta) {
  if (alt >= obs.num_alternatives() || attr >= obs.num_attributes) {
    throw std::out_of_range("perturb: alternative or attribute out of range");
  }
  Observation out = obs;
  out.attr(alt, attr) += delta;
  return out;
}

Observation perturb(const Observation& obs, const AlternativeSet& alts,
                    std::size_t alt, std::string_view attr, double delta) {
  const auto a = alts.attribute_index(attr);
  if (!a) throw std::invalid_argument("perturb: unknown attribute '" + std::string(attr) + "'");
  return perturb(obs, alt, *a, delta);
}

std::vector<double> observed_ranges(const Dataset& ds) {
  const std::size_t k = ds.alt_set.size();
  const std::size_t a = ds.alt_set.num_attributes();
  std::vector<double> lo(k * a, std::numeric_limits<double>::infinity());
  std::vector<double> hi(k * a, -std::numeric_limits<double>::infinity());
  for (const auto& r : ds.rows)
    for (std::size_t alt = 0; alt < k; ++alt) {
      if (!r.available(alt)) continue;
      for (std::size_t j = 0; j < a; ++j) {
        lo[alt * a + j] = std::min(lo[alt * a + j], r.attr(alt, j));
        hi[alt * a + j] = std::max(hi[alt * a + j], r.attr(alt, j));
      }
    }
  std::vector<double> range(k * a, 0.0);
  for (std::size_t i = 0; i < k * a; ++i)
    if (hi[i] >= lo[i]) range[i] = hi[i] - lo[i];
  return range;
}

namespace {

std::vector<double> checked_probabilities(const PredictFn& f, const Observation& obs) {
  auto p = f.probabilities(obs);
  bool ok = p.size() == obs.num_alternatives();
  double sum = 0.0;
  for (double v : p) {
    ok = ok && std::isfinite(v) && v >= 0.0 && v <= 1.0;
    sum += v;
  }
  if (!ok || std::abs(sum - 1.0) > kProbSumTolerance) {
    throw ValidationError("model '" + f.name() + "' returned an invalid probability vector",
                          {{0, obs.id, "invalid probability vector"}});
  }
  return p;
}

// Scores compared by the monotonicity check: log P when available,
// otherwise P itself (same order either way).
std::vector<double> scores(const PredictFn& f, const Observation& obs) {
  auto p = checked_probabilities(f, obs);
  if (auto lp = f.log_probabilities(obs)) return *lp;
  return p;
}

void require_perturbable(const PredictFn& f, std::string_view what) {
  if (f.capability() == Capability::kFixedTable) {
    throw CapabilityError(std::string(what) + ": model '" + f.name() +
                          "' is a fixed probability table and cannot answer "
                          "perturbed inputs");
  }
}

std::size_t require_attribute(const AlternativeSet& alts, std::string_view attr) {
  const auto a = alts.attribute_index(attr);
  if (!a) throw std::invalid_argument("unknown attribute '" + std::string(attr) + "'");
  return *a;
}

}  // namespace

MonotonicityResult monotonicity_rate(const PredictFn& f, const Dataset& ds,
                                     std::string_view attr, double range_fraction) {
  require_perturbable(f, "monotonicity_rate");
  const std::size_t a = require_attribute(ds.alt_set, attr);
  const std::size_t na = ds.alt_set.num_attributes();
  const auto ranges = observed_ranges(ds);

  MonotonicityResult res;
  res.attribute = std::string(attr);
  res.flags.reserve(ds.size());
  for (const auto& obs : ds.rows) {
    ObservationFlag flag{obs.id, false, true};
    const auto base = scores(f, obs);
    const bool single = obs.num_available() == 1;
    for (std::size_t alt = 0; alt < obs.num_alternatives(); ++alt) {
      if (!obs.available(alt)) continue;
      const double delta = range_fraction * ranges[alt * na + a];
      if (!(delta > 0.0)) {
        ++res.cells_skipped;
        continue;
      }
      const auto after = scores(f, perturb(obs, alt, a, delta));
      if (single || !f.structural_effect(obs, alt, a)) {
        ++res.cells_excluded;
        if (after[alt] <= base[alt]) {
          ++res.cells_excluded_passed;
        } else {
          flag.passed = false;
        }
        continue;
      }
      flag.evaluated = true;
      ++res.cells_evaluated;
      if (after[alt] < base[alt]) {
        ++res.cells_passed;
      } else {
        flag.passed = false;
      }
    }
    if (flag.evaluated) {
      ++res.observations_evaluated;
      if (flag.passed) ++res.observations_passed;
    } else {
      ++res.observations_skipped;
    }
    res.flags.push_back(flag);
  }
  if (res.observations_evaluated > 0) {
    res.rate = static_cast<double>(res.observations_passed) /
               static_cast<double>(res.observations_evaluated);
    res.cell_rate = static_cast<double>(res.cells_passed) /
                    static_cast<double>(res.cells_evaluated);
  }
  return res;
}

std::optional<double> fd_vot(const PredictFn& f, const AlternativeSet& alts,
                             const Observation& obs, std::size_t alt, double dt,
                             double dc) {
  require_perturbable(f, "fd_vot");
  if (!(dt > 0.0) || !(dc > 0.0)) {
    throw std::invalid_argument("fd_vot: dt and dc must be positive");
  }
  const std::size_t time = require_attribute(alts, "time");
  const std::size_t cost = require_attribute(alts, "cost");
  checked_probabilities(f, obs);
  // Symmetric differences: the one-sided version is biased by O(delta),
  // about 1.5% for an MNL at 1%-of-range steps when P is near 0 or 1.
  auto slope = [&](std::size_t attr, double d) {
    const double up = checked_probabilities(f, perturb(obs, alt, attr, d))[alt];
    const double down = checked_probabilities(f, perturb(obs, alt, attr, -d))[alt];
    return (up - down) / (2.0 * d);
  };
  const double time_slope = slope(time, dt);
  const double cost_slope = slope(cost, dc);
  if (std::abs(cost_slope) < 1e-9) return std::nullopt;
  return time_slope / cost_slope * 60.0;
}

std::optional<double> availability_leak(const PredictFn& f, const Dataset& ds) {
  double sum = 0.0;
  std::size_t cells = 0;
  for (const auto& obs : ds.rows) {
    if (obs.num_available() == obs.num_alternatives()) continue;
    const auto p = checked_probabilities(f, obs);
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (obs.available(k)) continue;
      sum += p[k];
      ++cells;
    }
  }
  if (cells == 0) return std::nullopt;
  return sum / static_cast<double>(cells);
}

std::optional<double> accuracy(const PredictFn& f, const Dataset& ds) {
  if (ds.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (const auto& obs : ds.rows) {
    const auto p = checked_probabilities(f, obs);
    std::size_t best = p.size();
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (obs.available(k) && (best == p.size() || p[k] > p[best])) best = k;
    }
    if (best == obs.choice) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

std::vector<VotContextSpec> default_vot_contexts(const AlternativeSet& alts) {
  if (alts.index_of("pt") && alts.index_of("drive")) {
    return {{"pt", {"pt"}}, {"dr", {"drive"}}};
  }
  return {{"generic", {}}};
}

bool AuditReport::hard_validity_ok() const { return hard_validity_failures().empty(); }

std::vector<std::string> AuditReport::hard_validity_failures() const {
  std::vector<std::string> out;
  if (!constructive) return out;
  for (const auto& m : monotonicity) {
    if (m.rate && *m.rate != 1.0) out.push_back("monotonicity(" + m.attribute + ") < 1");
    if (m.cells_excluded_passed != m.cells_excluded)
      out.push_back("monotonicity(" + m.attribute + ") excluded cell increased");
  }
  if (availability_leak && !(*availability_leak < 1e-12)) {
    out.push_back("availability leak >= 1e-12");
  }
  for (const auto& v : vot)
    if (v.analytic && !(*v.analytic > 0.0)) out.push_back("VOT(" + v.context + ") <= 0");
  return out;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

VotContext analytic_context(const VotContextSpec& spec, const AlternativeSet& alts) {
  if (spec.alternatives.empty() || spec.alternatives.size() == alts.size()) {
    return VotContext::generic();
  }
  return VotContext::mode(spec.alternatives.front());
}

}  // namespace

AuditReport full_audit(const PredictFn& f, const Dataset& ds, const AuditConfig& cfg) {
  AuditReport rep;
  rep.model = f.name();
  rep.dataset_tag = cfg.dataset_tag;
  rep.constructive = f.constructive();
  rep.config = cfg;
  if (rep.config.vot_contexts.empty()) {
    rep.config.vot_contexts = default_vot_contexts(ds.alt_set);
  }
  rep.perturbation_omitted = f.capability() == Capability::kFixedTable;

  for (const auto& ctx : rep.config.vot_contexts) {
    VotStats s;
    s.context = ctx.label;
    s.analytic = f.analytic_vot(analytic_context(ctx, ds.alt_set));
    rep.vot.push_back(s);
  }
  if (ds.empty()) return rep;

  rep.accuracy = accuracy(f, ds);
  rep.availability_leak = availability_leak(f, ds);
  rep.n_evaluated = ds.size();
  if (rep.perturbation_omitted) return rep;

  std::vector<std::uint8_t> any_evaluated(ds.size(), 0);
  for (const auto& attr : cfg.perturb_attributes) {
    if (!ds.alt_set.attribute_index(attr)) continue;
    const auto m = monotonicity_rate(f, ds, attr, cfg.range_fraction);
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (m.flags[i].evaluated) any_evaluated[i] = 1;
    rep.monotonicity.push_back({m.attribute, m.rate, m.cell_rate, m.observations_evaluated,
                                m.cells_evaluated, m.cells_excluded,
                                m.cells_excluded_passed, m.cells_skipped});
  }
  if (!rep.monotonicity.empty()) {
    rep.n_skipped = static_cast<std::size_t>(
        std::count(any_evaluated.begin(), any_evaluated.end(), 0));
    rep.n_evaluated = ds.size() - rep.n_skipped;
  }

  const auto time = ds.alt_set.attribute_index("time");
  const auto cost = ds.alt_set.attribute_index("cost");
  if (!time || !cost) return rep;
  const std::size_t na = ds.alt_set.num_attributes();
  const auto ranges = observed_ranges(ds);
  for (std::size_t c = 0; c < rep.config.vot_contexts.size(); ++c) {
    const auto& ctx = rep.config.vot_contexts[c];
    std::vector<std::size_t> alts;
    if (ctx.alternatives.empty()) {
      for (std::size_t k = 0; k < ds.alt_set.size(); ++k) alts.push_back(k);
    } else {
      for (const auto& name : ctx.alternatives) {
        if (auto k = ds.alt_set.index_of(name)) alts.push_back(*k);
      }
    }
    std::vector<double> values;
    auto& stats = rep.vot[c];
    for (const auto& obs : ds.rows)
      for (auto k : alts) {
        if (!obs.available(k)) continue;
        const double dt = cfg.range_fraction * ranges[k * na + *time];
        const double dc = cfg.range_fraction * ranges[k * na + *cost];
        if (!(dt > 0.0) || !(dc > 0.0)) {
          ++stats.n_undefined;
          continue;
        }
        if (auto v = fd_vot(f, ds.alt_set, obs, k, dt, dc)) {
          values.push_back(*v);
        } else {
          ++stats.n_undefined;
        }
      }
    stats.n_defined = values.size();
    if (values.empty()) continue;
    const double n = static_cast<double>(values.size());
    stats.fraction_negative =
        static_cast<double>(std::count_if(values.begin(), values.end(),
                                          [](double v) { return v < 0.0; })) / n;
    stats.fraction_above_ceiling =
        static_cast<double>(std::count_if(values.begin(), values.end(), [&](double v) {
          return v > cfg.vot_ceiling;
        })) / n;
    stats.median = median(std::move(values));
  }
  return rep;
}

// ---- machine-readable form --------------------------------------------------

namespace {

using nlohmann::json;

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

std::string render_machine(const AuditReport& r) {
  json j;
  j["format_version"] = 1;
  j["model"] = r.model;
  j["dataset_tag"] = r.dataset_tag;
  j["constructive"] = r.constructive;
  j["accuracy"] = opt(r.accuracy);
  j["perturbation_omitted"] = r.perturbation_omitted;
  j["monotonicity"] = json::array();
  for (const auto& m : r.monotonicity) {
    j["monotonicity"].push_back({{"attribute", m.attribute},
                                 {"rate", opt(m.rate)},
                                 {"cell_rate", opt(m.cell_rate)},
                                 {"observations_evaluated", m.observations_evaluated},
                                 {"cells_evaluated", m.cells_evaluated},
                                 {"cells_excluded", m.cells_excluded},
                                 {"cells_excluded_passed", m.cells_excluded_passed},
                                 {"cells_skipped", m.cells_skipped}});
  }
  j["vot"] = json::array();
  for (const auto& v : r.vot) {
    j["vot"].push_back({{"context", v.context},
                        {"analytic", opt(v.analytic)},
                        {"median", opt(v.median)},
                        {"fraction_negative", v.fraction_negative},
                        {"fraction_above_ceiling", v.fraction_above_ceiling},
                        {"n_defined", v.n_defined},
                        {"n_undefined", v.n_undefined}});
  }
  j["availability_leak"] = opt(r.availability_leak);
  j["n_evaluated"] = r.n_evaluated;
  j["n_skipped"] = r.n_skipped;
  json ctxs = json::array();
  for (const auto& c : r.config.vot_contexts) {
    ctxs.push_back({{"label", c.label}, {"alternatives", c.alternatives}});
  }
  j["config"] = {{"perturb_attributes", r.config.perturb_attributes},
                 {"range_fraction", r.config.range_fraction},
                 {"vot_contexts", ctxs},
                 {"vot_ceiling", r.config.vot_ceiling},
                 {"dataset_tag", r.config.dataset_tag}};
  j["hard_validity_ok"] = r.hard_validity_ok();
  return j.dump(2) + "\n";
}

AuditReport parse_audit_report(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed audit report: ") + e.what());
  }
  try {
    AuditReport r;
    r.model = j.at("model").get<std::string>();
    r.dataset_tag = j.at("dataset_tag").get<std::string>();
    r.constructive = j.at("constructive").get<bool>();
    r.accuracy = get_opt<double>(j, "accuracy");
    r.perturbation_omitted = j.at("perturbation_omitted").get<bool>();
    for (const auto& m : j.at("monotonicity")) {
      r.monotonicity.push_back({m.at("attribute").get<std::string>(),
                                get_opt<double>(m, "rate"),
                                get_opt<double>(m, "cell_rate"),
                                m.at("observations_evaluated").get<std::size_t>(),
                                m.at("cells_evaluated").get<std::size_t>(),
                                m.at("cells_excluded").get<std::size_t>(),
                                m.at("cells_excluded_passed").get<std::size_t>(),
                                m.at("cells_skipped").get<std::size_t>()});
    }
    for (const auto& v : j.at("vot")) {
      r.vot.push_back({v.at("context").get<std::string>(), get_opt<double>(v, "analytic"),
                       get_opt<double>(v, "median"), v.at("fraction_negative").get<double>(),
                       v.at("fraction_above_ceiling").get<double>(),
                       v.at("n_defined").get<std::size_t>(),
                       v.at("n_undefined").get<std::size_t>()});
    }
    r.availability_leak = get_opt<double>(j, "availability_leak");
    r.n_evaluated = j.at("n_evaluated").get<std::size_t>();
    r.n_skipped = j.at("n_skipped").get<std::size_t>();
    const auto& c = j.at("config");
    r.config.perturb_attributes = c.at("perturb_attributes").get<std::vector<std::string>>();
    r.config.range_fraction = c.at("range_fraction").get<double>();
    for (const auto& x : c.at("vot_contexts")) {
      r.config.vot_contexts.push_back({x.at("label").get<std::string>(),
                                       x.at("alternatives").get<std::vector<std::string>>()});
    }
    r.config.vot_ceiling = c.at("vot_ceiling").get<double>();
    r.config.dataset_tag = c.at("dataset_tag").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("audit report missing fields: ") + e.what());
  }
}

}  // namespace bva
