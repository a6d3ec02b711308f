// SPDX-License-Identifier: Apache-2.0
#include "bva/mnl.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bva/errors.h"
#include "rng.h"

namespace bva {

UtilitySpec UtilitySpec::swissmetro() {
  UtilitySpec s;
  s.name = "swissmetro";
  s.asc_alts = {"train", "sm"};
  s.coefficients = {{"time", "time", {"train", "sm", "car"}},
                    {"cost", "cost", {"train", "sm", "car"}}};
  s.cost_zero_rule = CostZeroRule{"GA", "cost", {"train", "sm"}};
  return s;
}

UtilitySpec UtilitySpec::lpmc() {
  UtilitySpec s;
  s.name = "lpmc";
  s.asc_alts = {"walk", "cycle", "pt"};
  s.coefficients = {{"time_active", "time", {"walk", "cycle"}},
                    {"time_pt", "time", {"pt"}},
                    {"time_drive", "time", {"drive"}},
                    {"cost_pt", "cost", {"pt"}},
                    {"cost_drive", "cost", {"drive"}}};
  return s;
}

UtilitySpec UtilitySpec::generic(const AlternativeSet& alts,
                                 const std::vector<std::string>& constrained_attrs) {
  UtilitySpec s;
  s.name = "generic";
  s.asc_alts.assign(alts.names.begin(), alts.names.end() - 1);
  for (const auto& attr : constrained_attrs) {
    s.coefficients.push_back({attr, attr, alts.names});
  }
  return s;
}

UtilitySpec UtilitySpec::preset(std::string_view name, const AlternativeSet& alts) {
  if (name == "swissmetro") return swissmetro();
  if (name == "lpmc") return lpmc();
  if (name == "generic") {
    std::vector<std::string> attrs;
    for (const char* a : {"time", "cost"})
      if (alts.attribute_index(a)) attrs.emplace_back(a);
    return generic(alts, attrs);
  }
  throw std::invalid_argument("unknown utility preset '" + std::string(name) + "'");
}

namespace {

std::size_t require_alt(const AlternativeSet& alts, const std::string& name) {
  auto k = alts.index_of(name);
  if (!k) throw SchemaError("utility spec names unknown alternative '" + name + "'");
  return *k;
}

std::size_t require_attr(const AlternativeSet& alts, const std::string& name) {
  auto a = alts.attribute_index(name);
  if (!a) throw SchemaError("utility spec names unknown attribute '" + name + "'");
  return *a;
}

std::size_t require_socio(const std::vector<std::string>& socio,
                          const std::string& name) {
  auto it = std::find(socio.begin(), socio.end(), name);
  if (it == socio.end()) {
    throw SchemaError("utility spec names unknown socio covariate '" + name + "'");
  }
  return static_cast<std::size_t>(it - socio.begin());
}

}  // namespace

BoundSpec::BoundSpec(UtilitySpec spec, AlternativeSet alts,
                     std::vector<std::string> socio_names)
    : spec_(std::move(spec)), alts_(std::move(alts)), socio_(std::move(socio_names)) {
  alts_.validate();
  const std::size_t k = alts_.size();
  if (spec_.asc_alts.size() >= k) {
    throw SchemaError("utility spec needs a reference alternative without ASC");
  }
  for (const auto& name : spec_.asc_alts) {
    const auto idx = require_alt(alts_, name);
    if (std::count(asc_alt_.begin(), asc_alt_.end(), idx)) {
      throw SchemaError("duplicate ASC for '" + name + "'");
    }
    asc_alt_.push_back(idx);
  }
  for (const auto& c : spec_.coefficients) {
    Coef bound{require_attr(alts_, c.attribute), std::vector<std::uint8_t>(k, 0)};
    if (c.alternatives.empty()) {
      throw SchemaError("coefficient '" + c.name + "' covers no alternative");
    }
    for (const auto& a : c.alternatives) bound.covers[require_alt(alts_, a)] = 1;
    coef_.push_back(std::move(bound));
  }
  // Two coefficients on the same (alternative, attribute) cell would make
  // the split between them unidentified.
  for (std::size_t i = 0; i < coef_.size(); ++i)
    for (std::size_t j = i + 1; j < coef_.size(); ++j)
      if (coef_[i].attr == coef_[j].attr)
        for (std::size_t a = 0; a < k; ++a)
          if (coef_[i].covers[a] && coef_[j].covers[a])
            throw SchemaError("coefficients '" + spec_.coefficients[i].name +
                              "' and '" + spec_.coefficients[j].name +
                              "' overlap on alternative " + alts_.names[a]);
  for (const auto& in : spec_.interactions) {
    inter_.push_back({require_socio(socio_, in.socio), require_alt(alts_, in.alternative)});
  }
  if (spec_.cost_zero_rule) {
    const auto& r = *spec_.cost_zero_rule;
    ZeroRule z{require_socio(socio_, r.socio), require_attr(alts_, r.attribute),
               std::vector<std::uint8_t>(k, 0)};
    for (const auto& a : r.alternatives) z.covers[require_alt(alts_, a)] = 1;
    zero_ = std::move(z);
  }
}

BoundSpec::BoundSpec(UtilitySpec spec, const Dataset& schema)
    : BoundSpec(std::move(spec), schema.alt_set, schema.socio_names) {}

bool BoundSpec::compatible_with(const Dataset& ds) const {
  return ds.alt_set == alts_ && ds.socio_names == socio_;
}

bool BoundSpec::zero_rule_fires(const Observation& obs, std::size_t alt,
                                std::size_t attr) const {
  return zero_ && zero_->attr == attr && zero_->covers[alt] &&
         obs.socio[zero_->socio] != 0.0;
}

bool BoundSpec::enters_utility(const Observation& obs, std::size_t alt,
                               std::size_t attr) const {
  if (zero_rule_fires(obs, alt, attr)) return false;
  return std::any_of(coef_.begin(), coef_.end(), [&](const Coef& c) {
    return c.attr == attr && c.covers[alt];
  });
}

StructuralParams StructuralParams::zeros(const BoundSpec& spec) {
  return {std::vector<double>(spec.num_coefficients(), 0.0),
          std::vector<double>(spec.num_asc(), 0.0),
          std::vector<double>(spec.num_interactions(), 0.0)};
}

double StructuralParams::beta(std::size_t i) const { return effective_beta(theta[i]); }

std::vector<double> StructuralParams::flat() const {
  std::vector<double> x;
  x.reserve(theta.size() + asc.size() + w_inter.size());
  x.insert(x.end(), theta.begin(), theta.end());
  x.insert(x.end(), asc.begin(), asc.end());
  x.insert(x.end(), w_inter.begin(), w_inter.end());
  return x;
}

StructuralParams StructuralParams::from_flat(const BoundSpec& spec,
                                             std::span<const double> x) {
  if (x.size() != spec.num_params()) {
    throw std::invalid_argument("flat parameter vector has wrong length");
  }
  const auto nc = spec.num_coefficients();
  const auto na = spec.num_asc();
  StructuralParams p;
  p.theta.assign(x.begin(), x.begin() + nc);
  p.asc.assign(x.begin() + nc, x.begin() + nc + na);
  p.w_inter.assign(x.begin() + nc + na, x.end());
  return p;
}

std::vector<double> structural_utility(const StructuralParams& p,
                                       const BoundSpec& spec,
                                       const Observation& obs) {
  const std::size_t k = spec.num_alternatives();
  std::vector<double> v(k, 0.0);
  for (std::size_t j = 0; j < spec.num_asc(); ++j) v[spec.asc_alternatives()[j]] += p.asc[j];
  const auto& coefs = spec.coefficients();
  for (std::size_t c = 0; c < coefs.size(); ++c) {
    const double b = p.beta(c);
    for (std::size_t alt = 0; alt < k; ++alt) {
      if (!coefs[c].covers[alt] || spec.zero_rule_fires(obs, alt, coefs[c].attr)) continue;
      v[alt] += b * obs.attr(alt, coefs[c].attr);
    }
  }
  const auto& inter = spec.interactions();
  for (std::size_t i = 0; i < inter.size(); ++i) {
    v[inter[i].alt] += p.w_inter[i] * obs.socio[inter[i].socio];
  }
  return v;
}

namespace {

struct MaxInfo {
  double max;
  std::size_t arg;
};

MaxInfo available_max(std::span<const double> v, std::span<const std::uint8_t> avail) {
  if (v.size() != avail.size()) {
    throw std::invalid_argument("utility and availability lengths differ");
  }
  MaxInfo m{-std::numeric_limits<double>::infinity(), v.size()};
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (avail[k] && (m.arg == v.size() || v[k] > m.max)) m = {v[k], k};
  }
  if (m.arg == v.size()) throw std::domain_error("no available alternative");
  return m;
}

}  // namespace

std::vector<double> choice_probabilities(std::span<const double> v,
                                         std::span<const std::uint8_t> avail) {
  const auto m = available_max(v, avail);
  std::vector<double> p(v.size(), 0.0);
  double sum = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!avail[k]) continue;
    p[k] = std::exp(v[k] - m.max);
    sum += p[k];
  }
  for (auto& x : p) x /= sum;
  return p;
}

std::vector<double> log_choice_probabilities(std::span<const double> v,
                                             std::span<const std::uint8_t> avail) {
  const auto m = available_max(v, avail);
  double rest = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (avail[k] && k != m.arg) rest += std::exp(v[k] - m.max);
  }
  const double lse = m.max + std::log1p(rest);
  std::vector<double> out(v.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!avail[k]) continue;
    out[k] = k == m.arg ? -std::log1p(rest) : v[k] - lse;
  }
  return out;
}

double soft_log_likelihood(const StructuralParams& p, const BoundSpec& spec,
                           const Dataset& ds,
                           const std::vector<std::vector<double>>& targets,
                           std::span<double> grad) {
  if (targets.size() != ds.size()) {
    throw std::invalid_argument("one target vector per row required");
  }
  const bool want_grad = !grad.empty();
  if (want_grad) {
    if (grad.size() != spec.num_params()) {
      throw std::invalid_argument("gradient buffer has wrong length");
    }
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  const std::size_t k = spec.num_alternatives();
  const std::size_t nc = spec.num_coefficients();
  const std::size_t na = spec.num_asc();
  const auto& coefs = spec.coefficients();
  const auto& inter = spec.interactions();
  std::vector<double> betas(nc);
  for (std::size_t c = 0; c < nc; ++c) betas[c] = p.beta(c);

  double total = 0.0;
  std::vector<double> r(k);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& obs = ds.rows[i];
    const auto& t = targets[i];
    const auto v = structural_utility(p, spec, obs);
    const auto logp = log_choice_probabilities(v, obs.avail);
    for (std::size_t j = 0; j < k; ++j) {
      if (t[j] != 0.0) total += t[j] * logp[j];
    }
    if (!want_grad) continue;
    double mass = 0.0;
    for (std::size_t j = 0; j < k; ++j) mass += obs.avail[j] ? t[j] : 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      r[j] = obs.avail[j] ? t[j] - mass * std::exp(logp[j]) : 0.0;
    }
    // The residuals sum to zero over the available set, so each term is
    // taken relative to the first available alternative; a term that is
    // the same for every available alternative then cancels exactly.
    std::size_t ref = 0;
    while (!obs.avail[ref]) ++ref;
    for (std::size_t c = 0; c < nc; ++c) {
      auto term = [&](std::size_t alt) {
        return coefs[c].covers[alt] && !spec.zero_rule_fires(obs, alt, coefs[c].attr)
                   ? obs.attr(alt, coefs[c].attr)
                   : 0.0;
      };
      const double z_ref = term(ref);
      double s = 0.0;
      for (std::size_t alt = 0; alt < k; ++alt) {
        if (!obs.avail[alt] || r[alt] == 0.0) continue;
        const double z = term(alt) - z_ref;
        if (z != 0.0) s += r[alt] * z;
      }
      // d beta / d theta = beta
      grad[c] += s * betas[c];
    }
    for (std::size_t j = 0; j < na; ++j) grad[nc + j] += r[spec.asc_alternatives()[j]];
    for (std::size_t w = 0; w < inter.size(); ++w) {
      grad[nc + na + w] += r[inter[w].alt] * obs.socio[inter[w].socio];
    }
  }
  return total;
}

namespace {

std::vector<std::vector<double>> one_hot_targets(const Dataset& ds) {
  std::vector<std::vector<double>> t(ds.size(), std::vector<double>(ds.alt_set.size(), 0.0));
  for (std::size_t i = 0; i < ds.size(); ++i) t[i][ds.rows[i].choice] = 1.0;
  return t;
}

}  // namespace

double log_likelihood(const StructuralParams& p, const BoundSpec& spec,
                      const Dataset& ds) {
  return soft_log_likelihood(p, spec, ds, one_hot_targets(ds));
}

StructuralParams grad_log_likelihood(const StructuralParams& p,
                                     const BoundSpec& spec, const Dataset& ds) {
  std::vector<double> g(spec.num_params());
  soft_log_likelihood(p, spec, ds, one_hot_targets(ds), g);
  return StructuralParams::from_flat(spec, g);
}

std::vector<std::string> param_names(const BoundSpec& spec) {
  std::vector<std::string> names;
  for (const auto& c : spec.spec().coefficients) names.push_back("theta:" + c.name);
  for (const auto& a : spec.spec().asc_alts) names.push_back("asc:" + a);
  for (const auto& w : spec.spec().interactions)
    names.push_back("w:" + w.socio + "@" + w.alternative);
  return names;
}

Stage1Result fit_stage1(const Dataset& train, const Dataset& val,
                        const BoundSpec& spec, const OptimConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("fit_stage1: empty training set");
  if (!spec.compatible_with(train) || (!val.empty() && !spec.compatible_with(val))) {
    throw SchemaError("fit_stage1: spec was bound to a different schema");
  }
  const auto train_t = one_hot_targets(train);
  const auto val_t = one_hot_targets(val);
  const double n = static_cast<double>(train.size());

  std::vector<double> x = StructuralParams::zeros(spec).flat();
  if (cfg.init_jitter > 0.0) {
    auto gen = detail::stream(cfg.seed, 0x1417);
    for (auto& xi : x) xi += detail::uniform(gen, -cfg.init_jitter, cfg.init_jitter);
  }

  Objective objective = [&](std::span<const double> xs, std::span<double> g) {
    const auto p = StructuralParams::from_flat(spec, xs);
    const double ll = soft_log_likelihood(p, spec, train, train_t, g);
    for (auto& gi : g) gi /= n;
    return ll / n;
  };
  Score score;
  if (!val.empty()) {
    score = [&](std::span<const double> xs) {
      return soft_log_likelihood(StructuralParams::from_flat(spec, xs), spec, val, val_t);
    };
  }
  const auto trace = maximize(objective, score, x, cfg, StallPolicy::kDecayOnTrainStall);

  Stage1Result out;
  out.params = StructuralParams::from_flat(spec, x);
  out.report.iterations = trace.iterations;
  out.report.grad_inf_norm = trace.grad_inf_norm;
  out.report.converged = trace.converged;
  out.report.train_ll = trace.objective * n;
  out.report.val_ll = val.empty() ? 0.0 : trace.best_validation;
  out.report.final_step = trace.final_step;
  const auto names = param_names(spec);
  for (auto i : trace.never_moved) out.report.non_identified.push_back(names[i]);
  return out;
}

double vot_analytic(const StructuralParams& p, const BoundSpec& spec,
                    const VotContext& context) {
  const auto& alts = spec.alternatives();
  const auto time = alts.attribute_index("time");
  const auto cost = alts.attribute_index("cost");
  if (!time || !cost) {
    throw std::invalid_argument("vot_analytic: dataset lacks time or cost attribute");
  }
  std::optional<std::size_t> alt;
  if (!context.alternative.empty()) {
    alt = alts.index_of(context.alternative);
    if (!alt) {
      throw std::invalid_argument("vot_analytic: unknown alternative '" +
                                  context.alternative + "'");
    }
  }
  auto find = [&](std::size_t attr) -> std::size_t {
    const auto& coefs = spec.coefficients();
    for (std::size_t c = 0; c < coefs.size(); ++c) {
      if (coefs[c].attr != attr) continue;
      const bool all = std::all_of(coefs[c].covers.begin(), coefs[c].covers.end(),
                                   [](auto x) { return x != 0; });
      if (alt ? coefs[c].covers[*alt] != 0 : all) return c;
    }
    throw std::invalid_argument("vot_analytic: no " + alts.attribute_names[attr] +
                                " coefficient for context '" + context.label() + "'");
  };
  return p.beta(find(*time)) / p.beta(find(*cost)) * 60.0;
}

}  // namespace bva
