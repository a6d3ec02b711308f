// SPDX-License-Identifier: Apache-2.0
#include "bva/adapter.h"

#include <bit>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "bva/checksum.h"
#include "bva/errors.h"
#include "parallel.h"
#include "rng.h"

namespace bva {

CorrectionParams CorrectionParams::zero(std::size_t k, std::size_t hidden) {
  CorrectionParams c;
  c.num_alternatives = k;
  c.hidden = hidden;
  c.w1.assign(hidden * k, 0.0);
  c.b1.assign(hidden, 0.0);
  c.w2.assign(k * hidden, 0.0);
  c.b2.assign(k, 0.0);
  return c;
}

CorrectionParams CorrectionParams::initial(std::size_t k, std::size_t hidden,
                                           std::uint64_t seed) {
  auto c = zero(k, hidden);
  auto gen = detail::stream(seed, 0x6a7e);
  for (auto& w : c.w1) w = detail::uniform(gen, -0.1, 0.1);
  for (auto& b : c.b1) b = detail::uniform(gen, -0.1, 0.1);
  return c;
}

std::size_t CorrectionParams::num_params() const {
  return 1 + w1.size() + b1.size() + w2.size() + b2.size();
}

std::vector<double> CorrectionParams::flat() const {
  std::vector<double> x{alpha};
  x.insert(x.end(), w1.begin(), w1.end());
  x.insert(x.end(), b1.begin(), b1.end());
  x.insert(x.end(), w2.begin(), w2.end());
  x.insert(x.end(), b2.begin(), b2.end());
  return x;
}

CorrectionParams CorrectionParams::from_flat(std::size_t k, std::size_t hidden,
                                             std::span<const double> x) {
  auto c = zero(k, hidden);
  if (x.size() != c.num_params()) {
    throw std::invalid_argument("correction parameter vector has wrong length");
  }
  auto it = x.begin();
  c.alpha = *it++;
  for (auto* part : {&c.w1, &c.b1, &c.w2, &c.b2}) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(part->size()), part->begin());
    it += static_cast<std::ptrdiff_t>(part->size());
  }
  return c;
}

namespace {

// Hidden activations tanh(W1 q + b1).
std::vector<double> hidden_layer(const CorrectionParams& c, std::span<const double> q) {
  std::vector<double> h(c.hidden);
  for (std::size_t j = 0; j < c.hidden; ++j) {
    double a = c.b1[j];
    for (std::size_t k = 0; k < c.num_alternatives; ++k) {
      a += c.w1[j * c.num_alternatives + k] * q[k];
    }
    h[j] = std::tanh(a);
  }
  return h;
}

std::vector<double> output_layer(const CorrectionParams& c, std::span<const double> h) {
  std::vector<double> g(c.num_alternatives);
  for (std::size_t k = 0; k < c.num_alternatives; ++k) {
    double s = c.b2[k];
    for (std::size_t j = 0; j < c.hidden; ++j) s += c.w2[k * c.hidden + j] * h[j];
    g[k] = s;
  }
  return g;
}

void check_width(const CorrectionParams& c, std::span<const double> q) {
  if (q.size() != c.num_alternatives) {
    throw std::invalid_argument("probability vector length does not match the network");
  }
}

}  // namespace

std::vector<double> CorrectionParams::network(std::span<const double> q) const {
  check_width(*this, q);
  return output_layer(*this, hidden_layer(*this, q));
}

std::vector<double> correction_term(const CorrectionParams& c, std::span<const double> q) {
  auto out = c.network(q);
  const auto lq = safe_log(q);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += c.alpha * lq[k];
  return out;
}

std::string structural_checksum(const StructuralParams& p) {
  std::string bytes;
  auto append = [&](const char* tag, const std::vector<double>& v) {
    bytes += tag;
    bytes += std::to_string(v.size());
    for (double x : v) {
      char buf[17];
      std::snprintf(buf, sizeof(buf), "%016llx",
                    static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(x)));
      bytes += buf;
    }
  };
  append("theta", p.theta);
  append("asc", p.asc);
  append("w", p.w_inter);
  return sha256_hex(bytes);
}

void AdapterModel::verify() const {
  if (structural_checksum(structural) != checksum) {
    throw ChecksumError("structural parameters differ from their frozen checksum");
  }
}

std::vector<double> adapter_utility(const AdapterModel& m, const Observation& obs,
                                    std::span<const double> q) {
  auto v = structural_utility(m.structural, m.spec, obs);
  const auto c = correction_term(m.correction, q);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] += c[k];
  return v;
}

std::vector<double> predict(const AdapterModel& m, const Observation& obs,
                            std::span<const double> q) {
  return choice_probabilities(adapter_utility(m, obs, q), obs.avail);
}

namespace {

// Structural utilities never change in Stage 2, so they are computed once.
struct FrozenRows {
  std::vector<std::vector<double>> v_struct;
  std::vector<const std::vector<double>*> q;
  std::vector<std::vector<double>> log_q;
};

FrozenRows freeze_rows(const StructuralParams& p, const BoundSpec& spec,
                       const Dataset& ds, const FMProbabilities& fm) {
  FrozenRows f;
  f.v_struct.reserve(ds.size());
  f.q.reserve(ds.size());
  for (const auto& r : ds.rows) {
    f.v_struct.push_back(structural_utility(p, spec, r));
    f.q.push_back(&fm.at(r.id));
    f.log_q.push_back(safe_log(*f.q.back()));
  }
  return f;
}

// Rows [begin, end) of the log-likelihood; gradient accumulated into grad.
double correction_rows(const CorrectionParams& c, const Dataset& ds, const FrozenRows& rows,
                       std::size_t begin, std::size_t end, std::span<double> grad) {
  const std::size_t k = c.num_alternatives;
  const std::size_t hn = c.hidden;
  const bool want_grad = !grad.empty();
  // Offsets into CorrectionParams::flat().
  const std::size_t o_w1 = 1;
  const std::size_t o_b1 = o_w1 + hn * k;
  const std::size_t o_w2 = o_b1 + hn;
  const std::size_t o_b2 = o_w2 + k * hn;

  double total = 0.0;
  std::vector<double> r(k), v(k), dh(hn), h(hn);
  for (std::size_t i = begin; i < end; ++i) {
    const auto& obs = ds.rows[i];
    const auto& q = *rows.q[i];
    const auto& lq = rows.log_q[i];
    for (std::size_t u = 0; u < hn; ++u) {
      double a = c.b1[u];
      for (std::size_t j = 0; j < k; ++j) a += c.w1[u * k + j] * q[j];
      h[u] = std::tanh(a);
    }
    for (std::size_t j = 0; j < k; ++j) {
      double s = c.b2[j];
      for (std::size_t u = 0; u < hn; ++u) s += c.w2[j * hn + u] * h[u];
      v[j] = rows.v_struct[i][j] + c.alpha * lq[j] + s;
    }
    const auto logp = log_choice_probabilities(v, obs.avail);
    total += logp[obs.choice];
    if (!want_grad) continue;
    for (std::size_t j = 0; j < k; ++j) {
      r[j] = obs.avail[j] ? (j == obs.choice ? 1.0 : 0.0) - std::exp(logp[j]) : 0.0;
    }
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      if (r[j] == 0.0) continue;
      grad[0] += r[j] * lq[j];
      grad[o_b2 + j] += r[j];
      for (std::size_t u = 0; u < hn; ++u) {
        grad[o_w2 + j * hn + u] += r[j] * h[u];
        dh[u] += r[j] * c.w2[j * hn + u];
      }
    }
    for (std::size_t u = 0; u < hn; ++u) {
      const double da = dh[u] * (1.0 - h[u] * h[u]);
      if (da == 0.0) continue;
      grad[o_b1 + u] += da;
      for (std::size_t j = 0; j < k; ++j) grad[o_w1 + u * k + j] += da * q[j];
    }
  }
  return total;
}

double correction_objective(const CorrectionParams& c, const Dataset& ds,
                            const FrozenRows& rows, std::span<double> grad) {
  const std::size_t chunks = detail::num_chunks(ds.size());
  const std::size_t np = grad.size();
  std::vector<double> part_ll(chunks, 0.0);
  std::vector<double> part_grad(chunks * np, 0.0);
  detail::for_chunks(ds.size(), [&](std::size_t ch, std::size_t b, std::size_t e) {
    std::span<double> g = np ? std::span<double>(part_grad.data() + ch * np, np)
                             : std::span<double>();
    part_ll[ch] = correction_rows(c, ds, rows, b, e, g);
  });
  double total = 0.0;
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t ch = 0; ch < chunks; ++ch) {
    total += part_ll[ch];
    for (std::size_t p = 0; p < np; ++p) grad[p] += part_grad[ch * np + p];
  }
  return total;
}

}  // namespace

double adapter_log_likelihood(const AdapterModel& m, const Dataset& ds,
                              const FMProbabilities& fm, std::span<double> grad) {
  if (!grad.empty() && grad.size() != m.correction.num_params()) {
    throw std::invalid_argument("gradient buffer has wrong length");
  }
  const auto rows = freeze_rows(m.structural, m.spec, ds, fm);
  return correction_objective(m.correction, ds, rows, grad);
}

Stage2Result fit_stage2(const Dataset& train, const Dataset& val,
                        const FMProbabilities& fm_train, const FMProbabilities& fm_val,
                        const StructuralParams& frozen,
                        const std::string& frozen_checksum, const BoundSpec& spec,
                        const OptimConfig& cfg, std::size_t hidden) {
  if (structural_checksum(frozen) != frozen_checksum) {
    throw ChecksumError("fit_stage2: frozen structural parameters do not match their checksum");
  }
  if (train.empty()) throw std::invalid_argument("fit_stage2: empty training set");
  if (!spec.compatible_with(train) || (!val.empty() && !spec.compatible_with(val))) {
    throw SchemaError("fit_stage2: spec was bound to a different schema");
  }
  check_alignment(fm_train, train);
  if (!val.empty()) check_alignment(fm_val, val);

  const std::size_t k = spec.num_alternatives();
  const auto train_rows = freeze_rows(frozen, spec, train, fm_train);
  const auto val_rows = freeze_rows(frozen, spec, val, fm_val);
  const double n = static_cast<double>(train.size());

  Objective objective = [&](std::span<const double> x, std::span<double> g) {
    const auto c = CorrectionParams::from_flat(k, hidden, x);
    const double ll = correction_objective(c, train, train_rows, g);
    for (auto& gi : g) gi /= n;
    return ll / n;
  };
  Score score;
  if (!val.empty()) {
    score = [&](std::span<const double> x) {
      return correction_objective(CorrectionParams::from_flat(k, hidden, x), val,
                                  val_rows, {});
    };
  }

  auto init = CorrectionParams::initial(k, hidden, cfg.seed);
  std::vector<double> x = init.flat();
  Stage2Result out;
  out.init_val_ll = val.empty() ? 0.0 : correction_objective(init, val, val_rows, {});
  out.trace = maximize(objective, score, x, cfg, StallPolicy::kEarlyStopOnValidation);
  out.correction = CorrectionParams::from_flat(k, hidden, x);
  out.train_ll = correction_objective(out.correction, train, train_rows, {});
  out.val_ll = val.empty() ? 0.0 : correction_objective(out.correction, val, val_rows, {});

  if (structural_checksum(frozen) != frozen_checksum) {
    throw ChecksumError("fit_stage2: structural parameters changed during fitting");
  }
  return out;
}

std::vector<std::vector<double>> soft_targets(const Dataset& ds,
                                              const FMProbabilities& fm) {
  std::vector<std::vector<double>> out;
  out.reserve(ds.size());
  for (const auto& r : ds.rows) {
    const auto& q = fm.at(r.id);
    std::vector<double> t(q.size(), 0.0);
    double mass = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) mass += r.avail[k] ? q[k] : 0.0;
    const double n_avail = static_cast<double>(r.num_available());
    for (std::size_t k = 0; k < q.size(); ++k) {
      if (!r.avail[k]) continue;
      t[k] = mass > 0.0 ? q[k] / mass : 1.0 / n_avail;
    }
    out.push_back(std::move(t));
  }
  return out;
}

double cross_entropy(const StructuralParams& p, const BoundSpec& spec,
                     const Dataset& ds,
                     const std::vector<std::vector<double>>& targets) {
  if (ds.empty()) return 0.0;
  return -soft_log_likelihood(p, spec, ds, targets) / static_cast<double>(ds.size());
}

DistillResult distill_mnl(const Dataset& train, const Dataset& val,
                          const FMProbabilities& fm_train, const BoundSpec& spec,
                          const OptimConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("distill_mnl: empty training set");
  if (!spec.compatible_with(train) || (!val.empty() && !spec.compatible_with(val))) {
    throw SchemaError("distill_mnl: spec was bound to a different schema");
  }
  check_alignment(fm_train, train);
  const auto targets = soft_targets(train, fm_train);
  const double n = static_cast<double>(train.size());

  std::vector<double> x = StructuralParams::zeros(spec).flat();
  if (cfg.init_jitter > 0.0) {
    auto gen = detail::stream(cfg.seed, 0x1417);
    for (auto& xi : x) xi += detail::uniform(gen, -cfg.init_jitter, cfg.init_jitter);
  }
  Objective objective = [&](std::span<const double> xs, std::span<double> g) {
    const double ll =
        soft_log_likelihood(StructuralParams::from_flat(spec, xs), spec, train, targets, g);
    for (auto& gi : g) gi /= n;
    return ll / n;
  };
  const auto trace = maximize(objective, {}, x, cfg, StallPolicy::kDecayOnTrainStall);

  DistillResult out;
  out.params = StructuralParams::from_flat(spec, x);
  out.cross_entropy = -trace.objective;
  out.report.iterations = trace.iterations;
  out.report.grad_inf_norm = trace.grad_inf_norm;
  out.report.converged = trace.converged;
  out.report.train_ll = log_likelihood(out.params, spec, train);
  out.report.val_ll = val.empty() ? 0.0 : log_likelihood(out.params, spec, val);
  out.report.final_step = trace.final_step;
  const auto names = param_names(spec);
  for (auto i : trace.never_moved) out.report.non_identified.push_back(names[i]);
  return out;
}

}  // namespace bva
