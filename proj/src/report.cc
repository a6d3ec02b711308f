// SPDX-License-Identifier: Apache-2.0
#include "bva/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "bva/adapter.h"
#include "bva/errors.h"
#include "bva/model_io.h"
#include "bva/synthetic.h"

namespace bva {

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

std::optional<double> get_opt(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pct_cell(const std::optional<double>& v, int digits = 1) {
  if (!v) return "---";
  if (*v == 1.0) return "100";
  return fixed(100.0 * *v, digits);
}

std::string leak_cell(const std::optional<double>& v) {
  if (!v) return "---";
  const double pct = 100.0 * *v;
  if (pct < 0.001) return "<.001";
  return fixed(pct, 3);
}

std::string render_grid(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      const auto& s = cells[r][c];
      if (c == 0) {
        out << s << std::string(width[c] - s.size(), ' ');
      } else {
        out << "  " << std::string(width[c] - s.size(), ' ') << s;
      }
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
      out << std::string(total, '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace

ComparisonTable compare_models(const std::vector<AuditReport>& reports) {
  ComparisonTable t;
  if (reports.empty()) return t;
  t.dataset_tag = reports.front().dataset_tag;
  for (const auto& r : reports) {
    if (r.dataset_tag != t.dataset_tag) {
      throw std::invalid_argument("cannot compare reports on different datasets: '" +
                                  t.dataset_tag + "' vs '" + r.dataset_tag + "'");
    }
  }
  auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& r : reports) {
    for (const auto& m : r.monotonicity) add_unique(t.mono_attributes, m.attribute);
    for (const auto& v : r.vot) add_unique(t.vot_labels, v.context);
  }
  for (const auto& r : reports) {
    ComparisonRow row;
    row.model = r.model;
    row.omitted = r.perturbation_omitted;
    row.accuracy = r.accuracy;
    row.leak = r.availability_leak;
    for (const auto& attr : t.mono_attributes) {
      std::optional<double> cell;
      for (const auto& m : r.monotonicity)
        if (m.attribute == attr) cell = m.rate;
      row.monotonicity.push_back(cell);
    }
    for (const auto& label : t.vot_labels) {
      std::optional<double> cell;
      for (const auto& v : r.vot)
        if (v.context == label) cell = v.analytic ? v.analytic : v.median;
      row.vot.push_back(cell);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string render_table(const ComparisonTable& t) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head{"Model", "Acc"};
  for (const auto& a : t.mono_attributes) head.push_back("Mono(" + a + ")");
  for (const auto& v : t.vot_labels) head.push_back(v == "generic" ? "VOT" : "VOT_" + v);
  head.push_back("Leak(%)");
  cells.push_back(head);
  for (const auto& r : t.rows) {
    std::vector<std::string> line{r.model, pct_cell(r.accuracy)};
    for (const auto& m : r.monotonicity) line.push_back(r.omitted ? "---" : pct_cell(m));
    for (const auto& v : r.vot) line.push_back(r.omitted || !v ? "---" : fixed(*v, 1));
    line.push_back(leak_cell(r.leak));
    cells.push_back(std::move(line));
  }
  return "dataset: " + t.dataset_tag + "\n" + render_grid(cells);
}

std::string render_machine(const ComparisonTable& t) {
  json j;
  j["format_version"] = 1;
  j["kind"] = "comparison";
  j["dataset_tag"] = t.dataset_tag;
  j["mono_attributes"] = t.mono_attributes;
  j["vot_labels"] = t.vot_labels;
  j["rows"] = json::array();
  for (const auto& r : t.rows) {
    json row;
    row["model"] = r.model;
    row["omitted"] = r.omitted;
    row["accuracy"] = opt(r.accuracy);
    row["monotonicity"] = json::array();
    for (const auto& m : r.monotonicity) row["monotonicity"].push_back(opt(m));
    row["vot"] = json::array();
    for (const auto& v : r.vot) row["vot"].push_back(opt(v));
    row["leak"] = opt(r.leak);
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

ComparisonTable parse_comparison(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.value("kind", "") != "comparison") throw ParseError("not a comparison document");
    ComparisonTable t;
    t.dataset_tag = j.at("dataset_tag").get<std::string>();
    t.mono_attributes = j.at("mono_attributes").get<std::vector<std::string>>();
    t.vot_labels = j.at("vot_labels").get<std::vector<std::string>>();
    for (const auto& row : j.at("rows")) {
      ComparisonRow r;
      r.model = row.at("model").get<std::string>();
      r.omitted = row.at("omitted").get<bool>();
      r.accuracy = get_opt<double>(row, "accuracy");
      for (const auto& m : row.at("monotonicity")) r.monotonicity.push_back(get_opt(m));
      for (const auto& v : row.at("vot")) r.vot.push_back(get_opt(v));
      r.leak = get_opt<double>(row, "leak");
      t.rows.push_back(std::move(r));
    }
    return t;
  } catch (const json::exception& e) {
    throw ParseError(std::string("comparison document: ") + e.what());
  }
}

// ---- subsample study -------------------------------------------------------

FmProvider table_provider(FMProbabilities full) {
  return [full = std::move(full)](const Splits& s, std::uint64_t) {
    return FmSplits{restrict_to(full, s.train, "train"), restrict_to(full, s.val, "val"),
                    restrict_to(full, s.test, "test")};
  };
}

FmProvider synthetic_provider(double informativeness, double smoothing) {
  return [=](const Splits& s, std::uint64_t seed) {
    FmSynthOptions o;
    o.smoothing = smoothing;
    o.split = "train";
    FmSplits out;
    out.train = make_fm_probs(s.train, informativeness, seed, o);
    o.split = "val";
    out.val = make_fm_probs(s.val, informativeness, seed, o);
    o.split = "test";
    out.test = make_fm_probs(s.test, informativeness, seed, o);
    return out;
  };
}

bool SubsampleSummary::hard_validity_ok() const {
  return std::all_of(runs.begin(), runs.end(),
                     [](const SubsampleRun& r) { return r.failures.empty(); });
}

void summarize_gains(SubsampleSummary& s) {
  const std::size_t n = s.runs.size();
  s.mean_gain = 0.0;
  s.sd_gain.reset();
  s.se_gain.reset();
  s.ci_low.reset();
  s.ci_high.reset();
  s.all_positive = n > 0;
  if (n == 0) return;
  for (const auto& r : s.runs) {
    s.mean_gain += r.gain;
    if (!(r.gain > 0.0)) s.all_positive = false;
  }
  s.mean_gain /= static_cast<double>(n);
  if (n < 2) return;
  double ss = 0.0;
  for (const auto& r : s.runs) ss += (r.gain - s.mean_gain) * (r.gain - s.mean_gain);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const double se = sd / std::sqrt(static_cast<double>(n));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
  s.sd_gain = sd;
  s.se_gain = se;
  s.ci_low = s.mean_gain - tq * se;
  s.ci_high = s.mean_gain + tq * se;
}

namespace {

std::optional<double> lowest_mono(const AuditReport& r) {
  std::optional<double> out;
  for (const auto& m : r.monotonicity)
    if (m.rate && (!out || *m.rate < *out)) out = m.rate;
  return out;
}

}  // namespace

SubsampleSummary subsample_study(const Dataset& ds, const std::vector<std::uint64_t>& seeds,
                                 const PipelineConfig& cfg, const FmProvider& fm) {
  if (seeds.empty()) throw std::invalid_argument("subsample study needs at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw std::invalid_argument("subsample study seeds must be distinct");
  }
  SubsampleSummary summary;
  summary.dataset_tag = cfg.audit.dataset_tag;
  const BoundSpec spec(resolve_spec(cfg.spec, ds.alt_set), ds);
  for (const auto seed : seeds) {
    const Dataset sub = cfg.subsample_n == 0 ? ds : subsample(ds, cfg.subsample_n, seed);
    const Splits s = split(sub, SplitConfig{cfg.ratios, seed});
    const FmSplits q = fm(s, seed);

    OptimConfig c1 = cfg.stage1;
    c1.seed = seed;
    const auto stage1 = fit_stage1(s.train, s.val, spec, c1);
    const std::string checksum = structural_checksum(stage1.params);
    OptimConfig c2 = cfg.stage2;
    c2.seed = seed;
    const auto stage2 = fit_stage2(s.train, s.val, q.train, q.val, stage1.params, checksum,
                                   spec, c2, cfg.hidden);

    AdapterModel model{spec, stage1.params, checksum, stage2.correction, q.test.source_tag};
    const MnlPredictor mnl(spec, stage1.params, "MNL");
    const AdapterPredictor adapter(model, q.test, "Adapter");
    const auto a_mnl = full_audit(mnl, s.test, cfg.audit);
    const auto a_adp = full_audit(adapter, s.test, cfg.audit);

    SubsampleRun run;
    run.seed = seed;
    run.n_train = s.train.size();
    run.n_test = s.test.size();
    run.mnl_accuracy = a_mnl.accuracy.value_or(0.0);
    run.adapter_accuracy = a_adp.accuracy.value_or(0.0);
    run.gain = run.adapter_accuracy - run.mnl_accuracy;
    run.alpha = stage2.correction.alpha;
    run.mnl_monotonicity = lowest_mono(a_mnl);
    run.adapter_monotonicity = lowest_mono(a_adp);
    for (const auto& f : a_mnl.hard_validity_failures()) run.failures.push_back("MNL: " + f);
    for (const auto& f : a_adp.hard_validity_failures()) run.failures.push_back("Adapter: " + f);
    summary.runs.push_back(std::move(run));
  }
  summarize_gains(summary);
  return summary;
}

std::string render_table(const SubsampleSummary& s) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"seed", "n_train", "n_test", "MNL acc", "Adapter acc", "gain(pp)", "alpha",
                   "Mono", "valid"});
  for (const auto& r : s.runs) {
    std::optional<double> mono = r.mnl_monotonicity;
    if (r.adapter_monotonicity && (!mono || *r.adapter_monotonicity < *mono))
      mono = r.adapter_monotonicity;
    cells.push_back({std::to_string(r.seed), std::to_string(r.n_train), std::to_string(r.n_test),
                     pct_cell(r.mnl_accuracy), pct_cell(r.adapter_accuracy),
                     (r.gain >= 0 ? "+" : "") + fixed(100.0 * r.gain, 2), fixed(r.alpha, 3),
                     pct_cell(mono), r.failures.empty() ? "yes" : "NO"});
  }
  std::ostringstream out;
  out << "dataset: " << s.dataset_tag << '\n' << render_grid(cells);
  auto pp = [](const std::optional<double>& v) {
    return v ? fixed(100.0 * *v, 2) : std::string("n/a");
  };
  out << "mean gain: " << (s.mean_gain >= 0 ? "+" : "") << fixed(100.0 * s.mean_gain, 2)
      << " pp  sd: " << pp(s.sd_gain) << "  se: " << pp(s.se_gain) << "  95% CI: ";
  if (s.ci_low && s.ci_high) {
    out << "[" << fixed(100.0 * *s.ci_low, 2) << ", " << fixed(100.0 * *s.ci_high, 2) << "]";
  } else {
    out << "n/a";
  }
  out << "\nall gains positive: " << (s.all_positive ? "yes" : "no") << '\n';
  for (const auto& r : s.runs)
    for (const auto& f : r.failures)
      out << "hard validity failure (seed " << r.seed << "): " << f << '\n';
  return out.str();
}

std::string render_machine(const SubsampleSummary& s) {
  json j;
  j["format_version"] = 1;
  j["kind"] = "subsample_study";
  j["dataset_tag"] = s.dataset_tag;
  j["mean_gain"] = s.mean_gain;
  j["sd_gain"] = opt(s.sd_gain);
  j["se_gain"] = opt(s.se_gain);
  j["ci_low"] = opt(s.ci_low);
  j["ci_high"] = opt(s.ci_high);
  j["all_positive"] = s.all_positive;
  j["runs"] = json::array();
  for (const auto& r : s.runs) {
    j["runs"].push_back({{"seed", r.seed},
                         {"n_train", r.n_train},
                         {"n_test", r.n_test},
                         {"mnl_accuracy", r.mnl_accuracy},
                         {"adapter_accuracy", r.adapter_accuracy},
                         {"gain", r.gain},
                         {"alpha", r.alpha},
                         {"mnl_monotonicity", opt(r.mnl_monotonicity)},
                         {"adapter_monotonicity", opt(r.adapter_monotonicity)},
                         {"failures", r.failures}});
  }
  return j.dump(2) + "\n";
}

SubsampleSummary parse_subsample_summary(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.value("kind", "") != "subsample_study") throw ParseError("not a subsample study document");
    SubsampleSummary s;
    s.dataset_tag = j.at("dataset_tag").get<std::string>();
    s.mean_gain = j.at("mean_gain").get<double>();
    s.sd_gain = get_opt<double>(j, "sd_gain");
    s.se_gain = get_opt<double>(j, "se_gain");
    s.ci_low = get_opt<double>(j, "ci_low");
    s.ci_high = get_opt<double>(j, "ci_high");
    s.all_positive = j.at("all_positive").get<bool>();
    for (const auto& r : j.at("runs")) {
      SubsampleRun run;
      run.seed = r.at("seed").get<std::uint64_t>();
      run.n_train = r.at("n_train").get<std::size_t>();
      run.n_test = r.at("n_test").get<std::size_t>();
      run.mnl_accuracy = r.at("mnl_accuracy").get<double>();
      run.adapter_accuracy = r.at("adapter_accuracy").get<double>();
      run.gain = r.at("gain").get<double>();
      run.alpha = r.at("alpha").get<double>();
      run.mnl_monotonicity = get_opt<double>(r, "mnl_monotonicity");
      run.adapter_monotonicity = get_opt<double>(r, "adapter_monotonicity");
      run.failures = r.at("failures").get<std::vector<std::string>>();
      s.runs.push_back(std::move(run));
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("subsample study document: ") + e.what());
  }
}

}  // namespace bva
