// SPDX-License-Identifier: Apache-2.0
// bva: fit, adapt, distill and audit discrete-choice models.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bva/adapter.h"
#include "bva/audit.h"
#include "bva/data.h"
#include "bva/errors.h"
#include "bva/fm_probs.h"
#include "bva/layout.h"
#include "bva/manifest.h"
#include "bva/mnl.h"
#include "bva/model_io.h"
#include "bva/report.h"
#include "bva/synthetic.h"

namespace fs = std::filesystem;
using namespace bva;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInvalid = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  // shared
  std::string dataset;
  std::string layout = "generic";
  std::string train;
  std::string val;
  std::string spec = "";
  std::string model_in;
  std::string model_out;
  std::string report_out;
  std::string out_dir;
  std::string manifest;
  std::string format = "table";
  std::string dataset_tag;
  std::string name;
  std::vector<std::string> fm_probs;
  std::vector<std::string> reports;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::size_t subsample_n = 0;
  std::vector<double> ratios{0.70, 0.15, 0.15};
  // optimiser
  int max_iters = -1;
  double step_size = -1;
  double tolerance = -1;
  int patience = -1;
  std::size_t hidden = kDefaultHiddenUnits;
  // audit
  double vot_ceiling = 200.0;
  double range_fraction = 0.01;
  // synth
  std::size_t n = 10000;
  double informativeness = 0.5;
  double smoothing = 0.05;
  double beta_time = -2.0;
  double beta_cost = -1.0;
  double availability_rate = 1.0;
  std::string style = "standard";
  // subsample study
  std::vector<std::uint64_t> seeds;
  std::size_t n_subsamples = 0;
  std::optional<double> synthetic_fm;
};

std::map<std::string, std::string> parse_fm_flags(const std::vector<std::string>& flags) {
  std::map<std::string, std::string> out;
  for (const auto& f : flags) {
    const auto eq = f.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == f.size()) {
      throw UsageError("--fm-probs expects <split>=<path>, got '" + f + "'");
    }
    if (!out.emplace(f.substr(0, eq), f.substr(eq + 1)).second) {
      throw UsageError("--fm-probs given twice for split '" + f.substr(0, eq) + "'");
    }
  }
  return out;
}

std::string require_fm(const std::map<std::string, std::string>& fm, const std::string& split,
                       const std::string& command) {
  auto it = fm.find(split);
  if (it == fm.end()) {
    throw UsageError(command + " needs --fm-probs " + split + "=<path>");
  }
  return it->second;
}

void require(const std::string& value, const std::string& flag, const std::string& command) {
  if (value.empty()) throw UsageError(command + " needs " + flag);
}

OptimConfig optim_config(OptimConfig base, const Options& o) {
  base.seed = o.seed;
  if (o.max_iters >= 0) base.max_iters = o.max_iters;
  if (o.step_size > 0) base.step_size = o.step_size;
  if (o.tolerance > 0) base.tolerance = o.tolerance;
  if (o.patience > 0) base.early_stop_patience = o.patience;
  base.validate();
  return base;
}

// Effective settings, since unset flags only carry a sentinel.
void record_optim(Manifest& m, const std::string& stage, const OptimConfig& c) {
  m.config[stage + ".max_iters"] = std::to_string(c.max_iters);
  m.config[stage + ".step_size"] = nlohmann::json(c.step_size).dump();
  m.config[stage + ".tolerance"] = nlohmann::json(c.tolerance).dump();
  m.config[stage + ".patience"] = std::to_string(c.early_stop_patience);
}

SplitConfig split_config(const Options& o) {
  if (o.ratios.size() != 3) throw UsageError("--ratios expects three values");
  SplitConfig c{{o.ratios[0], o.ratios[1], o.ratios[2]}, o.split_seed};
  c.validate();
  return c;
}

Dataset load_split(const std::string& path) { return load_dataset(path, Layout::kGeneric); }

LoadResult load_with_layout(const std::string& path, const std::string& layout) {
  if (layout == "generic") return load_dataset_detailed(path, Layout::kGeneric);
  if (layout == "swissmetro" || layout == "lpmc") {
    return load_dataset_detailed(path, parse_layout(layout));
  }
  if (!fs::exists(layout)) {
    throw UsageError("--layout must be swissmetro, lpmc, generic or a layout file; '" + layout +
                     "' not found");
  }
  return load_dataset_detailed(path, read_layout_config(layout));
}

bool is_swissmetro_layout(const std::string& layout) {
  if (layout == "swissmetro") return true;
  if (layout == "lpmc" || layout == "generic") return false;
  return read_layout_config(layout).name == "swissmetro";
}

std::string default_spec(const std::string& layout) {
  if (layout == "swissmetro" || layout == "lpmc") return layout;
  return "generic";
}

void emit(const std::string& text, const std::string& path, Manifest& m, const std::string& role) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  write_text_file(path, text);
  m.add_output(role, path);
}

fs::path manifest_path(const Options& o, const fs::path& primary) {
  if (!o.manifest.empty()) return o.manifest;
  if (primary.empty()) return {};
  return fs::path(primary.string() + ".manifest.json");
}

void finish(Manifest& m, const Options& o, const fs::path& primary) {
  const auto path = manifest_path(o, primary);
  if (!path.empty()) m.write(path);
}

void finish_in(Manifest& m, const Options& o, const fs::path& dir) {
  m.write(o.manifest.empty() ? dir / "manifest.json" : fs::path(o.manifest));
}

std::string model_label(const LoadedModel& lm) {
  if (lm.adapter) return "Adapter(" + lm.adapter->model.fm_source + ")";
  return lm.mnl->kind == "distilled-mnl" ? "Distilled MNL" : "MNL";
}

void print_convergence(const ConvergenceReport& r, std::size_t n_train) {
  std::cout << "iterations: " << r.iterations << "  converged: " << (r.converged ? "yes" : "no")
            << "  |grad|_inf: " << r.grad_inf_norm << "\n"
            << "train LL: " << r.train_ll << " (" << n_train << " rows)  val LL: " << r.val_ll
            << "\n";
  for (const auto& name : r.non_identified) std::cout << "not identified: " << name << "\n";
}

// ---- subcommands -----------------------------------------------------------

int run_ingest(const Options& o, Manifest& m) {
  require(o.dataset, "--dataset", "ingest");
  require(o.out_dir, "--out-dir", "ingest");
  auto loaded = load_with_layout(o.dataset, o.layout);
  m.add_input("dataset", o.dataset);
  Dataset ds = std::move(loaded.dataset);
  if (is_swissmetro_layout(o.layout)) ds = preprocess_swissmetro(ds);
  if (o.subsample_n > 0) ds = subsample(ds, o.subsample_n, o.split_seed);
  const auto s = split(ds, split_config(o));
  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  for (const auto& [name, part] : {std::pair{"train", &s.train}, std::pair{"val", &s.val},
                                   std::pair{"test", &s.test}}) {
    const auto path = dir / (std::string(name) + ".csv");
    save_dataset(*part, path);
    m.add_output(name, path);
    m.add_output(std::string(name) + "_schema", schema_path_for(path));
  }
  std::cout << "rows read: " << loaded.rows_read
            << "  dropped (invalid choice): " << loaded.dropped_invalid_choice
            << "  dropped (chosen unavailable): " << loaded.dropped_chosen_unavailable << "\n"
            << "kept: " << ds.size() << "  train/val/test: " << s.train.size() << "/"
            << s.val.size() << "/" << s.test.size() << "\n";
  m.seeds["split"] = o.split_seed;
  finish_in(m, o, dir);
  return 0;
}

int run_fit_mnl(const Options& o, Manifest& m) {
  require(o.train, "--train", "fit-mnl");
  require(o.model_out, "--model-out", "fit-mnl");
  const Dataset train = load_split(o.train);
  m.add_input("train", o.train);
  Dataset val = train.empty_like();
  if (!o.val.empty()) {
    val = load_split(o.val);
    m.add_input("val", o.val);
  }
  const BoundSpec spec(resolve_spec(o.spec.empty() ? "generic" : o.spec, train.alt_set), train);
  const auto cfg = optim_config(OptimConfig::stage1(), o);
  record_optim(m, "stage1", cfg);
  const auto fit = fit_stage1(train, val, spec, cfg);
  write_text_file(o.model_out, serialize_mnl({spec, fit.params, fit.report, "mnl"}));
  m.add_output("model", o.model_out);
  m.seeds["stage1"] = o.seed;
  print_convergence(fit.report, train.size());
  finish(m, o, o.model_out);
  return 0;
}

int run_fit_adapter(const Options& o, Manifest& m) {
  require(o.train, "--train", "fit-adapter");
  require(o.val, "--val", "fit-adapter");
  require(o.model_in, "--model-in", "fit-adapter");
  require(o.model_out, "--model-out", "fit-adapter");
  const auto fm_paths = parse_fm_flags(o.fm_probs);
  const auto fm_train_path = require_fm(fm_paths, "train", "fit-adapter");
  const auto fm_val_path = require_fm(fm_paths, "val", "fit-adapter");
  const Dataset train = load_split(o.train);
  const Dataset val = load_split(o.val);
  const auto lm = parse_model(read_text_file(o.model_in));
  if (!lm.mnl) throw UsageError("fit-adapter: --model-in must be an MNL model file");
  const auto fm_train = load_fm_probs(fm_train_path, train, "train");
  const auto fm_val = load_fm_probs(fm_val_path, val, "val");
  for (const auto& [role, path] : {std::pair{"train", o.train}, std::pair{"val", o.val},
                                   std::pair{"mnl_model", o.model_in},
                                   std::pair{"fm_train", fm_train_path},
                                   std::pair{"fm_val", fm_val_path}}) {
    m.add_input(role, path);
  }
  const BoundSpec spec(lm.mnl->spec.spec(), train);
  const auto& frozen = lm.mnl->params;
  const auto checksum = structural_checksum(frozen);
  const auto cfg = optim_config(OptimConfig::stage2(), o);
  record_optim(m, "stage2", cfg);
  const auto fit = fit_stage2(train, val, fm_train, fm_val, frozen, checksum, spec, cfg, o.hidden);

  AdapterModelFile out{{spec, frozen, checksum, fit.correction, fm_train.source_tag},
                       lm.mnl->report,
                       fit.correction.alpha,
                       fit.trace.iterations};
  write_text_file(o.model_out, serialize_adapter(out));
  m.add_output("model", o.model_out);
  m.seeds["stage2"] = o.seed;
  std::cout << "iterations: " << fit.trace.iterations
            << "  early stopped: " << (fit.trace.early_stopped ? "yes" : "no") << "\n"
            << "alpha: " << fit.correction.alpha << "\n"
            << "val LL: " << fit.init_val_ll << " (MNL) -> " << fit.val_ll << " (adapter)\n"
            << "structural checksum: " << checksum << "\n";
  finish(m, o, o.model_out);
  return 0;
}

int run_distill(const Options& o, Manifest& m) {
  require(o.train, "--train", "distill");
  require(o.model_out, "--model-out", "distill");
  const auto fm_paths = parse_fm_flags(o.fm_probs);
  const auto fm_train_path = require_fm(fm_paths, "train", "distill");
  const Dataset train = load_split(o.train);
  m.add_input("train", o.train);
  Dataset val = train.empty_like();
  if (!o.val.empty()) {
    val = load_split(o.val);
    m.add_input("val", o.val);
  }
  const auto fm_train = load_fm_probs(fm_train_path, train, "train");
  m.add_input("fm_train", fm_train_path);
  const BoundSpec spec(resolve_spec(o.spec.empty() ? "generic" : o.spec, train.alt_set), train);
  const auto cfg = optim_config(OptimConfig::stage1(), o);
  record_optim(m, "stage1", cfg);
  const auto fit = distill_mnl(train, val, fm_train, spec, cfg);
  write_text_file(o.model_out, serialize_mnl({spec, fit.params, fit.report, "distilled-mnl"}));
  m.add_output("model", o.model_out);
  m.seeds["distill"] = o.seed;
  print_convergence(fit.report, train.size());
  std::cout << "cross-entropy to FM (train, mean): " << fit.cross_entropy << "\n";
  finish(m, o, o.model_out);
  return 0;
}

int run_audit(const Options& o, Manifest& m) {
  require(o.dataset, "--dataset", "audit");
  const Dataset ds = load_split(o.dataset);
  m.add_input("dataset", o.dataset);
  const auto fm_paths = parse_fm_flags(o.fm_probs);
  if (fm_paths.size() > 1) throw UsageError("audit takes at most one --fm-probs");
  std::optional<FMProbabilities> fm;
  if (!fm_paths.empty()) {
    const auto& [split_name, path] = *fm_paths.begin();
    fm = load_fm_probs(path, ds, split_name);
    m.add_input("fm_" + split_name, path);
  }

  AuditConfig cfg;
  cfg.dataset_tag = o.dataset_tag.empty() ? fs::path(o.dataset).filename().string() : o.dataset_tag;
  cfg.vot_ceiling = o.vot_ceiling;
  cfg.range_fraction = o.range_fraction;

  std::unique_ptr<PredictFn> predictor;
  if (!o.model_in.empty()) {
    const auto lm = parse_model(read_text_file(o.model_in));
    m.add_input("model", o.model_in);
    const std::string label = o.name.empty() ? model_label(lm) : o.name;
    if (lm.adapter) {
      if (!fm) throw UsageError("audit of an adapter needs --fm-probs <split>=<path>");
      AdapterModel model = lm.adapter->model;
      model.spec = BoundSpec(model.spec.spec(), ds);
      predictor = std::make_unique<AdapterPredictor>(model, *fm, label);
    } else {
      predictor = std::make_unique<MnlPredictor>(BoundSpec(lm.mnl->spec.spec(), ds),
                                                 lm.mnl->params, label);
    }
  } else if (fm) {
    predictor = std::make_unique<TablePredictor>(*fm, o.name.empty() ? fm->source_tag : o.name);
  } else {
    throw UsageError("audit needs --model-in or --fm-probs");
  }

  const auto report = full_audit(*predictor, ds, cfg);
  const std::string text = o.format == "machine"
                               ? render_machine(report)
                               : render_table(compare_models({report}));
  emit(text, o.report_out, m, "report");
  // A machine copy is kept next to a table report so `compare` can use it.
  if (o.format != "machine" && !o.report_out.empty()) {
    const auto machine = o.report_out + ".json";
    write_text_file(machine, render_machine(report));
    m.add_output("report_machine", machine);
  }
  finish(m, o, o.report_out);
  if (!report.hard_validity_ok()) {
    for (const auto& f : report.hard_validity_failures())
      std::cerr << "hard validity failure: " << f << "\n";
    return kExitInvalid;
  }
  return 0;
}

int run_compare(const Options& o, Manifest& m) {
  if (o.reports.empty()) throw UsageError("compare needs one or more --report <machine report>");
  std::vector<AuditReport> reports;
  for (const auto& path : o.reports) {
    reports.push_back(parse_audit_report(read_text_file(path)));
    m.add_input("report", path);
  }
  const auto table = compare_models(reports);
  emit(o.format == "machine" ? render_machine(table) : render_table(table), o.report_out, m,
       "comparison");
  finish(m, o, o.report_out);
  return 0;
}

int run_synth(const Options& o, Manifest& m) {
  require(o.out_dir, "--out-dir", "synth");
  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  m.seeds["data"] = o.seed;
  if (o.style == "swissmetro" || o.style == "lpmc") {
    const auto path = dir / (o.style == "swissmetro" ? "swissmetro.dat" : "lpmc.csv");
    const auto truth = o.style == "swissmetro" ? write_swissmetro_like(path, o.n, o.seed)
                                               : write_lpmc_like(path, o.n, o.seed);
    m.add_output("raw", path);
    std::cout << "wrote " << truth.rows_written << " rows to " << path.string() << "\n";
    finish_in(m, o, dir);
    return 0;
  }
  if (o.style != "standard") throw UsageError("--style must be standard, swissmetro or lpmc");

  auto cfg = GeneratorConfig::standard(o.n, o.seed, o.beta_time, o.beta_cost);
  cfg.availability_rate = o.availability_rate;
  cfg.fm_informativeness = o.informativeness;
  if (o.availability_rate < 1.0) cfg.always_available = {cfg.alternatives.back()};
  const auto data = generate(cfg);
  const auto s = split(data.dataset, split_config(o));
  FmSynthOptions fo;
  fo.smoothing = o.smoothing;
  for (const auto& [name, part] : {std::pair{"train", &s.train}, std::pair{"val", &s.val},
                                   std::pair{"test", &s.test}}) {
    const auto path = dir / (std::string(name) + ".csv");
    save_dataset(*part, path);
    m.add_output(name, path);
    m.add_output(std::string(name) + "_schema", schema_path_for(path));
    fo.split = name;
    const auto fm_path = dir / ("fm_" + std::string(name) + ".csv");
    save_fm_probs(make_fm_probs(*part, o.informativeness, o.seed, fo), fm_path);
    m.add_output("fm_" + std::string(name), fm_path);
  }
  nlohmann::ordered_json truth;
  truth["beta_time"] = o.beta_time;
  truth["beta_cost"] = o.beta_cost;
  truth["vot"] = o.beta_time / o.beta_cost * 60.0;
  truth["informativeness"] = o.informativeness;
  write_text_file(dir / "truth.json", truth.dump(2) + "\n");
  m.add_output("truth", dir / "truth.json");
  m.seeds["split"] = o.split_seed;
  std::cout << "train/val/test: " << s.train.size() << "/" << s.val.size() << "/"
            << s.test.size() << "\n";
  finish_in(m, o, dir);
  return 0;
}

int run_subsample_study(const Options& o, Manifest& m) {
  require(o.dataset, "--dataset", "subsample-study");
  auto loaded = load_with_layout(o.dataset, o.layout);
  m.add_input("dataset", o.dataset);
  Dataset ds = std::move(loaded.dataset);
  if (is_swissmetro_layout(o.layout)) ds = preprocess_swissmetro(ds);

  std::vector<std::uint64_t> seeds = o.seeds;
  if (seeds.empty()) {
    if (o.n_subsamples == 0) throw UsageError("subsample-study needs --seeds or --n-subsamples");
    for (std::size_t i = 1; i <= o.n_subsamples; ++i) seeds.push_back(o.seed + i);
  }
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (seeds[i] == seeds[j]) throw UsageError("--seeds repeats " + std::to_string(seeds[i]));

  PipelineConfig cfg;
  cfg.spec = o.spec.empty() ? default_spec(o.layout) : o.spec;
  cfg.subsample_n = o.subsample_n;
  const auto sc = split_config(o);
  cfg.ratios = sc.ratios;
  cfg.stage1 = optim_config(OptimConfig::stage1(), o);
  cfg.stage2 = optim_config(OptimConfig::stage2(), o);
  record_optim(m, "stage1", cfg.stage1);
  record_optim(m, "stage2", cfg.stage2);
  cfg.hidden = o.hidden;
  cfg.audit.dataset_tag = o.dataset_tag.empty() ? fs::path(o.dataset).filename().string()
                                                 : o.dataset_tag;
  cfg.audit.vot_ceiling = o.vot_ceiling;

  const auto fm_paths = parse_fm_flags(o.fm_probs);
  FmProvider provider;
  if (o.synthetic_fm) {
    if (!fm_paths.empty()) throw UsageError("give either --fm-probs or --synthetic-fm, not both");
    provider = synthetic_provider(*o.synthetic_fm);
  } else {
    const auto path = require_fm(fm_paths, "all", "subsample-study");
    provider = table_provider(load_fm_table(path, ds.alt_set));
    m.add_input("fm_all", path);
  }
  for (std::size_t i = 0; i < seeds.size(); ++i) m.seeds["run" + std::to_string(i)] = seeds[i];

  const auto summary = subsample_study(ds, seeds, cfg, provider);
  emit(o.format == "machine" ? render_machine(summary) : render_table(summary), o.report_out, m,
       "summary");
  finish(m, o, o.report_out);
  if (!summary.hard_validity_ok()) {
    std::cerr << "one or more runs failed hard validity\n";
    return kExitInvalid;
  }
  return 0;
}

void record_config(const CLI::App& sub, Manifest& m) {
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_name() == "--help" || opt->get_name() == "--config") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    m.config[opt->get_name()] = value;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bva: behaviorally valid discrete-choice models"};
  app.set_config("--config", "", "INI file with one section per subcommand; flags override it");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Options o;

  auto add_common_fit = [&](CLI::App* s) {
    s->add_option("--train", o.train, "training split (generic layout)");
    s->add_option("--val", o.val, "validation split (generic layout)");
    s->add_option("--seed", o.seed, "optimiser seed");
    s->add_option("--model-out", o.model_out, "model file to write");
    s->add_option("--max-iters", o.max_iters, "iteration cap");
    s->add_option("--step-size", o.step_size, "Adam step size");
    s->add_option("--tolerance", o.tolerance, "gradient infinity-norm tolerance");
    s->add_option("--patience", o.patience, "stall patience in iterations");
  };
  auto add_manifest = [&](CLI::App* s) {
    s->add_option("--manifest", o.manifest, "manifest path (default: next to the main output)");
  };
  auto add_format = [&](CLI::App* s) {
    s->add_option("--format", o.format, "table or machine")
        ->check(CLI::IsMember({"table", "machine"}));
    s->add_option("--report-out", o.report_out, "write the report here instead of stdout");
  };

  auto* ingest = app.add_subcommand("ingest", "load, preprocess and split a raw dataset");
  ingest->add_option("--dataset", o.dataset, "raw data file");
  ingest->add_option("--layout", o.layout, "swissmetro, lpmc, generic or a layout file");
  ingest->add_option("--split-seed", o.split_seed, "shuffle seed");
  ingest->add_option("--subsample-n", o.subsample_n, "draw this many rows first (0 = all)");
  ingest->add_option("--ratios", o.ratios, "train,val,test fractions")->delimiter(',');
  ingest->add_option("--out-dir", o.out_dir, "directory for train/val/test files");
  add_manifest(ingest);

  auto* fit_mnl = app.add_subcommand("fit-mnl", "Stage 1: sign-constrained MNL");
  add_common_fit(fit_mnl);
  fit_mnl->add_option("--spec", o.spec, "swissmetro, lpmc, generic or a JSON spec file");
  add_manifest(fit_mnl);

  auto* fit_adapter = app.add_subcommand("fit-adapter", "Stage 2: FM correction on a frozen MNL");
  add_common_fit(fit_adapter);
  fit_adapter->add_option("--model-in", o.model_in, "MNL model file");
  fit_adapter->add_option("--fm-probs", o.fm_probs, "<split>=<path>, for train and val");
  fit_adapter->add_option("--hidden", o.hidden, "hidden units of the correction network");
  add_manifest(fit_adapter);

  auto* distill = app.add_subcommand("distill", "fit an MNL to FM probabilities");
  add_common_fit(distill);
  distill->add_option("--spec", o.spec, "swissmetro, lpmc, generic or a JSON spec file");
  distill->add_option("--fm-probs", o.fm_probs, "train=<path>");
  add_manifest(distill);

  auto* audit = app.add_subcommand("audit", "behavioral audit of a model or probability table");
  audit->add_option("--dataset", o.dataset, "split file to audit on");
  audit->add_option("--model-in", o.model_in, "model file (omit to audit --fm-probs as a table)");
  audit->add_option("--fm-probs", o.fm_probs, "<split>=<path> for the audited split");
  audit->add_option("--dataset-tag", o.dataset_tag, "label shared by comparable reports");
  audit->add_option("--name", o.name, "model label in the report");
  audit->add_option("--vot-ceiling", o.vot_ceiling, "plausibility ceiling for VOT (per hour)");
  audit->add_option("--range-fraction", o.range_fraction, "perturbation as a share of range");
  add_format(audit);
  add_manifest(audit);

  auto* compare = app.add_subcommand("compare", "side-by-side table of audit reports");
  compare->add_option("--report", o.reports, "machine-readable audit report (repeatable)");
  add_format(compare);
  add_manifest(compare);

  auto* synth = app.add_subcommand("synth", "generate synthetic data and FM probability files");
  synth->add_option("--n", o.n, "observations");
  synth->add_option("--seed", o.seed, "generator seed");
  synth->add_option("--style", o.style, "standard, swissmetro or lpmc (raw file layouts)");
  synth->add_option("--informativeness", o.informativeness, "FM informativeness in [0, 1]");
  synth->add_option("--smoothing", o.smoothing, "FM label smoothing");
  synth->add_option("--beta-time", o.beta_time, "true time coefficient");
  synth->add_option("--beta-cost", o.beta_cost, "true cost coefficient");
  synth->add_option("--availability-rate", o.availability_rate, "chance each alternative is offered");
  synth->add_option("--split-seed", o.split_seed, "shuffle seed");
  synth->add_option("--ratios", o.ratios, "train,val,test fractions")->delimiter(',');
  synth->add_option("--out-dir", o.out_dir, "output directory");
  add_manifest(synth);

  auto* study = app.add_subcommand("subsample-study", "repeat the two-stage pipeline on subsamples");
  study->add_option("--dataset", o.dataset, "data file");
  study->add_option("--layout", o.layout, "swissmetro, lpmc, generic or a layout file");
  study->add_option("--spec", o.spec, "utility spec (default follows the layout)");
  study->add_option("--subsample-n", o.subsample_n, "rows per subsample (0 = all)");
  study->add_option("--seeds", o.seeds, "comma-separated seeds")->delimiter(',');
  study->add_option("--n-subsamples", o.n_subsamples, "use seeds seed+1 .. seed+n");
  study->add_option("--seed", o.seed, "base seed for --n-subsamples");
  study->add_option("--fm-probs", o.fm_probs, "all=<path> covering every row of the dataset");
  study->add_option("--synthetic-fm", o.synthetic_fm, "use synthetic FM probabilities at this informativeness");
  study->add_option("--ratios", o.ratios, "train,val,test fractions")->delimiter(',');
  study->add_option("--hidden", o.hidden, "hidden units of the correction network");
  study->add_option("--max-iters", o.max_iters, "iteration cap for both stages");
  study->add_option("--dataset-tag", o.dataset_tag, "label for the summary");
  study->add_option("--vot-ceiling", o.vot_ceiling, "plausibility ceiling for VOT (per hour)");
  add_format(study);
  add_manifest(study);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  Manifest manifest;
  manifest.command = sub->get_name();
  for (int i = 1; i < argc; ++i) manifest.args.emplace_back(argv[i]);
  record_config(*sub, manifest);

  try {
    const std::string name = sub->get_name();
    if (name == "ingest") return run_ingest(o, manifest);
    if (name == "fit-mnl") return run_fit_mnl(o, manifest);
    if (name == "fit-adapter") return run_fit_adapter(o, manifest);
    if (name == "distill") return run_distill(o, manifest);
    if (name == "audit") return run_audit(o, manifest);
    if (name == "compare") return run_compare(o, manifest);
    if (name == "synth") return run_synth(o, manifest);
    if (name == "subsample-study") return run_subsample_study(o, manifest);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nrun `bva " << sub->get_name()
              << " --help` for the options\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
