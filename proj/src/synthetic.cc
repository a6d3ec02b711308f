// SPDX-License-Identifier: Apache-2.0
#include "bva/synthetic.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "bva/errors.h"
#include "rng.h"
#include "text_util.h"

namespace bva {

GeneratorConfig GeneratorConfig::standard(std::size_t n, std::uint64_t seed,
                                          double beta_time, double beta_cost) {
  GeneratorConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  AlternativeSet alts{cfg.alternatives, {"time", "cost"}};
  cfg.spec = UtilitySpec::generic(alts, {"time", "cost"});
  cfg.true_params.theta = {std::log(-beta_time), std::log(-beta_cost)};
  cfg.true_params.asc = {0.3, -0.2};
  return cfg;
}

void GeneratorConfig::validate() const {
  if (!(fm_informativeness >= 0.0 && fm_informativeness <= 1.0)) {
    throw std::invalid_argument("fm_informativeness must lie in [0, 1]");
  }
  if (!(availability_rate > 0.0 && availability_rate <= 1.0)) {
    throw std::invalid_argument("availability_rate must lie in (0, 1]");
  }
  for (const auto& r : attributes)
    if (!(r.max >= r.min)) throw std::invalid_argument("attribute range inverted");
}

SyntheticData generate(const GeneratorConfig& cfg) {
  cfg.validate();
  SyntheticData out;
  Dataset& ds = out.dataset;
  ds.alt_set.names = cfg.alternatives;
  for (const auto& a : cfg.attributes) ds.alt_set.attribute_names.push_back(a.name);
  for (const auto& s : cfg.socio) ds.socio_names.push_back(s.name);
  ds.alt_set.validate();
  const BoundSpec spec(cfg.spec, ds);
  const std::size_t k = ds.alt_set.size();
  const std::size_t na = cfg.attributes.size();
  std::vector<std::uint8_t> forced(k, 0);
  for (const auto& name : cfg.always_available) {
    auto idx = ds.alt_set.index_of(name);
    if (!idx) throw SchemaError("always_available names unknown alternative " + name);
    forced[*idx] = 1;
  }

  ds.rows.reserve(cfg.n);
  out.true_probs.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    auto gen = detail::stream(cfg.seed, i);
    Observation obs;
    obs.id = static_cast<std::int64_t>(i + 1);
    obs.num_attributes = na;
    obs.attrs.resize(k * na);
    for (std::size_t alt = 0; alt < k; ++alt)
      for (std::size_t a = 0; a < na; ++a)
        obs.attr(alt, a) = detail::uniform(gen, cfg.attributes[a].min, cfg.attributes[a].max);
    for (const auto& s : cfg.socio) obs.socio.push_back(detail::uniform(gen, s.min, s.max));
    obs.avail.assign(k, 1);
    if (cfg.availability_rate < 1.0) {
      do {
        for (std::size_t alt = 0; alt < k; ++alt) {
          obs.avail[alt] = forced[alt] || detail::uniform01(gen) < cfg.availability_rate;
        }
      } while (obs.num_available() == 0);
    }
    const auto v = structural_utility(cfg.true_params, spec, obs);
    auto p = choice_probabilities(v, obs.avail);
    if (cfg.noise_free) {
      std::size_t best = k;
      for (std::size_t alt = 0; alt < k; ++alt)
        if (obs.avail[alt] && (best == k || v[alt] > v[best])) best = alt;
      obs.choice = best;
    } else {
      const double u = detail::uniform01(gen);
      double acc = 0.0;
      std::size_t last = 0;
      obs.choice = k;
      for (std::size_t alt = 0; alt < k; ++alt) {
        if (!obs.avail[alt]) continue;
        last = alt;
        acc += p[alt];
        if (u < acc) {
          obs.choice = alt;
          break;
        }
      }
      if (obs.choice == k) obs.choice = last;
    }
    ds.rows.push_back(std::move(obs));
    out.true_probs.push_back(std::move(p));
  }
  ds.provenance = "synthetic n=" + std::to_string(cfg.n) + " seed=" + std::to_string(cfg.seed);
  return out;
}

FMProbabilities make_fm_probs(const Dataset& ds, double informativeness,
                              std::uint64_t seed, const FmSynthOptions& opts) {
  if (!(informativeness >= 0.0 && informativeness <= 1.0)) {
    throw std::invalid_argument("informativeness must lie in [0, 1]");
  }
  if (!(opts.smoothing >= 0.0 && opts.smoothing <= 1.0) ||
      !(opts.label_noise >= 0.0 && opts.label_noise <= 1.0)) {
    throw std::invalid_argument("smoothing and label_noise must lie in [0, 1]");
  }
  FMProbabilities fm;
  fm.source_tag = opts.source_tag;
  fm.split = opts.split;
  fm.alternatives = ds.alt_set.names;
  const std::size_t k = ds.alt_set.size();
  const double kd = static_cast<double>(k);
  for (const auto& r : ds.rows) {
    std::size_t label = r.choice;
    if (opts.label_noise > 0.0) {
      auto gen = detail::stream(seed, static_cast<std::uint64_t>(r.id));
      if (detail::uniform01(gen) < opts.label_noise) {
        label = (label + 1 + detail::uniform_index(gen, k - 1)) % k;
      }
    }
    std::vector<double> q(k);
    for (std::size_t j = 0; j < k; ++j) {
      const double onehot = j == label ? 1.0 : 0.0;
      q[j] = (1.0 - informativeness) / kd +
             informativeness * ((1.0 - opts.smoothing) * onehot + opts.smoothing / kd);
    }
    normalize_probability_vector(q, r.id);
    fm.rows.emplace(r.id, std::move(q));
  }
  return fm;
}

namespace {

std::size_t sample(std::mt19937_64& gen, const std::vector<double>& p) {
  const double u = detail::uniform01(gen);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    last = k;
    acc += p[k];
    if (u < acc) return k;
  }
  return last;
}

std::string fmt(double v) { return detail::format_double(v); }

double round_to(double v, double step) { return std::round(v / step) * step; }

}  // namespace

RawLayoutTruth write_swissmetro_like(const std::filesystem::path& path, std::size_t n,
                                     std::uint64_t seed, std::size_t invalid_choice_rows) {
  RawLayoutTruth truth;
  truth.spec = UtilitySpec::swissmetro();
  // time, cost thetas; train and sm ASCs. VOT = 0.0125 / 0.0094 * 60 ~ 79.8.
  truth.params.theta = {std::log(0.0125), std::log(0.0094)};
  truth.params.asc = {-0.45, 0.15};
  const double b_time = -0.0125;
  const double b_cost = -0.0094;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "GROUP\tSURVEY\tSP\tID\tPURPOSE\tFIRST\tTICKET\tWHO\tLUGGAGE\tAGE\tMALE\t"
         "INCOME\tGA\tORIGIN\tDEST\tTRAIN_AV\tCAR_AV\tSM_AV\tTRAIN_TT\tTRAIN_CO\t"
         "TRAIN_HE\tSM_TT\tSM_CO\tSM_HE\tSM_SEATS\tCAR_TT\tCAR_CO\tCHOICE\n";
  const std::size_t total = n + invalid_choice_rows;
  for (std::size_t i = 0; i < total; ++i) {
    auto gen = detail::stream(seed, i);
    const int respondent = static_cast<int>(i / 9) + 1;
    const int ga = detail::uniform01(gen) < 0.14 ? 1 : 0;
    const int car_av = detail::uniform01(gen) < 0.85 ? 1 : 0;
    const double train_tt = round_to(detail::uniform(gen, 40, 320), 1);
    const double sm_tt = round_to(detail::uniform(gen, 15, 160), 1);
    const double car_tt = car_av ? round_to(detail::uniform(gen, 30, 300), 1) : 0.0;
    const double train_co = round_to(detail::uniform(gen, 10, 220), 1);
    const double sm_co = round_to(train_co * detail::uniform(gen, 0.9, 1.4), 1);
    const double car_co = car_av ? round_to(detail::uniform(gen, 10, 180), 1) : 0.0;
    const double train_he = 30 + 30 * static_cast<double>(detail::uniform_index(gen, 3));
    const double sm_he = 10 + 10 * static_cast<double>(detail::uniform_index(gen, 3));

    const double tc = ga ? 0.0 : train_co;
    const double sc = ga ? 0.0 : sm_co;
    std::vector<double> v{-0.45 + b_time * train_tt + b_cost * tc,
                          0.15 + b_time * sm_tt + b_cost * sc,
                          b_time * car_tt + b_cost * car_co};
    const std::vector<std::uint8_t> avail{1, 1, static_cast<std::uint8_t>(car_av)};
    const auto p = choice_probabilities(v, avail);
    int choice = static_cast<int>(sample(gen, p)) + 1;
    if (i >= n) choice = 0;  // unknown-choice rows, dropped by the loader

    out << 2 << '\t' << 0 << '\t' << 1 << '\t' << respondent << '\t'
        << 1 + detail::uniform_index(gen, 9) << '\t' << detail::uniform_index(gen, 2) << '\t'
        << 1 + detail::uniform_index(gen, 10) << '\t' << 1 + detail::uniform_index(gen, 3)
        << '\t' << detail::uniform_index(gen, 3) << '\t' << 1 + detail::uniform_index(gen, 5)
        << '\t' << detail::uniform_index(gen, 2) << '\t' << detail::uniform_index(gen, 5)
        << '\t' << ga << '\t' << 1 + detail::uniform_index(gen, 25) << '\t'
        << 1 + detail::uniform_index(gen, 25) << '\t' << 1 << '\t' << car_av << '\t' << 1
        << '\t' << fmt(train_tt) << '\t' << fmt(train_co) << '\t' << fmt(train_he) << '\t'
        << fmt(sm_tt) << '\t' << fmt(sm_co) << '\t' << fmt(sm_he) << '\t' << 0 << '\t'
        << fmt(car_tt) << '\t' << fmt(car_co) << '\t' << choice << '\n';
  }
  truth.rows_written = total;
  truth.invalid_choice_rows = invalid_choice_rows;
  return truth;
}

RawLayoutTruth write_lpmc_like(const std::filesystem::path& path, std::size_t n,
                               std::uint64_t seed) {
  RawLayoutTruth truth;
  truth.spec = UtilitySpec::lpmc();
  // time_active, time_pt, time_drive, cost_pt, cost_drive
  const double b_active = -0.08, b_tpt = -0.03, b_tdr = -0.06, b_cpt = -1.0, b_cdr = -0.2;
  truth.params.theta = {std::log(-b_active), std::log(-b_tpt), std::log(-b_tdr),
                        std::log(-b_cpt), std::log(-b_cdr)};
  truth.params.asc = {1.2, -1.6, 0.4};  // walk, cycle, pt

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "trip_id,household_id,person_n,trip_n,travel_mode,purpose,fueltype,faretype,"
         "bus_scale,survey_year,travel_year,travel_month,travel_date,day_of_week,"
         "start_time_linear,age,female,driving_license,car_ownership,distance,"
         "dur_walking,dur_cycling,dur_pt_access,dur_pt_rail,dur_pt_bus,"
         "dur_pt_int_waiting,dur_pt_int_walking,pt_n_interchanges,dur_driving,"
         "cost_transit,cost_driving_fuel,cost_driving_con_charge,"
         "driving_traffic_percent\n";
  static const char* kModes[] = {"walk", "cycle", "pt", "drive"};
  static const char* kPurpose[] = {"HBW", "HBE", "HBO", "B", "NHBO"};
  static const char* kFuel[] = {"Petrol_Car", "Diesel_Car", "Hybrid_Car", "Petrol_LGV"};
  static const char* kFare[] = {"full", "16+", "child", "dis", "free"};
  for (std::size_t i = 0; i < n; ++i) {
    auto gen = detail::stream(seed, i);
    const double dist_m = detail::uniform(gen, 300, 20000);
    const double km = dist_m / 1000.0;
    // Durations in hours, as in the source file.
    const double walk_h = km / detail::uniform(gen, 4.0, 5.5);
    const double cycle_h = km / detail::uniform(gen, 12.0, 18.0);
    const double pt_access = detail::uniform(gen, 0.05, 0.25);
    const double pt_rail = detail::uniform01(gen) < 0.5 ? km / detail::uniform(gen, 25, 40) : 0.0;
    const double pt_bus = km / detail::uniform(gen, 10, 18) * (pt_rail > 0 ? 0.3 : 1.0);
    const double pt_wait = detail::uniform(gen, 0.0, 0.15);
    const double pt_iwalk = detail::uniform(gen, 0.0, 0.05);
    const double drive_h = km / detail::uniform(gen, 15, 35);
    const double cost_pt = detail::uniform01(gen) < 0.15 ? 0.0 : round_to(detail::uniform(gen, 1.5, 6.0), 0.1);
    const double fuel = round_to(0.12 * km * detail::uniform(gen, 0.8, 1.3), 0.01);
    const double charge = detail::uniform01(gen) < 0.08 ? 11.5 : 0.0;

    const double pt_min = 60 * (pt_access + pt_rail + pt_bus + pt_wait + pt_iwalk);
    std::vector<double> v{1.2 + b_active * 60 * walk_h, -1.6 + b_active * 60 * cycle_h,
                          0.4 + b_tpt * pt_min + b_cpt * cost_pt,
                          b_tdr * 60 * drive_h + b_cdr * (fuel + charge)};
    const auto p = choice_probabilities(v, std::vector<std::uint8_t>(4, 1));
    const auto mode = sample(gen, p);

    out << i + 1 << ',' << 1 + i / 3 << ',' << 1 + detail::uniform_index(gen, 3) << ','
        << 1 + i % 3 << ',' << kModes[mode] << ',' << kPurpose[detail::uniform_index(gen, 5)]
        << ',' << kFuel[detail::uniform_index(gen, 4)] << ','
        << kFare[detail::uniform_index(gen, 5)] << ',' << fmt(round_to(detail::uniform01(gen), 0.01))
        << ',' << 2012 + detail::uniform_index(gen, 4) << ',' << 2012 + detail::uniform_index(gen, 4)
        << ',' << 1 + detail::uniform_index(gen, 12) << ',' << 1 + detail::uniform_index(gen, 28)
        << ',' << 1 + detail::uniform_index(gen, 7) << ','
        << fmt(round_to(detail::uniform(gen, 5, 23), 0.01)) << ','
        << 16 + detail::uniform_index(gen, 65) << ',' << detail::uniform_index(gen, 2) << ','
        << detail::uniform_index(gen, 2) << ',' << detail::uniform_index(gen, 3) << ','
        << fmt(std::round(dist_m)) << ',' << fmt(walk_h) << ',' << fmt(cycle_h) << ','
        << fmt(pt_access) << ',' << fmt(pt_rail) << ',' << fmt(pt_bus) << ',' << fmt(pt_wait)
        << ',' << fmt(pt_iwalk) << ',' << (pt_rail > 0 ? 1 : 0) << ',' << fmt(drive_h) << ','
        << fmt(cost_pt) << ',' << fmt(fuel) << ',' << fmt(charge) << ','
        << fmt(round_to(detail::uniform01(gen), 0.01)) << '\n';
  }
  truth.rows_written = n;
  return truth;
}

}  // namespace bva
