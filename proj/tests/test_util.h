// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <unistd.h>
#include <vector>

#include "bva/adapter.h"
#include "bva/data.h"
#include "bva/fm_probs.h"
#include "bva/mnl.h"

namespace bva::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("bva_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Central difference of f along each coordinate of x.
template <typename F>
std::vector<double> central_difference(F&& f, std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    x[i] = x0;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(1, |a_i|, |b_i|)
inline double max_relative_error(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

/// A random small problem: K alternatives, attributes time and cost, one
/// socio variable "s" (0/1) with interactions, a cost-zero rule on "s",
/// random availability and choices.
struct RandomInstance {
  Dataset ds;
  UtilitySpec spec;
  StructuralParams params;
  FMProbabilities fm;
  CorrectionParams correction;
};

inline RandomInstance random_instance(std::uint64_t seed, std::size_t rows = 25) {
  std::mt19937_64 gen(seed);
  auto unif = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen);
  };
  RandomInstance r;
  const std::size_t k = 2 + seed % 4;
  for (std::size_t j = 0; j < k; ++j) r.ds.alt_set.names.push_back("alt" + std::to_string(j));
  r.ds.alt_set.attribute_names = {"time", "cost"};
  r.ds.socio_names = {"s"};
  for (std::size_t i = 0; i < rows; ++i) {
    Observation o;
    o.id = static_cast<std::int64_t>(i + 1);
    o.num_attributes = 2;
    o.attrs.resize(k * 2);
    for (auto& a : o.attrs) a = unif(0.0, 3.0);
    o.socio = {unif(0, 1) < 0.3 ? 1.0 : 0.0};
    o.avail.assign(k, 1);
    for (std::size_t j = 0; j < k; ++j) o.avail[j] = unif(0, 1) < 0.8;
    o.avail[i % k] = 1;
    std::vector<std::size_t> open;
    for (std::size_t j = 0; j < k; ++j)
      if (o.avail[j]) open.push_back(j);
    o.choice = open[static_cast<std::size_t>(unif(0, 1) * open.size()) % open.size()];
    r.ds.rows.push_back(std::move(o));
  }
  r.spec.name = "random";
  r.spec.asc_alts.assign(r.ds.alt_set.names.begin(), r.ds.alt_set.names.end() - 1);
  r.spec.coefficients.push_back({"time", "time", r.ds.alt_set.names});
  // Mode-specific cost on the first alternative, shared on the rest.
  r.spec.coefficients.push_back({"cost_a0", "cost", {r.ds.alt_set.names[0]}});
  r.spec.coefficients.push_back(
      {"cost_rest", "cost", {r.ds.alt_set.names.begin() + 1, r.ds.alt_set.names.end()}});
  r.spec.interactions.push_back({"s", r.ds.alt_set.names[0]});
  r.spec.cost_zero_rule = CostZeroRule{"s", "cost", {r.ds.alt_set.names[1]}};

  const BoundSpec bound(r.spec, r.ds);
  r.params = StructuralParams::zeros(bound);
  for (auto& t : r.params.theta) t = unif(-1.0, 0.5);
  for (auto& a : r.params.asc) a = unif(-1.0, 1.0);
  for (auto& w : r.params.w_inter) w = unif(-1.0, 1.0);

  r.fm.source_tag = "random";
  r.fm.split = "train";
  r.fm.alternatives = r.ds.alt_set.names;
  for (const auto& o : r.ds.rows) {
    std::vector<double> q(k);
    double sum = 0.0;
    for (auto& v : q) sum += (v = unif(0.01, 1.0));
    for (auto& v : q) v /= sum;
    normalize_probability_vector(q, o.id);
    r.fm.rows.emplace(o.id, q);
  }
  const std::size_t hidden = 3 + seed % 5;
  r.correction = CorrectionParams::zero(k, hidden);
  r.correction.alpha = unif(-0.5, 1.5);
  for (auto& w : r.correction.w1) w = unif(-1, 1);
  for (auto& w : r.correction.b1) w = unif(-1, 1);
  for (auto& w : r.correction.w2) w = unif(-1, 1);
  for (auto& w : r.correction.b2) w = unif(-1, 1);
  return r;
}

}  // namespace bva::testing
