// SPDX-License-Identifier: Apache-2.0
#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <random>

#include "bva/errors.h"
#include "bva/mnl.h"
#include "bva/synthetic.h"
#include "test_util.h"

namespace bva {
namespace {

using big = boost::multiprecision::cpp_bin_float_50;
using testing::central_difference;
using testing::max_relative_error;
using testing::random_instance;

std::vector<big> softmax_oracle(const std::vector<double>& v,
                                const std::vector<std::uint8_t>& avail) {
  big denom = 0;
  for (std::size_t k = 0; k < v.size(); ++k)
    if (avail[k]) denom += boost::multiprecision::exp(big(v[k]));
  std::vector<big> p(v.size(), big(0));
  for (std::size_t k = 0; k < v.size(); ++k)
    if (avail[k]) p[k] = boost::multiprecision::exp(big(v[k])) / denom;
  return p;
}

// Utility straight from the spec's names, without BoundSpec.
std::vector<double> utility_oracle(const UtilitySpec& spec, const Dataset& ds,
                                   const StructuralParams& p, const Observation& o) {
  const auto& alts = ds.alt_set;
  std::vector<double> v(alts.size(), 0.0);
  for (std::size_t i = 0; i < spec.asc_alts.size(); ++i) v[*alts.index_of(spec.asc_alts[i])] += p.asc[i];
  for (std::size_t c = 0; c < spec.coefficients.size(); ++c) {
    const auto& coef = spec.coefficients[c];
    const auto a = *alts.attribute_index(coef.attribute);
    for (const auto& name : coef.alternatives) {
      const auto k = *alts.index_of(name);
      bool zeroed = false;
      if (spec.cost_zero_rule && spec.cost_zero_rule->attribute == coef.attribute &&
          o.socio[*ds.socio_index(spec.cost_zero_rule->socio)] != 0.0) {
        for (const auto& z : spec.cost_zero_rule->alternatives) zeroed |= z == name;
      }
      if (!zeroed) v[k] += -std::exp(p.theta[c]) * o.attr(k, a);
    }
  }
  for (std::size_t i = 0; i < spec.interactions.size(); ++i) {
    const auto& in = spec.interactions[i];
    v[*alts.index_of(in.alternative)] += p.w_inter[i] * o.socio[*ds.socio_index(in.socio)];
  }
  return v;
}

Dataset tiny_dataset(const std::vector<std::vector<double>>& attrs_per_row,
                     std::vector<std::size_t> choices) {
  Dataset ds;
  ds.alt_set = {{"a", "b"}, {"time", "cost"}};
  for (std::size_t i = 0; i < attrs_per_row.size(); ++i) {
    Observation o;
    o.id = static_cast<std::int64_t>(i + 1);
    o.num_attributes = 2;
    o.attrs = attrs_per_row[i];
    o.avail = {1, 1};
    o.choice = choices[i];
    ds.rows.push_back(o);
  }
  return ds;
}

// ---- utilities and probabilities ------------------------------------------------

TEST(StructuralUtility, ThetaZeroGivesBetaMinusOne) {
  EXPECT_EQ(effective_beta(0.0), -1.0);
  const Dataset ds = tiny_dataset({{10, 5, 0, 0}}, {0});
  UtilitySpec spec = UtilitySpec::generic(ds.alt_set, {"time", "cost"});
  const BoundSpec bound(spec, ds);
  const auto v = structural_utility(StructuralParams::zeros(bound), bound, ds.rows[0]);
  EXPECT_EQ(v[0], -15.0);
  EXPECT_EQ(v[1], 0.0);
}

TEST(StructuralUtility, MatchesIndependentRecomputation) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = random_instance(seed);
    const BoundSpec bound(inst.spec, inst.ds);
    for (const auto& o : inst.ds.rows) {
      const auto v = structural_utility(inst.params, bound, o);
      const auto w = utility_oracle(inst.spec, inst.ds, inst.params, o);
      for (std::size_t k = 0; k < v.size(); ++k) EXPECT_NEAR(v[k], w[k], 1e-12);
    }
  }
}

TEST(StructuralUtility, GaRowCostContributesNothingToCoveredAlternatives) {
  testing::TempDir dir("mnl");
  write_swissmetro_like(dir / "sm.dat", 200, 5);
  const Dataset ds = load_dataset(dir / "sm.dat", Layout::kSwissmetro);
  const BoundSpec spec(UtilitySpec::swissmetro(), ds);
  const auto ga = *ds.socio_index("GA");
  for (const auto& o : ds.rows) {
    if (o.socio[ga] == 0.0) continue;
    for (double theta_cost : {-3.0, 0.0, 2.0}) {
      StructuralParams p = StructuralParams::zeros(spec);
      p.theta[1] = theta_cost;
      const auto v = structural_utility(p, spec, o);
      EXPECT_EQ(v[0], -o.attr(0, 0));
      EXPECT_EQ(v[1], -o.attr(1, 0));
    }
  }
}

TEST(ChoiceProbabilities, SymmetryAndMasking) {
  const std::vector<double> zeros{0, 0, 0};
  const auto p = choice_probabilities(zeros, std::vector<std::uint8_t>{1, 1, 1});
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const auto q = choice_probabilities(zeros, std::vector<std::uint8_t>{1, 1, 0});
  EXPECT_EQ(q[0], 0.5);
  EXPECT_EQ(q[1], 0.5);
  EXPECT_EQ(q[2], 0.0);
  EXPECT_THROW(choice_probabilities(zeros, std::vector<std::uint8_t>{0, 0, 0}), std::domain_error);
}

TEST(ChoiceProbabilities, LargeUtilitiesMatchHighPrecisionOracle) {
  const std::vector<double> v{1000.0, 0.0};
  const std::vector<std::uint8_t> avail{1, 1};
  const auto p = choice_probabilities(v, avail);
  const auto oracle = softmax_oracle(v, avail);
  EXPECT_EQ(p[0], static_cast<double>(oracle[0]));
  EXPECT_EQ(p[1], static_cast<double>(oracle[1]));
  const auto lp = log_choice_probabilities(v, avail);
  EXPECT_EQ(lp[1], -1000.0);
  EXPECT_LE(lp[0], 0.0);
}

TEST(ChoiceProbabilities, LogProbabilityNearOneIsResolved) {
  const std::vector<double> v{40.0, 0.0, -3.0};
  const std::vector<std::uint8_t> avail{1, 1, 1};
  const auto lp = log_choice_probabilities(v, avail);
  const auto oracle = softmax_oracle(v, avail);
  const double exact = static_cast<double>(boost::multiprecision::log(oracle[0]));
  ASSERT_LT(exact, 0.0);
  EXPECT_NEAR(lp[0] / exact, 1.0, 1e-12);
}

TEST(ChoiceProbabilities, RandomVectorsMatchOracleAndSumToOne) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + trial % 5;
    std::vector<double> v(k);
    std::vector<std::uint8_t> avail(k);
    for (std::size_t j = 0; j < k; ++j) {
      v[j] = u(gen);
      avail[j] = u(gen) > -15.0;
    }
    avail[trial % k] = 1;
    const auto p = choice_probabilities(v, avail);
    const auto oracle = softmax_oracle(v, avail);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      sum += p[j];
      if (!avail[j]) {
        EXPECT_EQ(p[j], 0.0);
      }
      EXPECT_NEAR(p[j], static_cast<double>(oracle[j]), 1e-15 + 1e-13 * p[j]);
      EXPECT_GE(p[j], 0.0);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(ChoiceProbabilities, TranslationInvariant) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v{u(gen), u(gen), u(gen), u(gen)};
    const std::vector<std::uint8_t> avail{1, 0, 1, 1};
    const double shift = 100.0 * u(gen);
    auto w = v;
    for (auto& x : w) x += shift;
    const auto p = choice_probabilities(v, avail);
    const auto q = choice_probabilities(w, avail);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(p[j], q[j], 1e-12);
  }
}

TEST(Monotonicity, RaisingCostLowersOwnAndRaisesOthers) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto inst = random_instance(seed);
    const BoundSpec bound(inst.spec, inst.ds);
    for (const auto& o : inst.ds.rows) {
      const auto p0 = choice_probabilities(structural_utility(inst.params, bound, o), o.avail);
      for (std::size_t k = 0; k < o.avail.size(); ++k) {
        if (!o.avail[k] || !bound.enters_utility(o, k, 1) || o.num_available() < 2) continue;
        Observation up = o;
        up.attr(k, 1) += 0.5;
        const auto lp0 = log_choice_probabilities(structural_utility(inst.params, bound, o), o.avail);
        const auto lp1 = log_choice_probabilities(structural_utility(inst.params, bound, up), up.avail);
        EXPECT_LT(lp1[k], lp0[k]);
        const auto p1 = choice_probabilities(structural_utility(inst.params, bound, up), up.avail);
        for (std::size_t j = 0; j < o.avail.size(); ++j)
          if (j != k) {
            EXPECT_GE(p1[j], p0[j]);
          }
      }
    }
  }
}

// ---- likelihood and gradient ----------------------------------------------------

TEST(LogLikelihood, EqualUtilitiesGiveLogHalf) {
  const Dataset ds = tiny_dataset({{1, 1, 1, 1}}, {0});
  const BoundSpec bound(UtilitySpec::generic(ds.alt_set, {"time", "cost"}), ds);
  StructuralParams p = StructuralParams::zeros(bound);
  EXPECT_NEAR(log_likelihood(p, bound, ds), std::log(0.5), 1e-15);
}

TEST(LogLikelihood, MatchesPerRowHighPrecisionSum) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(seed, 40);
    const BoundSpec bound(inst.spec, inst.ds);
    big total = 0;
    for (const auto& o : inst.ds.rows) {
      const auto v = utility_oracle(inst.spec, inst.ds, inst.params, o);
      total += boost::multiprecision::log(softmax_oracle(v, o.avail)[o.choice]);
    }
    EXPECT_NEAR(log_likelihood(inst.params, bound, inst.ds), static_cast<double>(total), 1e-10);
  }
}

TEST(Gradient, MatchesCentralDifferencesOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = random_instance(seed, 5 + seed);
    const BoundSpec bound(inst.spec, inst.ds);
    const auto analytic = grad_log_likelihood(inst.params, bound, inst.ds).flat();
    const auto fd = central_difference(
        [&](const std::vector<double>& x) {
          return log_likelihood(StructuralParams::from_flat(bound, x), bound, inst.ds);
        },
        inst.params.flat());
    EXPECT_LT(max_relative_error(analytic, fd), 1e-6) << "seed " << seed;
  }
}

TEST(Gradient, SoftTargetGradientMatchesCentralDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(seed, 12);
    const BoundSpec bound(inst.spec, inst.ds);
    std::vector<std::vector<double>> targets;
    for (const auto& o : inst.ds.rows) {
      std::vector<double> t(o.avail.size(), 0.0);
      double mass = 0.0;
      for (std::size_t k = 0; k < t.size(); ++k)
        if (o.avail[k]) mass += (t[k] = 1.0 + static_cast<double>((k * 7 + seed) % 3));
      for (auto& x : t) x /= mass;
      targets.push_back(t);
    }
    std::vector<double> analytic(bound.num_params());
    soft_log_likelihood(inst.params, bound, inst.ds, targets, analytic);
    const auto fd = central_difference(
        [&](const std::vector<double>& x) {
          return soft_log_likelihood(StructuralParams::from_flat(bound, x), bound, inst.ds,
                                     targets);
        },
        inst.params.flat());
    EXPECT_LT(max_relative_error(analytic, fd), 1e-6) << "seed " << seed;
  }
}

TEST(Gradient, ThetaComponentIsBetaGradientTimesBeta) {
  // dLL/dtheta = dLL/dbeta * beta; dLL/dbeta taken by differencing in beta.
  const auto inst = random_instance(5, 30);
  const BoundSpec bound(inst.spec, inst.ds);
  const auto g = grad_log_likelihood(inst.params, bound, inst.ds);
  for (std::size_t c = 0; c < inst.params.theta.size(); ++c) {
    const double beta = effective_beta(inst.params.theta[c]);
    auto at_beta = [&](double b) {
      StructuralParams p = inst.params;
      p.theta[c] = std::log(-b);
      return log_likelihood(p, bound, inst.ds);
    };
    const double h = 1e-6 * std::abs(beta);
    const double dbeta = (at_beta(beta + h) - at_beta(beta - h)) / (2 * h);
    EXPECT_NEAR(g.theta[c], dbeta * beta, 1e-6 * std::max(1.0, std::abs(g.theta[c])));
    // beta < 0, so the theta gradient has the opposite sign.
    if (dbeta != 0.0) {
      EXPECT_EQ(g.theta[c] > 0.0, dbeta < 0.0);
    }
  }
}

// ---- spec binding -------------------------------------------------------------

TEST(BoundSpec, RejectsUnknownNamesAndOverlaps) {
  const Dataset ds = tiny_dataset({{1, 1, 1, 1}}, {0});
  UtilitySpec s = UtilitySpec::generic(ds.alt_set, {"time"});
  s.coefficients.push_back({"oops", "distance", {"a"}});
  EXPECT_THROW(BoundSpec(s, ds), SchemaError);

  UtilitySpec overlap = UtilitySpec::generic(ds.alt_set, {"time"});
  overlap.coefficients.push_back({"time_a", "time", {"a"}});
  EXPECT_THROW(BoundSpec(overlap, ds), SchemaError);

  UtilitySpec no_ref = UtilitySpec::generic(ds.alt_set, {"time"});
  no_ref.asc_alts = {"a", "b"};
  EXPECT_THROW(BoundSpec(no_ref, ds), SchemaError);
}

TEST(BetaSign, NegativeForEveryFiniteTheta) {
  for (double t : {-700.0, -20.0, -1.0, 0.0, 1.0, 20.0, 300.0}) EXPECT_LT(effective_beta(t), 0.0);
}

// ---- fitting --------------------------------------------------------------------

TEST(FitStage1, ReachesGradientToleranceOnSyntheticData) {
  const auto data = generate(GeneratorConfig::standard(3000, 21));
  const auto s = split(data.dataset, SplitConfig{{0.8, 0.2, 0.0}, 1});
  const BoundSpec spec(GeneratorConfig::standard(1, 1).spec, s.train);
  const auto fit = fit_stage1(s.train, s.val, spec);
  EXPECT_TRUE(fit.report.converged);
  EXPECT_LT(fit.report.grad_inf_norm, 1e-6);
  EXPECT_TRUE(fit.report.non_identified.empty());
  EXPECT_NEAR(fit.report.train_ll, log_likelihood(fit.params, spec, s.train), 1e-9);
  EXPECT_NEAR(fit.report.val_ll, log_likelihood(fit.params, spec, s.val), 1e-9);
}

TEST(FitStage1, DeterministicForSeedAndConfig) {
  const auto data = generate(GeneratorConfig::standard(800, 2));
  const BoundSpec spec(GeneratorConfig::standard(1, 1).spec, data.dataset);
  OptimConfig cfg = OptimConfig::stage1();
  cfg.init_jitter = 0.3;
  cfg.seed = 9;
  const auto a = fit_stage1(data.dataset, data.dataset.empty_like(), spec, cfg);
  const auto b = fit_stage1(data.dataset, data.dataset.empty_like(), spec, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.report.iterations, b.report.iterations);
}

TEST(FitStage1, DifferentStartsReachTheSameLikelihood) {
  const auto data = generate(GeneratorConfig::standard(2000, 8));
  const BoundSpec spec(GeneratorConfig::standard(1, 1).spec, data.dataset);
  OptimConfig c1 = OptimConfig::stage1();
  c1.init_jitter = 0.5;
  c1.seed = 1;
  OptimConfig c2 = c1;
  c2.seed = 2;
  const auto a = fit_stage1(data.dataset, data.dataset.empty_like(), spec, c1);
  const auto b = fit_stage1(data.dataset, data.dataset.empty_like(), spec, c2);
  EXPECT_NE(a.report.iterations, 0);
  EXPECT_NEAR(a.report.train_ll, b.report.train_ll, 1e-6);
}

TEST(FitStage1, ConstantAttributeLeftAtInitAndFlagged) {
  auto cfg = GeneratorConfig::standard(600, 4);
  cfg.attributes.push_back({"comfort", 2.0, 2.0});
  auto data = generate(cfg).dataset;
  UtilitySpec spec = UtilitySpec::generic(data.alt_set, {"time", "cost", "comfort"});
  const BoundSpec bound(spec, data);
  const auto g = grad_log_likelihood(StructuralParams::zeros(bound), bound, data);
  EXPECT_EQ(g.theta[2], 0.0);
  const auto fit = fit_stage1(data, data.empty_like(), bound);
  EXPECT_EQ(fit.params.theta[2], 0.0);
  EXPECT_THAT(fit.report.non_identified, ::testing::Contains("theta:comfort"));
}

TEST(FitStage1, WrongSignedTruthStaysNegative) {
  // Choices that reward higher cost push beta toward zero, never past it.
  auto cfg = GeneratorConfig::standard(1000, 6, -2.0, -1.0);
  auto data = generate(cfg).dataset;
  for (auto& r : data.rows) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (r.attr(k, 1) > r.attr(best, 1)) best = k;
    r.choice = best;
  }
  const BoundSpec spec(cfg.spec, data);
  OptimConfig oc = OptimConfig::stage1();
  oc.max_iters = 2000;
  const auto fit = fit_stage1(data, data.empty_like(), spec, oc);
  EXPECT_LT(fit.params.beta(1), 0.0);
  EXPECT_GT(fit.params.beta(1), -0.05);
  EXPECT_TRUE(std::isfinite(fit.report.train_ll));
}

TEST(FitStage1, ZeroIterationsReturnsInitialPoint) {
  const auto data = generate(GeneratorConfig::standard(100, 2));
  const BoundSpec spec(GeneratorConfig::standard(1, 1).spec, data.dataset);
  OptimConfig cfg = OptimConfig::stage1();
  cfg.max_iters = 0;
  const auto fit = fit_stage1(data.dataset, data.dataset.empty_like(), spec, cfg);
  EXPECT_EQ(fit.params, StructuralParams::zeros(spec));
}

// ---- value of time ------------------------------------------------------------------

TEST(VotAnalytic, EqualThetasGiveSixty) {
  const Dataset ds = tiny_dataset({{1, 1, 1, 1}}, {0});
  const BoundSpec bound(UtilitySpec::generic(ds.alt_set, {"time", "cost"}), ds);
  StructuralParams p = StructuralParams::zeros(bound);
  p.theta = {0.37, 0.37};
  EXPECT_EQ(vot_analytic(p, bound, VotContext::generic()), 60.0);
  p.theta = {std::log(2.0), 0.0};
  EXPECT_NEAR(vot_analytic(p, bound, VotContext::generic()), 120.0, 1e-12);
}

TEST(VotAnalytic, ModeContextsAndMissingCoefficient) {
  testing::TempDir dir("mnl");
  write_lpmc_like(dir / "lpmc.csv", 30, 1);
  const Dataset ds = load_dataset(dir / "lpmc.csv", Layout::kLpmc);
  const BoundSpec bound(UtilitySpec::lpmc(), ds);
  StructuralParams p = StructuralParams::zeros(bound);
  // time_active, time_pt, time_drive, cost_pt, cost_drive
  p.theta = {0.0, std::log(0.03), std::log(0.06), 0.0, std::log(0.2)};
  EXPECT_NEAR(vot_analytic(p, bound, VotContext::mode("pt")), 1.8, 1e-12);
  EXPECT_NEAR(vot_analytic(p, bound, VotContext::mode("drive")), 18.0, 1e-12);
  EXPECT_THROW(vot_analytic(p, bound, VotContext::mode("walk")), std::invalid_argument);
  EXPECT_THROW(vot_analytic(p, bound, VotContext::generic()), std::invalid_argument);
}

}  // namespace
}  // namespace bva
