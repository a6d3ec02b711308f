// SPDX-License-Identifier: Apache-2.0
#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <cmath>

#include "bva/synthetic.h"

namespace bva {
namespace {

// exp-sum over available alternatives with the standard truth written out.
std::vector<double> standard_oracle(const Observation& o, double bt, double bc) {
  const double asc[3] = {0.3, -0.2, 0.0};
  std::vector<double> e(3, 0.0);
  double s = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    if (!o.available(k)) continue;
    e[k] = std::exp(asc[k] + bt * o.attr(k, 0) + bc * o.attr(k, 1));
    s += e[k];
  }
  for (auto& v : e) v /= s;
  return e;
}

TEST(Generate, SameSeedSameData) {
  const auto cfg = GeneratorConfig::standard(200, 7);
  const auto a = generate(cfg);
  const auto b = generate(cfg);
  EXPECT_EQ(a.dataset.rows, b.dataset.rows);
  EXPECT_EQ(a.true_probs, b.true_probs);
  EXPECT_NE(generate(GeneratorConfig::standard(200, 8)).dataset.rows, a.dataset.rows);
}

TEST(Generate, RowsDoNotDependOnSampleSize) {
  const auto small = generate(GeneratorConfig::standard(50, 3)).dataset;
  const auto large = generate(GeneratorConfig::standard(120, 3)).dataset;
  for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small.rows[i], large.rows[i]);
}

TEST(Generate, TruthMatchesHandWrittenUtility) {
  auto cfg = GeneratorConfig::standard(300, 4, -1.5, -0.5);
  cfg.availability_rate = 0.7;
  const auto syn = generate(cfg);
  for (std::size_t i = 0; i < syn.dataset.size(); ++i) {
    const auto& o = syn.dataset.rows[i];
    const auto p = standard_oracle(o, -1.5, -0.5);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(syn.true_probs[i][k], p[k], 1e-14);
    EXPECT_TRUE(o.available(o.choice));
    EXPECT_GE(o.num_available(), 1u);
    EXPECT_EQ(o.id, static_cast<std::int64_t>(i + 1));
  }
  EXPECT_EQ(syn.dataset.size(), 300u);
}

TEST(Generate, ChoiceFrequenciesFollowTheTruth) {
  const auto syn = generate(GeneratorConfig::standard(20000, 5));
  std::vector<double> expected(3, 0.0), observed(3, 0.0);
  for (std::size_t i = 0; i < syn.dataset.size(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) expected[k] += syn.true_probs[i][k];
    observed[syn.dataset.rows[i].choice] += 1.0;
  }
  for (std::size_t k = 0; k < 3; ++k) {
    // Poisson-binomial variance is at most the expected count.
    EXPECT_LT(std::abs(observed[k] - expected[k]), 4.0 * std::sqrt(expected[k])) << k;
  }
}

TEST(Generate, AvailabilityRateAndForcedAlternatives) {
  auto cfg = GeneratorConfig::standard(5000, 6);
  cfg.availability_rate = 0.5;
  cfg.always_available = {"c"};
  const auto ds = generate(cfg).dataset;
  double open_a = 0.0;
  for (const auto& o : ds.rows) {
    EXPECT_TRUE(o.available(2));
    open_a += o.available(0);
  }
  EXPECT_NEAR(open_a / 5000.0, 0.5, 0.03);
}

TEST(Generate, NoiseFreeChoosesTheArgmax) {
  auto cfg = GeneratorConfig::standard(200, 9);
  cfg.noise_free = true;
  const auto syn = generate(cfg);
  for (std::size_t i = 0; i < syn.dataset.size(); ++i) {
    const auto& p = syn.true_probs[i];
    EXPECT_EQ(syn.dataset.rows[i].choice,
              static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()));
  }
}

TEST(Generate, RejectsBadConfig) {
  auto cfg = GeneratorConfig::standard(10, 1);
  cfg.availability_rate = 0.0;
  EXPECT_THROW(generate(cfg), std::invalid_argument);
  cfg = GeneratorConfig::standard(10, 1);
  cfg.attributes[0] = {"time", 3.0, 1.0};
  EXPECT_THROW(generate(cfg), std::invalid_argument);
}

TEST(MakeFmProbs, FollowsTheMixtureFormula) {
  const auto ds = generate(GeneratorConfig::standard(100, 10)).dataset;
  for (double lambda : {0.0, 0.3, 1.0}) {
    FmSynthOptions o;
    o.smoothing = 0.1;
    const auto fm = make_fm_probs(ds, lambda, 1, o);
    for (const auto& r : ds.rows) {
      const auto& q = fm.at(r.id);
      for (std::size_t k = 0; k < 3; ++k) {
        const double hot = k == r.choice ? 1.0 : 0.0;
        EXPECT_NEAR(q[k], (1 - lambda) / 3 + lambda * (0.9 * hot + 0.1 / 3), 1e-15);
      }
    }
  }
}

TEST(MakeFmProbs, LabelNoiseMovesTheRequestedShare) {
  const auto ds = generate(GeneratorConfig::standard(4000, 11)).dataset;
  FmSynthOptions o;
  o.label_noise = 0.25;
  const auto fm = make_fm_probs(ds, 1.0, 3, o);
  double wrong = 0.0;
  for (const auto& r : ds.rows) {
    const auto& q = fm.at(r.id);
    wrong += static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin()) !=
             r.choice;
  }
  EXPECT_NEAR(wrong / 4000.0, 0.25, 0.025);
  EXPECT_EQ(make_fm_probs(ds, 1.0, 3, o), fm);
  EXPECT_THROW(make_fm_probs(ds, 1.5, 3), std::invalid_argument);
}

}  // namespace
}  // namespace bva
