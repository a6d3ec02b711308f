// SPDX-License-Identifier: Apache-2.0
#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "bva/audit.h"
#include "bva/errors.h"
#include "bva/synthetic.h"
#include "test_util.h"

namespace bva {
namespace {

using ::testing::ElementsAre;
using testing::random_instance;

struct Fitted {
  Dataset ds;
  BoundSpec spec;
  StructuralParams params;
};

// The generator's own parameters: no fitting needed to audit an MNL.
Fitted truth_model(std::size_t n, std::uint64_t seed, double availability = 0.8) {
  auto cfg = GeneratorConfig::standard(n, seed);
  cfg.availability_rate = availability;
  auto ds = generate(cfg).dataset;
  BoundSpec spec(cfg.spec, ds);
  return {std::move(ds), std::move(spec), cfg.true_params};
}

// p0 linear in the first alternative's time and cost; rest split evenly.
FunctionPredictor linear_predictor(double a, double b) {
  return FunctionPredictor("linear", [a, b](const Observation& o) {
    const double p0 = 0.5 - a * o.attr(0, 0) - b * o.attr(0, 1);
    return std::vector<double>{p0, (1 - p0) / 2, (1 - p0) / 2};
  });
}

TEST(Perturb, TouchesOneCell) {
  const auto f = truth_model(5, 1);
  const auto& o = f.ds.rows[2];
  const auto p = perturb(o, f.ds.alt_set, 1, "cost", 0.5);
  for (std::size_t i = 0; i < o.attrs.size(); ++i) {
    EXPECT_EQ(p.attrs[i], i == 1 * 2 + 1 ? o.attrs[i] + 0.5 : o.attrs[i]);
  }
  EXPECT_THROW(perturb(o, f.ds.alt_set, 0, "comfort", 1.0), std::invalid_argument);
  EXPECT_THROW(perturb(o, 3, 0, 1.0), std::out_of_range);
}

TEST(ObservedRanges, IgnoresUnavailableCells) {
  Dataset ds;
  ds.alt_set = {{"a", "b"}, {"time"}};
  auto row = [](std::int64_t id, double ta, double tb, std::uint8_t av_b) {
    return Observation{id, 1, {ta, tb}, {}, {1, av_b}, 0};
  };
  ds.rows = {row(1, 1.0, 50.0, 0), row(2, 4.0, 2.0, 1), row(3, 2.0, 3.0, 1)};
  EXPECT_THAT(observed_ranges(ds), ElementsAre(3.0, 1.0));
  ds.rows = {row(1, 1.0, 50.0, 0)};
  EXPECT_THAT(observed_ranges(ds), ElementsAre(0.0, 0.0));
}

TEST(Monotonicity, MnlIsPerfectOnEveryAttribute) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto f = truth_model(400, seed);
    const MnlPredictor mnl(f.spec, f.params);
    for (const char* attr : {"time", "cost"}) {
      const auto m = monotonicity_rate(mnl, f.ds, attr);
      ASSERT_TRUE(m.rate.has_value());
      EXPECT_EQ(*m.rate, 1.0) << attr;
      EXPECT_EQ(m.cells_passed, m.cells_evaluated);
      EXPECT_EQ(m.cells_excluded_passed, m.cells_excluded);
      EXPECT_EQ(m.observations_evaluated + m.observations_skipped, f.ds.size());
    }
  }
}

TEST(Monotonicity, RateCountsFailingObservations) {
  const auto f = truth_model(300, 4, 1.0);
  const MnlPredictor mnl(f.spec, f.params);
  // Well-behaved on even ids, flat (insensitive) on odd ids.
  const FunctionPredictor mixed("mixed", [&](const Observation& o) {
    if (o.id % 2 == 0) return mnl.probabilities(o);
    return std::vector<double>(3, 1.0 / 3.0);
  });
  const auto m = monotonicity_rate(mixed, f.ds, "cost");
  std::size_t even = 0;
  for (const auto& o : f.ds.rows) even += o.id % 2 == 0;
  ASSERT_TRUE(m.rate.has_value());
  EXPECT_DOUBLE_EQ(*m.rate, static_cast<double>(even) / static_cast<double>(f.ds.size()));
  for (const auto& flag : m.flags) EXPECT_EQ(flag.passed, flag.id % 2 == 0) << flag.id;
}

TEST(Monotonicity, WrongSignIsCaught) {
  const auto f = truth_model(200, 5, 1.0);
  const auto m = monotonicity_rate(linear_predictor(0.05, -0.05), f.ds, "cost");
  ASSERT_TRUE(m.rate.has_value());
  EXPECT_EQ(*m.rate, 0.0);
}

TEST(Monotonicity, ZeroedCostCellsAreExcludedNotFailed) {
  // random_instance zeroes cost of alt1 for s = 1 rows.
  const auto r = random_instance(6, 200);
  const BoundSpec spec(r.spec, r.ds);
  auto params = r.params;
  const MnlPredictor mnl(spec, params);
  const auto m = monotonicity_rate(mnl, r.ds, "cost");
  std::size_t expected_excluded = 0;
  for (const auto& o : r.ds.rows) {
    if (o.num_available() == 1) {
      expected_excluded += 1;
    } else if (o.socio[0] == 1.0 && o.available(1)) {
      expected_excluded += 1;
    }
  }
  EXPECT_EQ(m.cells_excluded, expected_excluded);
  EXPECT_EQ(m.cells_excluded_passed, m.cells_excluded);
  EXPECT_EQ(*m.rate, 1.0);
}

TEST(Monotonicity, FixedTableIsACapabilityError) {
  const auto f = truth_model(20, 7);
  const TablePredictor table(make_fm_probs(f.ds, 0.5, 1), "tfm");
  EXPECT_THROW(monotonicity_rate(table, f.ds, "cost"), CapabilityError);
  EXPECT_THROW(fd_vot(table, f.ds.alt_set, f.ds.rows[0], 0, 0.1, 0.1), CapabilityError);
  const auto rep = full_audit(table, f.ds, AuditConfig{});
  EXPECT_TRUE(rep.perturbation_omitted);
  EXPECT_TRUE(rep.monotonicity.empty());
  EXPECT_TRUE(rep.accuracy.has_value());
  EXPECT_FALSE(rep.vot[0].median.has_value());
}

TEST(FdVot, LinearPredictorGivesTheSlopeRatio) {
  const auto f = truth_model(30, 8, 1.0);
  const auto lin = linear_predictor(0.05, 0.02);
  for (const auto& o : f.ds.rows) {
    const auto v = fd_vot(lin, f.ds.alt_set, o, 0, 0.03, 0.03);
    ASSERT_TRUE(v.has_value());
    EXPECT_NEAR(*v, 0.05 / 0.02 * 60.0, 1e-6);
  }
}

TEST(FdVot, MnlApproachesTheCoefficientRatio) {
  const auto f = truth_model(30, 9, 1.0);
  const MnlPredictor mnl(f.spec, f.params);
  const double analytic = *mnl.analytic_vot(VotContext::generic());
  EXPECT_NEAR(analytic, 120.0, 1e-12);
  for (const auto& o : f.ds.rows) {
    for (std::size_t k = 0; k < 3; ++k) {
      const auto v = fd_vot(mnl, f.ds.alt_set, o, k, 1e-4, 1e-4);
      ASSERT_TRUE(v.has_value());
      EXPECT_NEAR(*v / analytic, 1.0, 1e-3);
    }
  }
}

TEST(FdVot, MnlAgreesAtOnePercentOfRangeOnEveryCell) {
  for (std::uint64_t seed = 20; seed < 23; ++seed) {
    auto cfg = GeneratorConfig::standard(500, seed, -3.0, -0.5);
    cfg.attributes = {{"time", 0.0, 5.0}, {"cost", 0.0, 8.0}};
    const auto syn = generate(cfg);
    const MnlPredictor mnl(BoundSpec(cfg.spec, syn.dataset), cfg.true_params);
    const auto ranges = observed_ranges(syn.dataset);
    for (const auto& o : syn.dataset.rows)
      for (std::size_t k = 0; k < 3; ++k) {
        const auto v = fd_vot(mnl, syn.dataset.alt_set, o, k, 0.01 * ranges[2 * k],
                              0.01 * ranges[2 * k + 1]);
        ASSERT_TRUE(v.has_value());
        EXPECT_NEAR(*v / 360.0, 1.0, 0.01);
      }
  }
}

TEST(FdVot, UndefinedWithoutCostResponse) {
  const auto f = truth_model(5, 10, 1.0);
  const auto lin = linear_predictor(0.05, 0.0);
  EXPECT_FALSE(fd_vot(lin, f.ds.alt_set, f.ds.rows[0], 0, 0.01, 0.01).has_value());
  EXPECT_THROW(fd_vot(lin, f.ds.alt_set, f.ds.rows[0], 0, 0.0, 0.01), std::invalid_argument);
}

TEST(Leak, MatchesMeanOverUnavailableCells) {
  const auto f = truth_model(300, 11, 0.6);
  // Puts 0.1 on the last alternative whatever its availability.
  const FunctionPredictor leaky("leaky", [](const Observation&) {
    return std::vector<double>{0.45, 0.45, 0.1};
  });
  double sum = 0.0;
  std::size_t cells = 0;
  for (const auto& o : f.ds.rows)
    for (std::size_t k = 0; k < 3; ++k)
      if (!o.available(k)) {
        sum += k == 2 ? 0.1 : 0.45;
        ++cells;
      }
  ASSERT_GT(cells, 0u);
  EXPECT_NEAR(*availability_leak(leaky, f.ds), sum / static_cast<double>(cells), 1e-15);
  const MnlPredictor mnl(f.spec, f.params);
  EXPECT_EQ(*availability_leak(mnl, f.ds), 0.0);
}

TEST(Leak, UndefinedWhenEverythingIsAvailable) {
  const auto f = truth_model(50, 12, 1.0);
  EXPECT_FALSE(availability_leak(MnlPredictor(f.spec, f.params), f.ds).has_value());
}

TEST(Accuracy, TiesGoToTheLowestAvailableIndex) {
  Dataset ds;
  ds.alt_set = {{"a", "b", "c"}, {"time"}};
  ds.rows = {Observation{1, 1, {0, 0, 0}, {}, {1, 1, 1}, 0},
             Observation{2, 1, {0, 0, 0}, {}, {1, 1, 1}, 1},
             Observation{3, 1, {0, 0, 0}, {}, {0, 1, 1}, 1},
             Observation{4, 1, {0, 0, 0}, {}, {0, 1, 1}, 2}};
  const FunctionPredictor flat("flat", [](const Observation& o) {
    std::vector<double> p(3, 0.0);
    for (std::size_t k = 0; k < 3; ++k) p[k] = o.available(k) ? 1.0 / o.num_available() : 0.0;
    return p;
  });
  EXPECT_DOUBLE_EQ(*accuracy(flat, ds), 0.5);
  EXPECT_FALSE(accuracy(flat, ds.empty_like()).has_value());
}

TEST(Accuracy, InvalidVectorsAreRejected) {
  const auto f = truth_model(5, 13);
  const FunctionPredictor bad("bad", [](const Observation&) {
    return std::vector<double>{0.5, 0.5, 0.5};
  });
  EXPECT_THROW(accuracy(bad, f.ds), ValidationError);
}

TEST(FullAudit, EmptyDatasetReportsNothingButAnalyticVot) {
  const auto f = truth_model(10, 14);
  const auto rep = full_audit(MnlPredictor(f.spec, f.params), f.ds.empty_like(), {});
  EXPECT_FALSE(rep.accuracy.has_value());
  EXPECT_FALSE(rep.availability_leak.has_value());
  EXPECT_TRUE(rep.monotonicity.empty());
  ASSERT_EQ(rep.vot.size(), 1u);
  EXPECT_NEAR(*rep.vot[0].analytic, 120.0, 1e-12);
  EXPECT_TRUE(rep.hard_validity_ok());
}

TEST(FullAudit, MnlPassesHardValidity) {
  const auto f = truth_model(500, 15);
  AuditConfig cfg;
  cfg.dataset_tag = "synthetic";
  const auto rep = full_audit(MnlPredictor(f.spec, f.params), f.ds, cfg);
  EXPECT_TRUE(rep.constructive);
  EXPECT_TRUE(rep.hard_validity_ok()) << ::testing::PrintToString(rep.hard_validity_failures());
  ASSERT_EQ(rep.monotonicity.size(), 2u);
  EXPECT_EQ(rep.monotonicity[0].attribute, "cost");
  EXPECT_EQ(rep.vot[0].fraction_negative, 0.0);
  EXPECT_NEAR(*rep.vot[0].median / 120.0, 1.0, 0.05);
}

TEST(FullAudit, HardValidityNamesEachFailure) {
  AuditReport rep;
  rep.constructive = true;
  rep.monotonicity.push_back({"cost", 0.99, 0.99, 100, 100, 0, 0, 0});
  rep.availability_leak = 1e-6;
  rep.vot.push_back({"generic", -3.0, {}, 0, 0, 0, 0});
  EXPECT_THAT(rep.hard_validity_failures(),
              ElementsAre("monotonicity(cost) < 1", "availability leak >= 1e-12",
                          "VOT(generic) <= 0"));
  rep.constructive = false;
  EXPECT_TRUE(rep.hard_validity_ok());
}

TEST(FullAudit, DefaultVotContexts) {
  EXPECT_THAT(default_vot_contexts({{"walk", "cycle", "pt", "drive"}, {"time", "cost"}}),
              ElementsAre(VotContextSpec{"pt", {"pt"}}, VotContextSpec{"dr", {"drive"}}));
  EXPECT_THAT(default_vot_contexts({{"a", "b"}, {"time", "cost"}}),
              ElementsAre(VotContextSpec{"generic", {}}));
}

TEST(FullAudit, MachineFormRoundTripsAndIsDeterministic) {
  const auto f = truth_model(300, 16);
  AuditConfig cfg;
  cfg.dataset_tag = "synthetic";
  const MnlPredictor mnl(f.spec, f.params);
  const auto rep = full_audit(mnl, f.ds, cfg);
  const auto text = render_machine(rep);
  EXPECT_EQ(parse_audit_report(text), rep);
  EXPECT_EQ(render_machine(full_audit(mnl, f.ds, cfg)), text);
  EXPECT_THROW(parse_audit_report("{\"kind\": 3"), ParseError);
}

}  // namespace
}  // namespace bva
