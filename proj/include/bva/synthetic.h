// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bva/data.h"
#include "bva/fm_probs.h"
#include "bva/mnl.h"

namespace bva {

struct UniformRange {
  std::string name;
  double min = 0.0;
  double max = 1.0;
};

struct GeneratorConfig {
  std::vector<std::string> alternatives{"a", "b", "c"};
  std::vector<UniformRange> attributes{{"time", 0.0, 3.0}, {"cost", 0.0, 3.0}};
  std::vector<UniformRange> socio;
  UtilitySpec spec;
  StructuralParams true_params;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  double availability_rate = 1.0;
  std::vector<std::string> always_available;
  bool noise_free = false;  // choice = argmax of the true utility
  double fm_informativeness = 0.0;

  /// Three alternatives, generic time/cost coefficients with the given
  /// betas, ASCs (0.3, -0.2) with the last alternative as reference.
  static GeneratorConfig standard(std::size_t n, std::uint64_t seed,
                                  double beta_time = -2.0, double beta_cost = -1.0);
  void validate() const;
};

struct SyntheticData {
  Dataset dataset;
  std::vector<std::vector<double>> true_probs;
};

/// Row i is drawn from its own stream derived from (seed, i).
SyntheticData generate(const GeneratorConfig& cfg);

struct FmSynthOptions {
  double smoothing = 0.05;
  double label_noise = 0.0;  // chance the one-hot lands on a random other alternative
  std::string source_tag = "synthetic-oracle";
  std::string split = "all";
};

/// q = (1 - lambda) * uniform + lambda * ((1 - s) * onehot(choice) + s / K).
/// lambda = 0 is uninformative, lambda = 1 nearly an oracle.
FMProbabilities make_fm_probs(const Dataset& ds, double informativeness,
                              std::uint64_t seed, const FmSynthOptions& opts = {});

/// Ground truth behind the raw-layout stand-in files below.
struct RawLayoutTruth {
  UtilitySpec spec;
  StructuralParams params;
  std::size_t rows_written = 0;
  std::size_t invalid_choice_rows = 0;
};

/// Writes a tab-separated file with the published Swissmetro column names
/// (CHOICE 0 = unknown, 1 train, 2 Swissmetro, 3 car). Choices follow an
/// MNL with generic time/cost and GA holders facing no train/SM cost.
RawLayoutTruth write_swissmetro_like(const std::filesystem::path& path, std::size_t n,
                                     std::uint64_t seed, std::size_t invalid_choice_rows = 0);

/// Writes a comma-separated file with the published LPMC column names
/// (durations in hours, costs in GBP, travel_mode as walk/cycle/pt/drive).
RawLayoutTruth write_lpmc_like(const std::filesystem::path& path, std::size_t n,
                               std::uint64_t seed);

}  // namespace bva
