// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bva/data.h"

namespace bva {

/// Floor applied to q before taking its log in the correction term.
inline constexpr double kSafeLogFloor = 1e-6;
/// Largest |sum - 1| accepted (and renormalised away) by the loader.
inline constexpr double kProbSumTolerance = 1e-6;

/// Per-observation probability vectors from an external foundation model.
/// Mass on unavailable alternatives is kept as produced.
struct FMProbabilities {
  std::string source_tag;
  std::string split;
  std::vector<std::string> alternatives;
  std::map<std::int64_t, std::vector<double>> rows;

  std::size_t size() const { return rows.size(); }
  /// Throws std::out_of_range naming the id when absent.
  const std::vector<double>& at(std::int64_t id) const;
  bool operator==(const FMProbabilities&) const = default;
};

/// Reads a probability file without alignment: checks the
/// `# source=<tag> split=<name>` line, the `id,p_<alt>...` header against
/// `alts`, and every vector (entries in [0,1], sum within 1e-6 of 1).
FMProbabilities load_fm_table(const std::filesystem::path& path,
                              const AlternativeSet& alts);

/// load_fm_table plus exact id alignment with `expected`. When
/// `expected_split` is given the file's split tag must match it.
FMProbabilities load_fm_probs(const std::filesystem::path& path,
                              const Dataset& expected,
                              const std::optional<std::string>& expected_split = {});

/// Throws AlignmentError listing missing and extra ids.
void check_alignment(const FMProbabilities& fm, const Dataset& ds);

/// Rows of `fm` for exactly the ids of `ds` (extras dropped, missing ids
/// raise AlignmentError).
FMProbabilities restrict_to(const FMProbabilities& fm, const Dataset& ds,
                            const std::string& split);

void save_fm_probs(const FMProbabilities& fm, const std::filesystem::path& path);

/// Validates one vector and rescales it when its sum is off by more than
/// floating-point noise but within kProbSumTolerance. Idempotent. Throws
/// ValidationError otherwise.
void normalize_probability_vector(std::vector<double>& q, std::int64_t id = 0);

/// log(max(q_k, 1e-6)) per entry.
std::vector<double> safe_log(std::span<const double> q);

}  // namespace bva
