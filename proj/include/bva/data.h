// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bva {

/// Ordered alternative labels and per-alternative attribute labels.
/// Times are in minutes and costs in local currency throughout.
struct AlternativeSet {
  std::vector<std::string> names;
  std::vector<std::string> attribute_names;

  std::size_t size() const { return names.size(); }
  std::size_t num_attributes() const { return attribute_names.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::optional<std::size_t> attribute_index(std::string_view name) const;

  /// Throws SchemaError unless K >= 2 and both label lists are unique.
  void validate() const;

  bool operator==(const AlternativeSet&) const = default;
};

struct Observation {
  std::int64_t id = 0;
  std::size_t num_attributes = 0;
  std::vector<double> attrs;  // K x A, row-major by alternative
  std::vector<double> socio;
  std::vector<std::uint8_t> avail;
  std::size_t choice = 0;

  std::size_t num_alternatives() const { return avail.size(); }
  double attr(std::size_t alt, std::size_t a) const {
    return attrs[alt * num_attributes + a];
  }
  double& attr(std::size_t alt, std::size_t a) {
    return attrs[alt * num_attributes + a];
  }
  bool available(std::size_t alt) const { return avail[alt] != 0; }
  std::size_t num_available() const;

  bool operator==(const Observation&) const = default;
};

struct Dataset {
  AlternativeSet alt_set;
  std::vector<std::string> socio_names;
  std::vector<Observation> rows;
  std::string provenance;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  std::optional<std::size_t> socio_index(std::string_view name) const;

  /// Same schema (alternatives, attributes, sociodemographics).
  bool same_schema(const Dataset& other) const;
  /// Copy with the same schema and no rows.
  Dataset empty_like() const;
  std::vector<std::int64_t> ids() const;

  /// Throws ValidationError listing every row that breaks an Observation
  /// invariant, duplicates included.
  void validate() const;
};

enum class Layout { kSwissmetro, kLpmc, kGeneric };

Layout parse_layout(std::string_view name);
std::string_view layout_name(Layout layout);

struct LoadResult {
  Dataset dataset;
  std::size_t rows_read = 0;
  std::size_t dropped_invalid_choice = 0;
  std::size_t dropped_chosen_unavailable = 0;
};

struct LayoutConfig;

/// Loads a dataset file. Swissmetro and LPMC files are read through the
/// column-mapping config shipped in configs/; generic files need the
/// `<path>.schema` descriptor written by save_dataset.
Dataset load_dataset(const std::filesystem::path& path, Layout layout);
LoadResult load_dataset_detailed(const std::filesystem::path& path,
                                 Layout layout);
LoadResult load_dataset_detailed(const std::filesystem::path& path,
                                 const LayoutConfig& config);

/// Writes the generic layout plus its schema descriptor. Values use the
/// shortest round-trip representation so a reload is bit-identical.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
std::filesystem::path schema_path_for(const std::filesystem::path& data_path);

/// Zeroes train and Swissmetro cost for GA pass holders. Idempotent.
Dataset preprocess_swissmetro(const Dataset& ds);

struct SplitConfig {
  std::array<double, 3> ratios{0.70, 0.15, 0.15};
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument unless each ratio is in [0,1) or the
  /// degenerate (1,0,0) case, and they sum to 1 within 1e-9.
  void validate() const;
};

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// floor(N * ratio) for validation and test, remainder to train.
SplitSizes split_sizes(std::size_t n, const SplitConfig& cfg);

/// Seeded shuffle, then partition by split_sizes. Each part keeps the
/// source row order.
Splits split(const Dataset& ds, const SplitConfig& cfg);

/// Uniform draw of n rows without replacement; keeps source row order.
Dataset subsample(const Dataset& ds, std::size_t n, std::uint64_t seed);

}  // namespace bva
