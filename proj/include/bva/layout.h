// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bva/data.h"

namespace bva {

/// Linear combination of source columns: constant + sum(weight * column).
struct ColumnExpr {
  double constant = 0.0;
  std::vector<std::pair<double, std::string>> terms;

  static ColumnExpr parse(const std::string& text);
  std::string to_string() const;
};

/// Maps a delimited source file onto the internal observation model.
struct LayoutConfig {
  std::string name;
  char delimiter = ',';  // ' ' means any run of whitespace
  std::string id_column = "@row";  // "@row" = 1-based data row number
  std::vector<std::string> alternatives;
  std::vector<std::string> attributes;
  std::string choice_column;
  std::vector<std::vector<std::string>> choice_codes;  // accepted tokens per alternative
  std::vector<ColumnExpr> availability;                // per alternative
  std::vector<ColumnExpr> attrs;                       // K x A
  std::vector<std::string> socio;
  bool drop_invalid_choice = false;
  bool drop_chosen_unavailable = false;
  double vot_ceiling = 0.0;  // plausibility ceiling for audits, 0 = unset

  /// Column names referenced anywhere in the mapping.
  std::vector<std::string> referenced_columns() const;
};

LayoutConfig read_layout_config(const std::filesystem::path& path);

/// Directory holding the shipped swissmetro.layout / lpmc.layout files.
/// BVA_CONFIG_DIR in the environment overrides the compiled-in location.
std::filesystem::path config_dir();
std::filesystem::path default_layout_path(Layout layout);

/// The generic layout: id, choice (0-based index), avail_<alt>,
/// <alt>_<attr>, then sociodemographic columns.
LayoutConfig generic_layout(const AlternativeSet& alts,
                            const std::vector<std::string>& socio);
LayoutConfig read_generic_schema(const std::filesystem::path& schema_path);
void write_generic_schema(const std::filesystem::path& schema_path,
                          const AlternativeSet& alts,
                          const std::vector<std::string>& socio);

}  // namespace bva
