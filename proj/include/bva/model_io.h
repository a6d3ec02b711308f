// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "bva/adapter.h"
#include "bva/mnl.h"

namespace bva {

inline constexpr int kModelFormatVersion = 1;

/// A persisted structural model. Only theta is stored; the effective
/// coefficients are rederived on load.
struct MnlModelFile {
  BoundSpec spec;
  StructuralParams params;
  ConvergenceReport report;
  std::string kind = "mnl";  // "mnl" or "distilled-mnl"
};

/// Persisted adapter: the MNL document plus the correction term, the FM
/// source tag and the frozen-structural checksum.
struct AdapterModelFile {
  AdapterModel model;
  ConvergenceReport structural_report;
  double fitted_alpha = 0.0;
  int stage2_iterations = 0;
};

std::string serialize_spec(const UtilitySpec& spec);
UtilitySpec parse_spec(const std::string& text);
/// A preset name (swissmetro, lpmc, generic) or a path to a JSON spec.
UtilitySpec resolve_spec(const std::string& name_or_path, const AlternativeSet& alts);

std::string serialize_mnl(const MnlModelFile& m);
std::string serialize_adapter(const AdapterModelFile& m);

/// Either document kind; `adapter` is set for adapter documents.
struct LoadedModel {
  std::optional<MnlModelFile> mnl;
  std::optional<AdapterModelFile> adapter;
};
LoadedModel parse_model(const std::string& text);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace bva
