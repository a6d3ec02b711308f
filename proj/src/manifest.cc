// SPDX-License-Identifier: Apache-2.0
#include "bva/manifest.h"

#include <json.hpp>

#include "bva/checksum.h"
#include "bva/model_io.h"

namespace bva {

namespace {

ManifestFile describe(const std::string& role, const std::filesystem::path& path) {
  return {role, path.generic_string(), sha256_file(path)};
}

nlohmann::ordered_json files(const std::vector<ManifestFile>& v) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : v) arr.push_back({{"role", f.role}, {"path", f.path}, {"sha256", f.sha256}});
  return arr;
}

}  // namespace

void Manifest::add_input(const std::string& role, const std::filesystem::path& path) {
  inputs.push_back(describe(role, path));
}

void Manifest::add_output(const std::string& role, const std::filesystem::path& path) {
  outputs.push_back(describe(role, path));
}

std::string Manifest::render() const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["command"] = command;
  j["args"] = args;
  j["config"] = nlohmann::ordered_json(config);
  j["seeds"] = nlohmann::ordered_json(seeds);
  j["inputs"] = files(inputs);
  j["outputs"] = files(outputs);
  return j.dump(2) + "\n";
}

void Manifest::write(const std::filesystem::path& path) const {
  write_text_file(path, render());
}

}  // namespace bva
