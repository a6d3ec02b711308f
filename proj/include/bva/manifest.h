// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace bva {

struct ManifestFile {
  std::string role;
  std::string path;
  std::string sha256;
};

/// Record of one CLI run. Deliberately free of timestamps and host details
/// so identical inputs give an identical manifest.
struct Manifest {
  std::string command;
  std::vector<std::string> args;
  std::map<std::string, std::string> config;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<ManifestFile> inputs;
  std::vector<ManifestFile> outputs;

  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_output(const std::string& role, const std::filesystem::path& path);
  std::string render() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace bva
