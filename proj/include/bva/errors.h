// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bva {

// Missing or inconsistent columns, alternatives or coefficients.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RowIssue {
  std::size_t line = 0;  // 1-based line in the source file, 0 if not file-backed
  std::int64_t id = 0;
  std::string message;
};

// Rows or probability vectors that break an invariant. Carries every
// offending row, not just the first.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& what, std::vector<RowIssue> issues = {})
      : std::runtime_error(what), issues_(std::move(issues)) {}
  const std::vector<RowIssue>& issues() const { return issues_; }

 private:
  std::vector<RowIssue> issues_;
};

// Probability table ids do not cover a dataset exactly.
class AlignmentError : public std::runtime_error {
 public:
  AlignmentError(const std::string& what, std::vector<std::int64_t> missing,
                 std::vector<std::int64_t> extra)
      : std::runtime_error(what),
        missing_(std::move(missing)),
        extra_(std::move(extra)) {}
  const std::vector<std::int64_t>& missing() const { return missing_; }
  const std::vector<std::int64_t>& extra() const { return extra_; }

 private:
  std::vector<std::int64_t> missing_;
  std::vector<std::int64_t> extra_;
};

// A fixed-table predictor was asked to answer perturbed inputs.
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& what, int iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

// Frozen structural parameters no longer match their recorded checksum.
class ChecksumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bva
