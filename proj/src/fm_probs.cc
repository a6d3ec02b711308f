// SPDX-License-Identifier: Apache-2.0
#include "bva/fm_probs.h"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bva/errors.h"
#include "text_util.h"

namespace bva {

const std::vector<double>& FMProbabilities::at(std::int64_t id) const {
  auto it = rows.find(id);
  if (it == rows.end()) {
    throw std::out_of_range("no foundation-model probabilities for id " +
                            std::to_string(id));
  }
  return it->second;
}

void normalize_probability_vector(std::vector<double>& q, std::int64_t id) {
  double sum = 0.0;
  for (double v : q) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ValidationError(
          "probability entry outside [0,1] for id " + std::to_string(id),
          {{0, id, "entry outside [0,1]"}});
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance) {
    throw ValidationError("probabilities for id " + std::to_string(id) +
                              " sum to " + detail::format_double(sum),
                          {{0, id, "sum differs from 1 by more than 1e-6"}});
  }
  const double noise = 8.0 * static_cast<double>(q.size()) * DBL_EPSILON;
  if (std::abs(sum - 1.0) > noise) {
    for (auto& v : q) v /= sum;
  }
}

std::vector<double> safe_log(std::span<const double> q) {
  std::vector<double> out(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    out[k] = std::log(std::max(q[k], kSafeLogFloor));
  }
  return out;
}

FMProbabilities load_fm_table(const std::filesystem::path& path,
                              const AlternativeSet& alts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open probability file " + path.string());
  const std::string where = path.string();

  FMProbabilities fm;
  fm.alternatives = alts.names;
  std::string line;
  std::size_t line_no = 0;
  bool have_tag = false;
  bool have_header = false;
  std::vector<RowIssue> issues;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      if (have_tag) continue;
      for (auto tok : detail::split_fields(t.substr(1), ' ')) {
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos) continue;
        const auto key = tok.substr(0, eq);
        const auto val = std::string(tok.substr(eq + 1));
        if (key == "source") fm.source_tag = val;
        if (key == "split") fm.split = val;
      }
      have_tag = !fm.source_tag.empty() && !fm.split.empty();
      continue;
    }
    if (!have_header) {
      if (!have_tag) {
        throw SchemaError(where + ": missing '# source=<tag> split=<name>' line");
      }
      std::vector<std::string> cols;
      for (auto f : detail::split_fields(t, ',')) cols.emplace_back(detail::unquote(f));
      std::vector<std::string> expected{"id"};
      for (const auto& n : alts.names) expected.push_back("p_" + n);
      if (cols != expected) {
        throw SchemaError(where + ": header '" + detail::join(cols, ",") +
                          "' does not match alternative order '" +
                          detail::join(expected, ",") + "'");
      }
      have_header = true;
      continue;
    }
    const auto fields = detail::split_fields(t, ',');
    if (fields.size() != alts.size() + 1) {
      throw ParseError(where + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(alts.size() + 1) + " fields");
    }
    const auto id = detail::parse_int(fields[0]);
    if (!id) {
      throw ParseError(where + ":" + std::to_string(line_no) + ": bad id '" +
                       std::string(fields[0]) + "'");
    }
    std::vector<double> q;
    for (std::size_t k = 1; k < fields.size(); ++k) {
      auto v = detail::parse_double(fields[k]);
      if (!v) {
        throw ParseError(where + ":" + std::to_string(line_no) +
                         ": non-numeric probability '" + std::string(fields[k]) + "'");
      }
      q.push_back(*v);
    }
    try {
      normalize_probability_vector(q, *id);
    } catch (const ValidationError& e) {
      issues.push_back({line_no, *id, e.issues().empty() ? e.what() : e.issues()[0].message});
      continue;
    }
    if (!fm.rows.emplace(*id, std::move(q)).second) {
      issues.push_back({line_no, *id, "duplicate id"});
    }
  }
  if (!have_header) {
    throw SchemaError(where + (have_tag ? ": missing header row"
                                        : ": missing '# source=<tag> split=<name>' line"));
  }
  if (!issues.empty()) {
    std::ostringstream msg;
    msg << where << ": " << issues.size() << " invalid probability row(s):";
    for (std::size_t i = 0; i < std::min<std::size_t>(issues.size(), 10); ++i)
      msg << " [id " << issues[i].id << ": " << issues[i].message << "]";
    throw ValidationError(msg.str(), std::move(issues));
  }
  return fm;
}

void check_alignment(const FMProbabilities& fm, const Dataset& ds) {
  std::vector<std::int64_t> missing, extra;
  std::vector<std::int64_t> ids = ds.ids();
  std::sort(ids.begin(), ids.end());
  for (auto id : ids)
    if (!fm.rows.count(id)) missing.push_back(id);
  for (const auto& [id, q] : fm.rows)
    if (!std::binary_search(ids.begin(), ids.end(), id)) extra.push_back(id);
  if (missing.empty() && extra.empty()) return;
  std::ostringstream msg;
  msg << "probability ids do not match dataset:";
  auto list = [&](const char* what, const std::vector<std::int64_t>& v) {
    if (v.empty()) return;
    msg << " " << v.size() << " " << what << " (";
    for (std::size_t i = 0; i < std::min<std::size_t>(v.size(), 20); ++i)
      msg << (i ? ", " : "") << v[i];
    msg << (v.size() > 20 ? ", ...)" : ")");
  };
  list("missing", missing);
  list("extra", extra);
  throw AlignmentError(msg.str(), std::move(missing), std::move(extra));
}

FMProbabilities load_fm_probs(const std::filesystem::path& path,
                              const Dataset& expected,
                              const std::optional<std::string>& expected_split) {
  auto fm = load_fm_table(path, expected.alt_set);
  if (expected_split && fm.split != *expected_split) {
    throw SchemaError(path.string() + ": split tag '" + fm.split +
                      "' where '" + *expected_split + "' was expected");
  }
  check_alignment(fm, expected);
  return fm;
}

FMProbabilities restrict_to(const FMProbabilities& fm, const Dataset& ds,
                            const std::string& split) {
  FMProbabilities out;
  out.source_tag = fm.source_tag;
  out.split = split;
  out.alternatives = fm.alternatives;
  std::vector<std::int64_t> missing;
  for (const auto& r : ds.rows) {
    auto it = fm.rows.find(r.id);
    if (it == fm.rows.end()) {
      missing.push_back(r.id);
    } else {
      out.rows.emplace(r.id, it->second);
    }
  }
  if (!missing.empty()) {
    const std::string what = std::to_string(missing.size()) +
                             " id(s) lack probabilities, first " +
                             std::to_string(missing.front());
    throw AlignmentError(what, std::move(missing), {});
  }
  return out;
}

void save_fm_probs(const FMProbabilities& fm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# source=" << fm.source_tag << " split=" << fm.split << "\n";
  out << "id";
  for (const auto& a : fm.alternatives) out << ",p_" << a;
  out << "\n";
  for (const auto& [id, q] : fm.rows) {
    out << id;
    for (double v : q) out << "," << detail::format_double(v);
    out << "\n";
  }
}

}  // namespace bva
