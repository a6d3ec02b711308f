// SPDX-License-Identifier: Apache-2.0
#include "bva/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "bva/errors.h"
#include "bva/layout.h"
#include "rng.h"
#include "text_util.h"

namespace bva {

std::optional<std::size_t> AlternativeSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  return std::nullopt;
}

std::optional<std::size_t> AlternativeSet::attribute_index(
    std::string_view name) const {
  for (std::size_t i = 0; i < attribute_names.size(); ++i)
    if (attribute_names[i] == name) return i;
  return std::nullopt;
}

void AlternativeSet::validate() const {
  if (names.size() < 2) throw SchemaError("need at least two alternatives");
  if (std::set<std::string>(names.begin(), names.end()).size() != names.size())
    throw SchemaError("alternative names not unique");
  if (std::set<std::string>(attribute_names.begin(), attribute_names.end())
          .size() != attribute_names.size())
    throw SchemaError("attribute names not unique");
}

std::size_t Observation::num_available() const {
  return static_cast<std::size_t>(
      std::count_if(avail.begin(), avail.end(), [](auto a) { return a != 0; }));
}

std::optional<std::size_t> Dataset::socio_index(std::string_view name) const {
  for (std::size_t i = 0; i < socio_names.size(); ++i)
    if (socio_names[i] == name) return i;
  return std::nullopt;
}

bool Dataset::same_schema(const Dataset& other) const {
  return alt_set == other.alt_set && socio_names == other.socio_names;
}

Dataset Dataset::empty_like() const {
  Dataset out;
  out.alt_set = alt_set;
  out.socio_names = socio_names;
  out.provenance = provenance;
  return out;
}

std::vector<std::int64_t> Dataset::ids() const {
  std::vector<std::int64_t> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.id);
  return out;
}

void Dataset::validate() const {
  alt_set.validate();
  const std::size_t k = alt_set.size();
  const std::size_t a = alt_set.num_attributes();
  std::vector<RowIssue> issues;
  std::unordered_set<std::int64_t> seen;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    auto issue = [&](std::string msg) {
      issues.push_back({0, r.id, std::move(msg)});
    };
    if (!seen.insert(r.id).second) issue("duplicate id");
    if (r.avail.size() != k || r.num_attributes != a ||
        r.attrs.size() != k * a || r.socio.size() != socio_names.size()) {
      issue("dimensions do not match the dataset schema");
      continue;
    }
    if (r.num_available() == 0) issue("no available alternative");
    if (r.choice >= k) {
      issue("choice index out of range");
    } else if (!r.available(r.choice)) {
      issue("chosen alternative is unavailable");
    }
    if (!std::all_of(r.attrs.begin(), r.attrs.end(),
                     [](double v) { return std::isfinite(v); }))
      issue("non-finite attribute value");
  }
  if (!issues.empty()) {
    const std::string what = std::to_string(issues.size()) +
                             " row(s) violate observation invariants; first: id " +
                             std::to_string(issues.front().id) + " " + issues.front().message;
    throw ValidationError(what, std::move(issues));
  }
}

Layout parse_layout(std::string_view name) {
  if (name == "swissmetro") return Layout::kSwissmetro;
  if (name == "lpmc") return Layout::kLpmc;
  if (name == "generic") return Layout::kGeneric;
  throw std::invalid_argument("unknown layout '" + std::string(name) +
                              "' (expected swissmetro, lpmc or generic)");
}

std::string_view layout_name(Layout layout) {
  switch (layout) {
    case Layout::kSwissmetro:
      return "swissmetro";
    case Layout::kLpmc:
      return "lpmc";
    case Layout::kGeneric:
      return "generic";
  }
  return "?";
}

std::filesystem::path schema_path_for(const std::filesystem::path& data_path) {
  auto p = data_path;
  p += ".schema";
  return p;
}

namespace {

struct BoundExpr {
  double constant = 0.0;
  std::vector<std::pair<double, std::size_t>> terms;
};

bool choice_token_matches(std::string_view cell, const std::string& code) {
  if (cell == code) return true;
  auto a = detail::parse_double(cell);
  auto b = detail::parse_double(code);
  return a && b && *a == *b;
}

}  // namespace

LoadResult load_dataset_detailed(const std::filesystem::path& path,
                                 const LayoutConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open dataset " + path.string());

  LoadResult result;
  Dataset& ds = result.dataset;
  ds.alt_set.names = cfg.alternatives;
  ds.alt_set.attribute_names = cfg.attributes;
  ds.alt_set.validate();
  ds.socio_names = cfg.socio;
  const std::size_t k = cfg.alternatives.size();
  const std::size_t a = cfg.attributes.size();

  std::string line;
  std::size_t line_no = 0;
  std::string embedded_provenance;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      constexpr std::string_view kTag = "# provenance:";
      if (t.substr(0, kTag.size()) == kTag)
        embedded_provenance = std::string(detail::trim(t.substr(kTag.size())));
      continue;
    }
    for (auto f : detail::split_fields(t, cfg.delimiter))
      header.emplace_back(detail::unquote(f));
    break;
  }
  if (header.empty()) throw SchemaError(path.string() + ": missing header row");

  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);
  std::vector<std::string> missing;
  for (const auto& c : cfg.referenced_columns())
    if (!col.count(c)) missing.push_back(c);
  if (!missing.empty()) {
    throw SchemaError(path.string() + ": missing column(s) for layout '" +
                      cfg.name + "': " + detail::join(missing, ", "));
  }

  auto bind = [&](const ColumnExpr& e) {
    BoundExpr b{e.constant, {}};
    for (const auto& [w, name] : e.terms) b.terms.emplace_back(w, col.at(name));
    return b;
  };
  std::vector<BoundExpr> avail_expr, attr_expr;
  for (const auto& e : cfg.availability) avail_expr.push_back(bind(e));
  for (const auto& e : cfg.attrs) attr_expr.push_back(bind(e));
  std::vector<std::size_t> socio_col;
  for (const auto& s : cfg.socio) socio_col.push_back(col.at(s));
  const bool row_ids = cfg.id_column == "@row";
  const std::size_t id_col = row_ids ? 0 : col.at(cfg.id_column);
  const std::size_t choice_col = col.at(cfg.choice_column);

  std::vector<RowIssue> issues;
  std::int64_t data_row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    ++data_row;
    ++result.rows_read;
    const auto fields = detail::split_fields(t, cfg.delimiter);
    if (fields.size() != header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    auto number = [&](std::size_t c) {
      auto v = detail::parse_double(fields[c]);
      if (!v) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": non-numeric value '" + std::string(fields[c]) +
                         "' in column '" + header[c] + "'");
      }
      return *v;
    };
    auto eval = [&](const BoundExpr& e) {
      double v = e.constant;
      for (const auto& [w, c] : e.terms) v += w * number(c);
      return v;
    };

    Observation obs;
    if (row_ids) {
      obs.id = data_row;
    } else {
      auto id = detail::parse_int(fields[id_col]);
      if (!id) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": non-integer id '" + std::string(fields[id_col]) + "'");
      }
      obs.id = *id;
    }
    obs.num_attributes = a;
    obs.attrs.resize(k * a);
    obs.avail.resize(k);
    for (std::size_t j = 0; j < k; ++j) obs.avail[j] = eval(avail_expr[j]) != 0.0;
    for (std::size_t i = 0; i < k * a; ++i) obs.attrs[i] = eval(attr_expr[i]);
    for (auto c : socio_col) obs.socio.push_back(number(c));

    const auto cell = detail::unquote(fields[choice_col]);
    std::optional<std::size_t> choice;
    for (std::size_t j = 0; j < k && !choice; ++j)
      for (const auto& code : cfg.choice_codes[j])
        if (choice_token_matches(cell, code)) {
          choice = j;
          break;
        }
    if (!choice) {
      if (cfg.drop_invalid_choice) {
        ++result.dropped_invalid_choice;
      } else {
        issues.push_back({line_no, obs.id,
                          "unrecognised choice '" + std::string(cell) + "'"});
      }
      continue;
    }
    obs.choice = *choice;
    if (!obs.available(obs.choice)) {
      if (cfg.drop_chosen_unavailable) {
        ++result.dropped_chosen_unavailable;
      } else {
        issues.push_back({line_no, obs.id, "chosen alternative is unavailable"});
      }
      continue;
    }
    if (!std::all_of(obs.attrs.begin(), obs.attrs.end(),
                     [](double v) { return std::isfinite(v); })) {
      issues.push_back({line_no, obs.id, "non-finite attribute value"});
      continue;
    }
    ds.rows.push_back(std::move(obs));
  }

  if (!issues.empty()) {
    std::ostringstream msg;
    msg << path.string() << ": " << issues.size() << " invalid row(s):";
    for (std::size_t i = 0; i < std::min<std::size_t>(issues.size(), 10); ++i)
      msg << " [line " << issues[i].line << ", id " << issues[i].id << ": "
          << issues[i].message << "]";
    throw ValidationError(msg.str(), std::move(issues));
  }
  ds.validate();

  std::ostringstream prov;
  if (!embedded_provenance.empty()) {
    prov << embedded_provenance;
  } else {
    prov << "source=" << path.filename().string() << " layout=" << cfg.name;
    if (result.dropped_invalid_choice || result.dropped_chosen_unavailable) {
      prov << " dropped_invalid_choice=" << result.dropped_invalid_choice
           << " dropped_chosen_unavailable=" << result.dropped_chosen_unavailable;
    }
  }
  ds.provenance = prov.str();
  return result;
}

LoadResult load_dataset_detailed(const std::filesystem::path& path,
                                 Layout layout) {
  if (!std::filesystem::exists(path)) {
    throw std::invalid_argument("cannot open dataset " + path.string());
  }
  if (layout == Layout::kGeneric) {
    const auto schema = schema_path_for(path);
    if (!std::filesystem::exists(schema)) {
      throw SchemaError("generic layout needs schema descriptor " +
                        schema.string());
    }
    return load_dataset_detailed(path, read_generic_schema(schema));
  }
  return load_dataset_detailed(path,
                               read_layout_config(default_layout_path(layout)));
}

Dataset load_dataset(const std::filesystem::path& path, Layout layout) {
  return load_dataset_detailed(path, layout).dataset;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto& alts = ds.alt_set;
  if (!ds.provenance.empty()) out << "# provenance: " << ds.provenance << "\n";
  out << "id,choice";
  for (const auto& n : alts.names) out << ",avail_" << n;
  for (const auto& n : alts.names)
    for (const auto& attr : alts.attribute_names) out << "," << n << "_" << attr;
  for (const auto& s : ds.socio_names) out << "," << s;
  out << "\n";
  for (const auto& r : ds.rows) {
    out << r.id << "," << r.choice;
    for (auto v : r.avail) out << "," << (v ? 1 : 0);
    for (double v : r.attrs) out << "," << detail::format_double(v);
    for (double v : r.socio) out << "," << detail::format_double(v);
    out << "\n";
  }
  write_generic_schema(schema_path_for(path), alts, ds.socio_names);
}

Dataset preprocess_swissmetro(const Dataset& ds) {
  const auto ga = ds.socio_index("GA");
  if (!ga) throw SchemaError("preprocess_swissmetro: GA column absent");
  const auto cost = ds.alt_set.attribute_index("cost");
  if (!cost) throw SchemaError("preprocess_swissmetro: cost attribute absent");
  std::vector<std::size_t> covered;
  for (const char* name : {"train", "sm"}) {
    auto k = ds.alt_set.index_of(name);
    if (!k) {
      throw SchemaError(std::string("preprocess_swissmetro: alternative '") +
                        name + "' absent");
    }
    covered.push_back(*k);
  }
  Dataset out = ds;
  for (auto& r : out.rows) {
    if (r.socio[*ga] == 0.0) continue;
    for (auto k : covered) r.attr(k, *cost) = 0.0;
  }
  constexpr std::string_view kTag = "ga_cost_zeroed(train,sm)";
  if (out.provenance.find(kTag) == std::string::npos) {
    out.provenance += out.provenance.empty() ? "" : " ";
    out.provenance += kTag;
  }
  return out;
}

void SplitConfig::validate() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw std::invalid_argument("split ratios must lie in [0, 1]");
    }
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
}

SplitSizes split_sizes(std::size_t n, const SplitConfig& cfg) {
  cfg.validate();
  SplitSizes s;
  s.val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * cfg.ratios[1]));
  s.test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * cfg.ratios[2]));
  s.train = n - s.val - s.test;
  return s;
}

namespace {

Dataset take(const Dataset& ds, const std::vector<std::uint8_t>& keep,
             std::uint8_t which, const std::string& tag) {
  Dataset out = ds.empty_like();
  for (std::size_t i = 0; i < ds.rows.size(); ++i)
    if (keep[i] == which) out.rows.push_back(ds.rows[i]);
  out.provenance += out.provenance.empty() ? tag : " " + tag;
  return out;
}

}  // namespace

Splits split(const Dataset& ds, const SplitConfig& cfg) {
  const auto sizes = split_sizes(ds.size(), cfg);
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto gen = detail::stream(cfg.seed, 0x5917);
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[detail::uniform_index(gen, i)]);
  }
  // 0 = train, 1 = val, 2 = test
  std::vector<std::uint8_t> part(ds.size(), 0);
  for (std::size_t i = 0; i < sizes.test; ++i) part[perm[i]] = 2;
  for (std::size_t i = sizes.test; i < sizes.test + sizes.val; ++i) part[perm[i]] = 1;
  const std::string seed = std::to_string(cfg.seed);
  return Splits{take(ds, part, 0, "split=train split_seed=" + seed),
                take(ds, part, 1, "split=val split_seed=" + seed),
                take(ds, part, 2, "split=test split_seed=" + seed)};
}

Dataset subsample(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (n > ds.size()) {
    throw std::invalid_argument("subsample size " + std::to_string(n) +
                                " exceeds row count " +
                                std::to_string(ds.size()));
  }
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto gen = detail::stream(seed, 0x5ab5);
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(idx[i], idx[i + detail::uniform_index(gen, ds.size() - i)]);
  }
  std::vector<std::uint8_t> keep(ds.size(), 0);
  for (std::size_t i = 0; i < n; ++i) keep[idx[i]] = 1;
  return take(ds, keep, 1,
              "subsample_n=" + std::to_string(n) +
                  " subsample_seed=" + std::to_string(seed));
}

}  // namespace bva
