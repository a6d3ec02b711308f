// SPDX-License-Identifier: Apache-2.0
#include "bva/layout.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "bva/errors.h"
#include "text_util.h"

#ifndef BVA_CONFIG_DIR
#define BVA_CONFIG_DIR "configs"
#endif

namespace bva {

namespace pt = boost::property_tree;
using detail::split_list;
using detail::trim;

ColumnExpr ColumnExpr::parse(const std::string& text) {
  ColumnExpr e;
  const auto terms = split_list(text, '+');
  if (terms.empty()) throw SchemaError("empty column expression");
  for (const auto& term : terms) {
    if (auto c = detail::parse_double(term)) {
      e.constant += *c;
      continue;
    }
    const auto star = term.find('*');
    if (star == std::string::npos) {
      e.terms.emplace_back(1.0, std::string(trim(term)));
      continue;
    }
    const auto w = detail::parse_double(term.substr(0, star));
    const auto col = std::string(trim(std::string_view(term).substr(star + 1)));
    if (!w || col.empty()) {
      throw SchemaError("cannot parse column expression term '" + term + "'");
    }
    e.terms.emplace_back(*w, col);
  }
  return e;
}

std::string ColumnExpr::to_string() const {
  std::vector<std::string> parts;
  for (const auto& [w, col] : terms) {
    parts.push_back(w == 1.0 ? col : detail::format_double(w) + "*" + col);
  }
  if (constant != 0.0 || parts.empty()) {
    parts.push_back(detail::format_double(constant));
  }
  return detail::join(parts, " + ");
}

std::vector<std::string> LayoutConfig::referenced_columns() const {
  std::set<std::string> cols;
  if (id_column != "@row") cols.insert(id_column);
  cols.insert(choice_column);
  for (const auto& e : availability)
    for (const auto& t : e.terms) cols.insert(t.second);
  for (const auto& e : attrs)
    for (const auto& t : e.terms) cols.insert(t.second);
  cols.insert(socio.begin(), socio.end());
  return {cols.begin(), cols.end()};
}

namespace {

pt::ptree read_ini_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config file " + path.string());
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw SchemaError("malformed config " + path.string() + ": " + e.message());
  }
  return tree;
}

const pt::ptree& section(const pt::ptree& tree, const std::string& name,
                         const std::filesystem::path& path) {
  auto it = tree.find(name);
  if (it == tree.not_found()) {
    throw SchemaError("config " + path.string() + " lacks section [" + name +
                      "]");
  }
  return it->second;
}

std::string value(const pt::ptree& sec, const std::string& key,
                  const std::string& where) {
  auto it = sec.find(key);
  if (it == sec.not_found()) {
    throw SchemaError(where + ": missing key '" + key + "'");
  }
  return std::string(trim(it->second.data()));
}

std::string optional_value(const pt::ptree& sec, const std::string& key,
                           const std::string& fallback) {
  auto it = sec.find(key);
  return it == sec.not_found() ? fallback
                               : std::string(trim(it->second.data()));
}

bool parse_bool(const std::string& s) {
  return s == "true" || s == "1" || s == "yes";
}

char parse_delimiter(const std::string& s) {
  if (s == "tab" || s == "\\t") return '\t';
  if (s == "comma" || s == ",") return ',';
  if (s == "whitespace" || s == "space") return ' ';
  if (s == "semicolon" || s == ";") return ';';
  throw SchemaError("unknown delimiter '" + s + "'");
}

void check_unique(const std::vector<std::string>& v, const std::string& what) {
  std::set<std::string> seen(v.begin(), v.end());
  if (seen.size() != v.size()) throw SchemaError(what + " labels not unique");
}

}  // namespace

LayoutConfig read_layout_config(const std::filesystem::path& path) {
  const auto tree = read_ini_file(path);
  const auto& head = section(tree, "layout", path);
  const std::string where = path.string();

  LayoutConfig cfg;
  cfg.name = optional_value(head, "name", path.stem().string());
  cfg.delimiter = parse_delimiter(optional_value(head, "delimiter", "comma"));
  cfg.id_column = optional_value(head, "id", "@row");
  cfg.alternatives = split_list(value(head, "alternatives", where));
  cfg.attributes = split_list(value(head, "attributes", where));
  if (auto c = detail::parse_double(optional_value(head, "vot_ceiling", "0"))) {
    cfg.vot_ceiling = *c;
  }
  check_unique(cfg.alternatives, "alternative");
  check_unique(cfg.attributes, "attribute");
  if (cfg.alternatives.size() < 2) {
    throw SchemaError(where + ": need at least two alternatives");
  }

  const auto& choice = section(tree, "choice", path);
  cfg.choice_column = value(choice, "column", where + " [choice]");
  for (const auto& alt : cfg.alternatives) {
    cfg.choice_codes.push_back(
        split_list(value(choice, alt, where + " [choice]"), '|'));
  }

  auto avail_it = tree.find("availability");
  for (const auto& alt : cfg.alternatives) {
    cfg.availability.push_back(
        avail_it == tree.not_found()
            ? ColumnExpr{1.0, {}}
            : ColumnExpr::parse(optional_value(avail_it->second, alt, "1")));
  }

  for (const auto& alt : cfg.alternatives) {
    const auto& sec = section(tree, "attributes:" + alt, path);
    for (const auto& attr : cfg.attributes) {
      cfg.attrs.push_back(ColumnExpr::parse(
          value(sec, attr, where + " [attributes:" + alt + "]")));
    }
  }

  if (auto it = tree.find("socio"); it != tree.not_found()) {
    cfg.socio = split_list(optional_value(it->second, "columns", ""));
  }
  if (auto it = tree.find("filter"); it != tree.not_found()) {
    cfg.drop_invalid_choice =
        parse_bool(optional_value(it->second, "drop_invalid_choice", "false"));
    cfg.drop_chosen_unavailable = parse_bool(
        optional_value(it->second, "drop_chosen_unavailable", "false"));
  }
  return cfg;
}

std::filesystem::path config_dir() {
  if (const char* env = std::getenv("BVA_CONFIG_DIR"); env && *env) {
    return env;
  }
  return BVA_CONFIG_DIR;
}

std::filesystem::path default_layout_path(Layout layout) {
  switch (layout) {
    case Layout::kSwissmetro:
      return config_dir() / "swissmetro.layout";
    case Layout::kLpmc:
      return config_dir() / "lpmc.layout";
    case Layout::kGeneric:
      break;
  }
  throw std::invalid_argument(
      "generic layout has no shipped config; it uses a per-file schema");
}

LayoutConfig generic_layout(const AlternativeSet& alts,
                            const std::vector<std::string>& socio) {
  alts.validate();
  LayoutConfig cfg;
  cfg.name = "generic";
  cfg.delimiter = ',';
  cfg.id_column = "id";
  cfg.alternatives = alts.names;
  cfg.attributes = alts.attribute_names;
  cfg.choice_column = "choice";
  for (std::size_t k = 0; k < alts.size(); ++k) {
    cfg.choice_codes.push_back({std::to_string(k)});
    cfg.availability.push_back(ColumnExpr{0.0, {{1.0, "avail_" + alts.names[k]}}});
    for (const auto& attr : alts.attribute_names) {
      cfg.attrs.push_back(ColumnExpr{0.0, {{1.0, alts.names[k] + "_" + attr}}});
    }
  }
  cfg.socio = socio;
  return cfg;
}

LayoutConfig read_generic_schema(const std::filesystem::path& schema_path) {
  const auto tree = read_ini_file(schema_path);
  const auto& head = section(tree, "layout", schema_path);
  AlternativeSet alts;
  alts.names = split_list(value(head, "alternatives", schema_path.string()));
  alts.attribute_names =
      split_list(value(head, "attributes", schema_path.string()));
  return generic_layout(alts, split_list(optional_value(head, "socio", "")));
}

void write_generic_schema(const std::filesystem::path& schema_path,
                          const AlternativeSet& alts,
                          const std::vector<std::string>& socio) {
  std::ofstream out(schema_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + schema_path.string());
  out << "[layout]\n"
      << "alternatives = " << detail::join(alts.names, ", ") << "\n"
      << "attributes = " << detail::join(alts.attribute_names, ", ") << "\n"
      << "socio = " << detail::join(socio, ", ") << "\n";
}

}  // namespace bva
