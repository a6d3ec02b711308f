// SPDX-License-Identifier: Apache-2.0
#include "bva/model_io.h"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bva/errors.h"

namespace bva {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json spec_json(const UtilitySpec& s) {
  ordered_json j;
  j["name"] = s.name;
  j["asc_alts"] = s.asc_alts;
  j["coefficients"] = ordered_json::array();
  for (const auto& c : s.coefficients) {
    j["coefficients"].push_back(
        {{"name", c.name}, {"attribute", c.attribute}, {"alternatives", c.alternatives}});
  }
  j["interactions"] = ordered_json::array();
  for (const auto& i : s.interactions) {
    j["interactions"].push_back({{"socio", i.socio}, {"alternative", i.alternative}});
  }
  if (s.cost_zero_rule) {
    j["cost_zero_rule"] = {{"socio", s.cost_zero_rule->socio},
                           {"attribute", s.cost_zero_rule->attribute},
                           {"alternatives", s.cost_zero_rule->alternatives}};
  } else {
    j["cost_zero_rule"] = nullptr;
  }
  return j;
}

UtilitySpec spec_from(const json& j) {
  UtilitySpec s;
  s.name = j.value("name", "custom");
  s.asc_alts = j.at("asc_alts").get<std::vector<std::string>>();
  for (const auto& c : j.at("coefficients")) {
    s.coefficients.push_back({c.at("name").get<std::string>(),
                              c.at("attribute").get<std::string>(),
                              c.at("alternatives").get<std::vector<std::string>>()});
  }
  if (j.contains("interactions")) {
    for (const auto& i : j.at("interactions")) {
      s.interactions.push_back(
          {i.at("socio").get<std::string>(), i.at("alternative").get<std::string>()});
    }
  }
  if (j.contains("cost_zero_rule") && !j.at("cost_zero_rule").is_null()) {
    const auto& r = j.at("cost_zero_rule");
    s.cost_zero_rule = CostZeroRule{r.at("socio").get<std::string>(),
                                    r.value("attribute", "cost"),
                                    r.at("alternatives").get<std::vector<std::string>>()};
  }
  return s;
}

ordered_json report_json(const ConvergenceReport& r) {
  return {{"iterations", r.iterations},      {"grad_inf_norm", r.grad_inf_norm},
          {"converged", r.converged},        {"train_ll", r.train_ll},
          {"val_ll", r.val_ll},              {"final_step", r.final_step},
          {"non_identified", r.non_identified}};
}

ConvergenceReport report_from(const json& j) {
  ConvergenceReport r;
  r.iterations = j.value("iterations", 0);
  r.grad_inf_norm = j.value("grad_inf_norm", 0.0);
  r.converged = j.value("converged", false);
  r.train_ll = j.value("train_ll", 0.0);
  r.val_ll = j.value("val_ll", 0.0);
  r.final_step = j.value("final_step", 0.0);
  r.non_identified = j.value("non_identified", std::vector<std::string>{});
  return r;
}

ordered_json structural_json(const BoundSpec& spec, const StructuralParams& p) {
  ordered_json j;
  j["schema"] = {{"alternatives", spec.alternatives().names},
                 {"attributes", spec.alternatives().attribute_names},
                 {"socio", spec.socio_names()}};
  j["spec"] = spec_json(spec.spec());
  ordered_json theta = ordered_json::object();
  for (std::size_t i = 0; i < p.theta.size(); ++i) {
    theta[spec.spec().coefficients[i].name] = p.theta[i];
  }
  ordered_json asc = ordered_json::object();
  for (std::size_t i = 0; i < p.asc.size(); ++i) asc[spec.spec().asc_alts[i]] = p.asc[i];
  j["theta"] = theta;
  j["asc"] = asc;
  j["w_inter"] = p.w_inter;
  return j;
}

BoundSpec bound_spec_from(const json& j) {
  AlternativeSet alts;
  const auto& schema = j.at("schema");
  alts.names = schema.at("alternatives").get<std::vector<std::string>>();
  alts.attribute_names = schema.at("attributes").get<std::vector<std::string>>();
  return BoundSpec(spec_from(j.at("spec")), alts,
                   schema.at("socio").get<std::vector<std::string>>());
}

StructuralParams structural_from(const json& j, const BoundSpec& spec) {
  StructuralParams p = StructuralParams::zeros(spec);
  const auto& theta = j.at("theta");
  for (std::size_t i = 0; i < p.theta.size(); ++i) {
    p.theta[i] = theta.at(spec.spec().coefficients[i].name).get<double>();
  }
  const auto& asc = j.at("asc");
  for (std::size_t i = 0; i < p.asc.size(); ++i) {
    p.asc[i] = asc.at(spec.spec().asc_alts[i]).get<double>();
  }
  p.w_inter = j.at("w_inter").get<std::vector<double>>();
  if (p.w_inter.size() != spec.num_interactions()) {
    throw ParseError("interaction weight count does not match the spec");
  }
  return p;
}

}  // namespace

std::string serialize_spec(const UtilitySpec& spec) { return spec_json(spec).dump(2) + "\n"; }

UtilitySpec parse_spec(const std::string& text) {
  try {
    return spec_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed utility spec: ") + e.what());
  }
}

UtilitySpec resolve_spec(const std::string& name_or_path, const AlternativeSet& alts) {
  if (name_or_path == "swissmetro" || name_or_path == "lpmc" || name_or_path == "generic") {
    return UtilitySpec::preset(name_or_path, alts);
  }
  return parse_spec(read_text_file(name_or_path));
}

std::string serialize_mnl(const MnlModelFile& m) {
  ordered_json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = m.kind;
  j.update(structural_json(m.spec, m.params));
  j["convergence"] = report_json(m.report);
  return j.dump(2) + "\n";
}

std::string serialize_adapter(const AdapterModelFile& m) {
  const auto& a = m.model;
  ordered_json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = "adapter";
  j.update(structural_json(a.spec, a.structural));
  j["convergence"] = report_json(m.structural_report);
  j["structural_checksum"] = a.checksum;
  j["fm_source"] = a.fm_source;
  j["correction"] = {{"alpha", a.correction.alpha},
                     {"num_alternatives", a.correction.num_alternatives},
                     {"hidden", a.correction.hidden},
                     {"activation", "tanh"},
                     {"w1", a.correction.w1},
                     {"b1", a.correction.b1},
                     {"w2", a.correction.w2},
                     {"b2", a.correction.b2}};
  j["stage2"] = {{"iterations", m.stage2_iterations}, {"alpha", m.fitted_alpha}};
  return j.dump(2) + "\n";
}

LoadedModel parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model document: ") + e.what());
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw ParseError("unsupported model format version " + std::to_string(version));
    }
    const auto kind = j.at("kind").get<std::string>();
    auto spec = bound_spec_from(j);
    auto params = structural_from(j, spec);
    const auto report = report_from(j.value("convergence", json::object()));
    LoadedModel out;
    if (kind != "adapter") {
      out.mnl = MnlModelFile{std::move(spec), std::move(params), report, kind};
      return out;
    }
    const auto& c = j.at("correction");
    const auto k = c.at("num_alternatives").get<std::size_t>();
    const auto h = c.at("hidden").get<std::size_t>();
    auto corr = CorrectionParams::zero(k, h);
    corr.alpha = c.at("alpha").get<double>();
    corr.w1 = c.at("w1").get<std::vector<double>>();
    corr.b1 = c.at("b1").get<std::vector<double>>();
    corr.w2 = c.at("w2").get<std::vector<double>>();
    corr.b2 = c.at("b2").get<std::vector<double>>();
    if (corr.w1.size() != h * k || corr.b1.size() != h || corr.w2.size() != k * h ||
        corr.b2.size() != k || k != spec.num_alternatives()) {
      throw ParseError("correction network dimensions are inconsistent");
    }
    AdapterModelFile a{AdapterModel{std::move(spec), std::move(params),
                                    j.at("structural_checksum").get<std::string>(),
                                    std::move(corr), j.at("fm_source").get<std::string>()},
                       report, 0.0, 0};
    if (j.contains("stage2")) {
      a.fitted_alpha = j["stage2"].value("alpha", 0.0);
      a.stage2_iterations = j["stage2"].value("iterations", 0);
    }
    a.model.verify();
    out.adapter = std::move(a);
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model document missing fields: ") + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace bva
