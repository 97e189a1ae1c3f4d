#include "tnfp/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tnfp/errors.hpp"

namespace tnfp {

namespace {

using Json = nlohmann::ordered_json;

constexpr int kDomainVersion = 1;
constexpr int kCheckpointVersion = 1;

void write_json(const std::string& path, const Json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw InputError("cannot open '" + path + "' for writing");
  }
  out << doc.dump(1) << '\n';
  if (!out) {
    throw InputError("failed to write '" + path + "'");
  }
}

Json read_json(const std::string& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError(std::string(what) + " '" + path + "' not found");
  }
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw InputError(std::string(what) + " '" + path + "' is not valid JSON: " + e.what());
  }
}

Json domain_json(const Domain& d) {
  Json j;
  j["center"] = d.center;
  j["half_width"] = d.half_width;
  return j;
}

Domain domain_from(const Json& j) {
  Domain d;
  d.center = j.at("center").get<std::vector<double>>();
  d.half_width = j.at("half_width").get<std::vector<double>>();
  if (d.center.size() != d.half_width.size() || d.center.empty()) {
    throw InputError("domain: center and half_width must be non-empty and of equal length");
  }
  d.validate();
  return d;
}

template <class T>
T field(const Json& doc, const char* key, std::string_view what) {
  try {
    return doc.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw InputError(std::string(what) + ": bad or missing field '" + key + "': " + e.what());
  }
}

}  // namespace

void write_domain_file(const std::string& path, const DomainFile& file) {
  Json doc;
  doc["format"] = "tnfp-domain";
  doc["version"] = kDomainVersion;
  doc["domain"] = domain_json(file.domain);
  const DomainProvenance& p = file.provenance;
  Json prov;
  prov["method"] = p.method;
  prov["benchmark"] = p.benchmark;
  prov["seed"] = p.seed;
  prov["trajectories"] = p.trajectories;
  prov["burnin_steps"] = p.burnin_steps;
  prov["terminal_steps"] = p.terminal_steps;
  prov["step_size"] = p.step_size;
  prov["margin"] = p.margin;
  prov["samples"] = p.samples;
  prov["threshold"] = p.threshold;
  doc["provenance"] = prov;
  write_json(path, doc);
}

DomainFile read_domain_file(const std::string& path) {
  const Json doc = read_json(path, "domain file");
  if (doc.value("format", "") != "tnfp-domain" || doc.value("version", 0) != kDomainVersion) {
    throw InputError("domain file '" + path + "' has an unknown format or version");
  }
  DomainFile file;
  try {
    file.domain = domain_from(doc.at("domain"));
  } catch (const Json::exception& e) {
    throw InputError("domain file '" + path + "': " + e.what());
  }
  if (doc.contains("provenance")) {
    const Json& p = doc["provenance"];
    const std::string_view what = "domain provenance";
    file.provenance.method = field<std::string>(p, "method", what);
    file.provenance.benchmark = field<std::string>(p, "benchmark", what);
    file.provenance.seed = field<std::uint64_t>(p, "seed", what);
    file.provenance.trajectories = field<int>(p, "trajectories", what);
    file.provenance.burnin_steps = field<long long>(p, "burnin_steps", what);
    file.provenance.terminal_steps = field<long long>(p, "terminal_steps", what);
    file.provenance.step_size = field<double>(p, "step_size", what);
    file.provenance.margin = field<double>(p, "margin", what);
    file.provenance.samples = field<long long>(p, "samples", what);
    file.provenance.threshold = field<double>(p, "threshold", what);
  }
  return file;
}

ModelFamily parse_family(std::string_view name) {
  if (name == "trbfn") return ModelFamily::Trbfn;
  if (name == "tffn") return ModelFamily::Tffn;
  throw ConfigError("unknown model family '" + std::string(name) + "' (expected trbfn or tffn)");
}

std::string_view family_name(ModelFamily family) { return family == ModelFamily::Trbfn ? "trbfn" : "tffn"; }

Precision parse_precision(std::string_view name) {
  if (name == "single") return Precision::Single;
  if (name == "double") return Precision::Double;
  throw ConfigError("unknown precision '" + std::string(name) + "' (expected single or double)");
}

std::string_view precision_name(Precision precision) {
  return precision == Precision::Single ? "single" : "double";
}

void write_checkpoint(const std::string& path, const Checkpoint& c) {
  Json doc;
  doc["format"] = "tnfp-checkpoint";
  doc["version"] = kCheckpointVersion;
  doc["family"] = family_name(c.family);
  doc["precision"] = precision_name(c.precision);
  doc["benchmark"] = c.benchmark;
  doc["seed"] = c.seed;
  doc["domain"] = domain_json(c.domain);
  doc["rank"] = c.rank;
  if (c.family == ModelFamily::Trbfn) {
    std::vector<std::string> kinds;
    for (const RbfKind k : c.kinds) kinds.emplace_back(rbf_kind_name(k));
    doc["kinds"] = kinds;
  } else {
    doc["widths"] = c.shape.widths;
    doc["quad_panels"] = c.quad_panels;
    doc["quad_points"] = c.quad_points;
  }
  doc["params"] = c.params;
  Json state;
  state["epoch"] = c.state.epoch;
  state["step"] = c.state.optimizer.step;
  state["m"] = c.state.optimizer.m;
  state["v"] = c.state.optimizer.v;
  state["steps"] = c.state.optimizer.steps;
  doc["train_state"] = state;
  write_json(path, doc);
}

Checkpoint read_checkpoint(const std::string& path) {
  const Json doc = read_json(path, "checkpoint");
  if (doc.value("format", "") != "tnfp-checkpoint" || doc.value("version", 0) != kCheckpointVersion) {
    throw InputError("checkpoint '" + path + "' has an unknown format or version");
  }
  const std::string_view what = "checkpoint";
  Checkpoint c;
  try {
    c.family = parse_family(field<std::string>(doc, "family", what));
    c.precision = parse_precision(field<std::string>(doc, "precision", what));
  } catch (const ConfigError& e) {
    throw InputError(std::string("checkpoint: ") + e.what());
  }
  c.benchmark = field<std::string>(doc, "benchmark", what);
  c.seed = field<std::uint64_t>(doc, "seed", what);
  try {
    c.domain = domain_from(doc.at("domain"));
  } catch (const Json::exception& e) {
    throw InputError(std::string("checkpoint domain: ") + e.what());
  }
  c.rank = field<int>(doc, "rank", what);
  if (c.family == ModelFamily::Trbfn) {
    try {
      for (const std::string& k : field<std::vector<std::string>>(doc, "kinds", what)) {
        c.kinds.push_back(parse_rbf_kind(k));
      }
    } catch (const ConfigError& e) {
      throw InputError(std::string("checkpoint: ") + e.what());
    }
  } else {
    c.shape.widths = field<std::vector<int>>(doc, "widths", what);
    c.quad_panels = field<int>(doc, "quad_panels", what);
    c.quad_points = field<int>(doc, "quad_points", what);
  }
  c.params = field<std::vector<double>>(doc, "params", what);
  if (doc.contains("train_state")) {
    const Json& s = doc["train_state"];
    c.state.epoch = field<long long>(s, "epoch", what);
    c.state.optimizer.step = field<std::int64_t>(s, "step", what);
    c.state.optimizer.m = field<std::vector<double>>(s, "m", what);
    c.state.optimizer.v = field<std::vector<double>>(s, "v", what);
    c.state.optimizer.steps = field<std::vector<std::int64_t>>(s, "steps", what);
  }
  return c;
}

namespace {

template <class Model>
Model fill_params(Model model, const Checkpoint& c) {
  if (c.params.size() != model.parameter_count()) {
    throw InputError("checkpoint: " + std::to_string(c.params.size()) + " parameters, the model shape needs " +
                     std::to_string(model.parameter_count()));
  }
  std::span<typename Model::real_type> raw = model.mutable_params();
  for (std::size_t k = 0; k < raw.size(); ++k) raw[k] = static_cast<typename Model::real_type>(c.params[k]);
  model.refresh();
  return model;
}

}  // namespace

template <class Model>
Model restore_model(const Checkpoint& c) {
  using Real = typename Model::real_type;
  if constexpr (std::is_same_v<Model, TrbfnModel<Real>>) {
    if (c.family != ModelFamily::Trbfn) {
      throw InputError("checkpoint holds a " + std::string(family_name(c.family)) + " model, expected trbfn");
    }
    return fill_params(TrbfnModel<Real>(c.domain, c.rank, c.kinds), c);
  } else {
    if (c.family != ModelFamily::Tffn) {
      throw InputError("checkpoint holds a " + std::string(family_name(c.family)) + " model, expected tffn");
    }
    return fill_params(TffnModel<Real>(c.domain, c.rank, c.shape, c.quad_panels, c.quad_points), c);
  }
}

template TrbfnModel<float> restore_model<TrbfnModel<float>>(const Checkpoint&);
template TrbfnModel<double> restore_model<TrbfnModel<double>>(const Checkpoint&);
template TffnModel<float> restore_model<TffnModel<float>>(const Checkpoint&);
template TffnModel<double> restore_model<TffnModel<double>>(const Checkpoint&);

}  // namespace tnfp
