#pragma once

// Run configuration: JSON parsing, per-command parameter schemas and serialisation.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "phimin/error.hpp"
#include "phimin/potential.hpp"

namespace phimin {

enum class Command {
  PotentialCheck,
  SolveRotational,
  SolveTranslation,
  SolveGraph,
  AuditFundamental,
  AuditStability,
  AuditArea,
  AuditMonotonicity,
  AuditCurvatureRatio,
  AuditConvexity,
  Blowup,
  Export,
};

inline constexpr std::array<std::pair<Command, const char*>, 12> command_names{{
    {Command::PotentialCheck, "PotentialCheck"},
    {Command::SolveRotational, "SolveRotational"},
    {Command::SolveTranslation, "SolveTranslation"},
    {Command::SolveGraph, "SolveGraph"},
    {Command::AuditFundamental, "AuditFundamental"},
    {Command::AuditStability, "AuditStability"},
    {Command::AuditArea, "AuditArea"},
    {Command::AuditMonotonicity, "AuditMonotonicity"},
    {Command::AuditCurvatureRatio, "AuditCurvatureRatio"},
    {Command::AuditConvexity, "AuditConvexity"},
    {Command::Blowup, "Blowup"},
    {Command::Export, "Export"},
}};

inline std::string to_string(Command c) {
  for (const auto& [k, n] : command_names)
    if (k == c) return n;
  return "unknown";
}

inline std::optional<Command> command_from_string(const std::string& s) {
  for (const auto& [k, n] : command_names)
    if (s == n) return k;
  return std::nullopt;
}

struct RunConfig {
  PotentialSpec potential;
  Command command = Command::PotentialCheck;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  bool operator==(const RunConfig& o) const {
    return potential == o.potential && command == o.command && params == o.params && output_dir == o.output_dir &&
           seed == o.seed;
  }
};

namespace detail {

using OJson = nlohmann::ordered_json;

/// Collects every violation before failing, each tagged with its JSON path.
struct Violations {
  std::vector<std::string> list;

  void add(const std::string& path, const std::string& what) { list.push_back(path + ": " + what); }
  void raise() const {
    if (list.empty()) return;
    std::string msg = "invalid configuration";
    for (const auto& v : list) msg += "\n  " + v;
    throw Error(ErrorKind::Schema, "cli", msg);
  }
};

enum class Kind { Number, Integer, String, Bool, NumberList, IntegerList, StringList };

struct Field {
  const char* key;
  Kind kind;
  OJson fallback;  // null: required unless `optional`
  bool optional = false;
  double min = -std::numeric_limits<double>::infinity();
  bool min_exclusive = false;
  std::vector<std::string> choices = {};
};

inline bool kind_matches(const OJson& v, Kind k) {
  switch (k) {
    case Kind::Number: return v.is_number();
    case Kind::Integer: return v.is_number_integer();
    case Kind::String: return v.is_string();
    case Kind::Bool: return v.is_boolean();
    case Kind::NumberList:
      if (!v.is_array()) return false;
      for (const auto& e : v)
        if (!e.is_number()) return false;
      return true;
    case Kind::IntegerList:
      if (!v.is_array()) return false;
      for (const auto& e : v)
        if (!e.is_number_integer()) return false;
      return true;
    case Kind::StringList:
      if (!v.is_array()) return false;
      for (const auto& e : v)
        if (!e.is_string()) return false;
      return true;
  }
  return false;
}

inline const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Number: return "a number";
    case Kind::Integer: return "an integer";
    case Kind::String: return "a string";
    case Kind::Bool: return "a boolean";
    case Kind::NumberList: return "a list of numbers";
    case Kind::IntegerList: return "a list of integers";
    default: return "a list of strings";
  }
}

/// Validates `in` against the fields and returns the normalised object with defaults filled
/// in, in field order. Keys not in the schema are violations.
inline OJson apply_schema(const OJson& in, const std::vector<Field>& fields, const std::string& path, Violations& v) {
  OJson out = OJson::object();
  if (!in.is_object()) {
    v.add(path, "must be an object");
    return out;
  }
  for (const auto& [key, _] : in.items()) {
    bool known = false;
    for (const auto& f : fields) known = known || key == f.key;
    if (!known) v.add(path + "/" + key, "unknown parameter");
  }
  for (const auto& f : fields) {
    const std::string p = path + "/" + f.key;
    if (!in.contains(f.key) || in.at(f.key).is_null()) {
      if (!f.fallback.is_null()) out[f.key] = f.fallback;
      else if (f.optional) out[f.key] = nullptr;
      else v.add(p, "missing required parameter");
      continue;
    }
    const OJson& val = in.at(f.key);
    if (!kind_matches(val, f.kind)) {
      v.add(p, std::string("must be ") + kind_name(f.kind));
      continue;
    }
    auto check_min = [&](double x, const std::string& where) {
      if (!std::isfinite(x)) v.add(where, "must be finite");
      else if (f.min_exclusive ? !(x > f.min) : !(x >= f.min))
        v.add(where, std::string("must be ") + (f.min_exclusive ? "> " : ">= ") + std::to_string(f.min));
    };
    if (f.kind == Kind::Number || f.kind == Kind::Integer) check_min(val.get<double>(), p);
    if (f.kind == Kind::NumberList || f.kind == Kind::IntegerList)
      for (std::size_t i = 0; i < val.size(); ++i) check_min(val[i].get<double>(), p + "/" + std::to_string(i));
    if (!f.choices.empty()) {
      auto check_choice = [&](const OJson& s, const std::string& where) {
        for (const auto& c : f.choices)
          if (s.get<std::string>() == c) return;
        std::string all;
        for (const auto& c : f.choices) all += (all.empty() ? "" : ", ") + c;
        v.add(where, "must be one of " + all);
      };
      if (f.kind == Kind::StringList)
        for (std::size_t i = 0; i < val.size(); ++i) check_choice(val[i], p + "/" + std::to_string(i));
      else check_choice(val, p);
    }
    out[f.key] = val;
  }
  return out;
}

inline constexpr double ninf = -std::numeric_limits<double>::infinity();

inline std::vector<Field> profile_fields(bool rotational) {
  return {
      {"start", Kind::String, rotational ? "axis" : "point", false, ninf, false, {"axis", "point"}},
      {"z0", Kind::Number, 0.0},
      {"x0", Kind::Number, 0.0},
      {"theta0", Kind::Number, 0.0},
      {"s_min", Kind::Number, 0.0},
      {"s_max", Kind::Number, nullptr, false, 0.0, true},
      {"step", Kind::Number, nullptr, false, 0.0, true},
  };
}

inline std::vector<Field> graph_fields() {
  return {
      {"domain", Kind::NumberList, OJson::array({-1.0, 1.0, -1.0, 1.0})},
      {"h", Kind::Number, nullptr, false, 0.0, true},
      {"boundary", Kind::String, "rotational_profile", false, ninf, false, {"zero", "rotational_profile"}},
      {"profile_z0", Kind::Number, 0.0},
      {"profile_step", Kind::Number, 1e-3, false, 0.0, true},
      {"initial_guess", Kind::String, "paraboloid", false, ninf, false, {"zero", "paraboloid"}},
      {"paraboloid_a", Kind::Number, 0.25},
      {"tol_residual", Kind::Number, 1e-10, false, 0.0, true},
      {"max_iters", Kind::Integer, 50, false, 1.0},
      {"damping", Kind::Number, 1.0, false, 0.0, true},
  };
}

inline OJson surface_schema(const OJson& in, const std::string& path, Violations& v) {
  if (!in.is_object() || !in.contains("kind") || !in.at("kind").is_string()) {
    v.add(path + "/kind", "missing surface kind (rotational, translation or graph)");
    return OJson::object();
  }
  const std::string kind = in.at("kind").get<std::string>();
  OJson rest = in;
  rest.erase("kind");
  OJson out;
  if (kind == "rotational" || kind == "translation") out = apply_schema(rest, profile_fields(kind == "rotational"), path, v);
  else if (kind == "graph") out = apply_schema(rest, graph_fields(), path, v);
  else {
    v.add(path + "/kind", "must be one of rotational, translation, graph");
    return OJson::object();
  }
  OJson full = OJson::object();
  full["kind"] = kind;
  for (const auto& [k, val] : out.items()) full[k] = val;
  return full;
}

inline OJson command_schema(Command c, const OJson& in, Violations& v) {
  const std::string path = "/command_params";
  auto with_surface = [&](std::vector<Field> fields) {
    OJson rest = in.is_object() ? in : OJson::object();
    OJson surf = rest.contains("surface") ? rest.at("surface") : OJson();
    rest.erase("surface");
    OJson out = OJson::object();
    out["surface"] = surface_schema(surf, path + "/surface", v);
    const OJson checked = apply_schema(rest, fields, path, v);
    for (const auto& [k, val] : checked.items()) out[k] = val;
    return out;
  };
  switch (c) {
    case Command::PotentialCheck:
      return apply_schema(in, {{"z_lo", Kind::Number, nullptr}, {"z_hi", Kind::Number, nullptr},
                               {"samples", Kind::Integer, 2001, false, 2.0}}, path, v);
    case Command::SolveRotational: return apply_schema(in, profile_fields(true), path, v);
    case Command::SolveTranslation: return apply_schema(in, profile_fields(false), path, v);
    case Command::SolveGraph: return apply_schema(in, graph_fields(), path, v);
    case Command::AuditFundamental:
      return with_surface({{"items", Kind::IntegerList, OJson::array({1, 2, 3, 4, 5, 6, 7, 8}), false, 1.0},
                           {"tolerance", Kind::Number, nullptr, true, 0.0}});
    case Command::AuditStability:
      return with_surface({{"margin", Kind::Integer, 1, false, 1.0},
                           {"tolerance", Kind::Number, 1e-6, false, 0.0},
                           {"trials", Kind::Integer, 32, false, 0.0},
                           {"ruling_length", Kind::Number, nullptr, true, 0.0, true}});
    case Command::AuditArea:
      return with_surface({{"center", Kind::Integer, nullptr, true, 0.0},
                           {"rho", Kind::Number, nullptr, false, 0.0, true},
                           {"gamma", Kind::Number, nullptr, true}});
    case Command::AuditMonotonicity:
      return with_surface({{"center", Kind::NumberList, nullptr, true},
                           {"radii", Kind::NumberList, nullptr, true, 0.0, true},
                           {"r_min", Kind::Number, 0.05, false, 0.0, true},
                           {"r_max", Kind::Number, 0.5, false, 0.0, true},
                           {"count", Kind::Integer, 20, false, 1.0},
                           {"depth", Kind::Integer, 4, false, 0.0}});
    case Command::AuditCurvatureRatio: return with_surface({});
    case Command::AuditConvexity:
      return with_surface({{"tolerance", Kind::Number, nullptr, true, 0.0},
                           {"omori", Kind::Bool, false},
                           {"omori_threshold", Kind::Number, 2.0, false, 0.0, true}});
    case Command::Blowup:
      return with_surface({{"model", Kind::String, "Plane", false, ninf, false, {"Plane", "GrimReaper", "Bowl"}},
                           {"scales", Kind::NumberList, nullptr, false, 0.0, true},
                           {"heights", Kind::NumberList, nullptr, true},
                           {"indices", Kind::IntegerList, nullptr, true, 0.0}});
    case Command::Export:
      return with_surface({{"formats", Kind::StringList, OJson::array({"csv", "obj", "json"}), false, ninf, false,
                            {"csv", "obj", "json"}}});
  }
  return OJson::object();
}

}  // namespace detail

/// Potential from either {"family": "Linear", "slope": 1, ...} or {"family": {"Linear": {"slope": 1}}, ...}.
inline PotentialSpec parse_potential(const nlohmann::ordered_json& j, const std::string& path, detail::Violations& v) {
  using detail::Field;
  using detail::Kind;
  PotentialSpec spec;
  if (!j.is_object() || !j.contains("family")) {
    v.add(path + "/family", "missing potential family");
    return spec;
  }
  nlohmann::ordered_json params = j;
  params.erase("family");
  std::string family;
  std::string ppath = path;
  const auto& fam = j.at("family");
  if (fam.is_string()) {
    family = fam.get<std::string>();
  } else if (fam.is_object() && fam.size() == 1) {
    family = fam.begin().key();
    for (const auto& [k, val] : fam.begin().value().items()) params[k] = val;
    ppath = path + "/family/" + family;
  } else {
    v.add(path + "/family", "must be a family name or a single-key object");
    return spec;
  }
  std::vector<Field> fields;
  if (family == "Constant") fields = {{"c0", Kind::Number, 0.0}};
  else if (family == "Linear") fields = {{"slope", Kind::Number, nullptr}};
  else if (family == "Quadratic") fields = {{"Lambda", Kind::Number, nullptr, false, 0.0}, {"beta", Kind::Number, nullptr}};
  else if (family == "LogPower") fields = {{"a", Kind::Number, nullptr}};
  else if (family == "Series")
    fields = {{"Lambda", Kind::Number, nullptr, false, 0.0}, {"beta", Kind::Number, nullptr},
              {"coeffs", Kind::NumberList, nlohmann::ordered_json::array()}, {"u0", Kind::Number, nullptr}};
  else {
    v.add(path + "/family", "unknown family " + family);
    return spec;
  }
  fields.push_back({"alpha", Kind::Number, nullptr, true});
  fields.push_back({"label", Kind::String, nullptr, true});
  fields.push_back({"offset", Kind::Number, 0.0});
  const std::size_t before = v.list.size();
  const auto p = detail::apply_schema(params, fields, ppath, v);
  if (v.list.size() != before) return spec;

  if (family == "Constant") spec = PotentialSpec::constant(p["c0"].get<double>());
  else if (family == "Linear") spec = PotentialSpec::linear(p["slope"].get<double>());
  else if (family == "Quadratic") spec = PotentialSpec::quadratic(p["Lambda"].get<double>(), p["beta"].get<double>());
  else if (family == "LogPower") spec = PotentialSpec::log_power(p["a"].get<double>());
  else
    spec = PotentialSpec::series(p["Lambda"].get<double>(), p["beta"].get<double>(),
                                 p["coeffs"].get<std::vector<double>>(), p["u0"].get<double>());
  if (!p["alpha"].is_null()) spec.alpha = p["alpha"].get<double>();
  if (!p["label"].is_null()) spec.label = p["label"].get<std::string>();
  spec.offset = p["offset"].get<double>();
  try {
    spec.validate();
  } catch (const Error& e) {
    v.add(path, e.what());
  }
  return spec;
}

inline nlohmann::ordered_json potential_to_json(const PotentialSpec& s) {
  nlohmann::ordered_json j;
  j["family"] = s.family_name();
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ConstantFamily>) j["c0"] = f.c0;
        else if constexpr (std::is_same_v<F, LinearFamily>) j["slope"] = f.slope;
        else if constexpr (std::is_same_v<F, QuadraticFamily>) {
          j["Lambda"] = f.lambda;
          j["beta"] = f.beta;
        } else if constexpr (std::is_same_v<F, LogPowerFamily>) j["a"] = f.a;
        else {
          j["Lambda"] = f.lambda;
          j["beta"] = f.beta;
          j["coeffs"] = f.coeffs;
          j["u0"] = f.u0;
        }
      },
      s.family);
  if (std::isfinite(s.alpha)) j["alpha"] = s.alpha;
  j["label"] = s.label;
  j["offset"] = s.offset;
  return j;
}

/// Parses and validates a configuration document; parameters come back normalised with
/// defaults filled in.
inline RunConfig parse_config(const std::string& text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, "cli", std::string("malformed JSON: ") + e.what());
  }
  detail::Violations v;
  RunConfig c;
  if (!doc.is_object()) {
    v.add("", "configuration must be a JSON object");
    v.raise();
  }
  for (const auto& [k, _] : doc.items())
    if (k != "potential" && k != "command" && k != "command_params" && k != "output_dir" && k != "seed")
      v.add("/" + k, "unknown key");
  if (doc.contains("potential")) c.potential = parse_potential(doc["potential"], "/potential", v);
  else v.add("/potential", "missing");
  bool have_command = false;
  if (!doc.contains("command") || !doc["command"].is_string()) v.add("/command", "missing command name");
  else if (auto cmd = command_from_string(doc["command"].get<std::string>())) {
    c.command = *cmd;
    have_command = true;
  } else v.add("/command", "unknown command " + doc["command"].get<std::string>());
  if (have_command)
    c.params = detail::command_schema(c.command, doc.contains("command_params") ? doc["command_params"]
                                                                              : nlohmann::ordered_json::object(), v);
  if (doc.contains("output_dir")) {
    if (doc["output_dir"].is_string()) c.output_dir = doc["output_dir"].get<std::string>();
    else v.add("/output_dir", "must be a string");
  }
  if (doc.contains("seed")) {
    if (doc["seed"].is_number_unsigned()) c.seed = doc["seed"].get<std::uint64_t>();
    else v.add("/seed", "must be a non-negative integer");
  }
  v.raise();
  return c;
}

inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["potential"] = potential_to_json(c.potential);
  j["command"] = to_string(c.command);
  j["command_params"] = c.params;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  return j;
}

inline std::string serialize_config(const RunConfig& c) { return config_to_json(c).dump(2) + '\n'; }

}  // namespace phimin
