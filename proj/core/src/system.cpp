#include "tdae/system.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "tdae/error.hpp"

namespace tdae {

const char* to_string(SystemKind k) {
  switch (k) {
    case SystemKind::five_level: return "five_level";
    case SystemKind::raman: return "raman";
    case SystemKind::double_raman: return "double_raman";
    case SystemKind::bragg: return "bragg";
    case SystemKind::double_bragg: return "double_bragg";
  }
  return "?";
}

SystemKind system_kind_from_string(const std::string& s) {
  for (auto k : {SystemKind::five_level, SystemKind::raman, SystemKind::double_raman, SystemKind::bragg,
                 SystemKind::double_bragg})
    if (s == to_string(k)) return k;
  throw ConfigError("kind", "unknown system kind '" + s + "'");
}

double AtomConstants::level(const std::string& name) const {
  for (const auto& [l, w] : levels)
    if (l == name) return w;
  throw ConfigError("levels." + name, "level not defined for " + label);
}

bool AtomConstants::has_level(const std::string& name) const {
  for (const auto& lv : levels)
    if (lv.first == name) return true;
  return false;
}

AtomConstants parse_atom_preset(const std::string& json_text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(json_text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("preset", e.what());
  }
  AtomConstants c;
  if (!j.is_object()) throw ConfigError("preset", "expected an object");
  if (!j.contains("label") || !j["label"].is_string()) throw ConfigError("label", "missing or not a string");
  c.label = j["label"].get<std::string>();
  if (!j.contains("mass_kg") || !j["mass_kg"].is_number()) throw ConfigError("mass_kg", "missing or not a number");
  c.mass_kg = j["mass_kg"].get<double>();
  if (!(c.mass_kg > 0.0)) throw ConfigError("mass_kg", "must be positive");
  if (!j.contains("levels") || !j["levels"].is_object() || j["levels"].empty())
    throw ConfigError("levels", "missing or empty object");
  for (const auto& [name, v] : j["levels"].items()) {
    if (!v.is_number()) throw ConfigError("levels." + name, "not a number (rad/s)");
    c.levels.emplace_back(name, v.get<double>());
  }
  if (j.contains("provenance")) {
    if (!j["provenance"].is_object()) throw ConfigError("provenance", "expected an object");
    for (const auto& [k, v] : j["provenance"].items())
      c.provenance[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  return c;
}

AtomConstants load_atom_preset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open preset " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_atom_preset(ss.str());
}

double SystemSpec::coupling_detuning(std::size_t v, double p) const {
  if (auto it = detuning_override.find(v); it != detuning_override.end()) return it->second(p);
  const Coupling& c = couplings.at(v);
  double g = diag(c.ancilla) - diag(c.level) - c.omega;
  if (com) g += doppler(c.kappa, p) + recoil(c.kappa);
  return g;
}

std::vector<Site> SystemSpec::seeds(const std::string& level) const { return {Site{space.index(level), 0}}; }

}  // namespace tdae
