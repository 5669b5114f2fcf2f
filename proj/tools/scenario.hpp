#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tdae/effective.hpp"
#include "tdae/models.hpp"
#include "tdae/propagator.hpp"
#include "tdae/system.hpp"

namespace tdae::scenario {

using json = nlohmann::ordered_json;

struct RunOptions {
  unsigned threads = 1;
  std::uint64_t seed = 0;
  std::optional<double> area;
  std::optional<int> samples;
  std::optional<int> families;
  std::optional<double> omega_scale;
  std::optional<int> order;
  std::optional<std::string> s_mode;
  std::optional<bool> rwa;
  std::filesystem::path base_dir;  // relative paths in a config resolve here
};

json load_config(const std::filesystem::path& path);
json default_config(const std::string& scenario);
std::vector<std::string> scenario_names();
// Built-in atom presets (same content as the files under presets/).
std::string embedded_preset(const std::string& name);

double parse_area(const json& v, const std::string& field);
AtomConstants resolve_atom(const json& atom, const std::filesystem::path& base_dir);
PulseShape parse_pulse(const json& j, const std::string& field, const std::filesystem::path& base_dir);

struct BuiltSystem {
  SystemSpec spec;
  std::optional<TwoPhotonInfo> two_photon;
  double gamma0 = 0.0;       // |gamma0| used for the pulse area
  double omega_eff = 0.0;    // peak of 2 Omega_1 Omega_2 / gamma0
  double resonant_p = 0.0;   // units hbar k_ref
  json meta = json::object();
};

BuiltSystem build_system(const json& cfg, const RunOptions& opt);

struct PulseRun {
  BuiltSystem sys;
  EffectiveHamiltonian eff;
  std::vector<double> times;
  std::vector<double> doppler_over_rabi;  // per family
  std::optional<TrajectoryResult> effective;
  std::optional<TrajectoryResult> full;
  std::vector<double> delta;  // effective vs full on the relevant levels
  IntegratorConfig integrator;
};

PulseRun run_pulse(const json& cfg, const RunOptions& opt);

struct FiveLevelRun {
  SystemSpec spec;
  ValidityReport validity;
  std::vector<double> times;
  TrajectoryResult full;
  std::vector<std::string> method_order;
  std::map<std::string, TrajectoryResult> methods;
  std::map<std::string, std::vector<double>> delta;
  IntegratorConfig integrator;
};

FiveLevelRun run_five_level(const json& cfg, const RunOptions& opt);

ValidityReport run_validity(const json& cfg, const RunOptions& opt);
json validity_json(const ValidityReport& r);

// Writes validity.json, populations*.csv, density.csv, delta.csv and run_meta.json as applicable.
void run_to_directory(const json& cfg, const RunOptions& opt, const std::filesystem::path& out_dir);

int cli_main(int argc, char** argv);

}  // namespace tdae::scenario
