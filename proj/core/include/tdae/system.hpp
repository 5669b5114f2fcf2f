#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tdae/hilbert.hpp"
#include "tdae/pulses.hpp"
#include "tdae/types.hpp"

namespace tdae {

enum class SystemKind { five_level, raman, double_raman, bragg, double_bragg };

const char* to_string(SystemKind k);
SystemKind system_kind_from_string(const std::string& s);

struct AtomConstants {
  std::string label;
  double mass_kg = 0.0;
  std::vector<std::pair<std::string, double>> levels;  // rad/s
  std::map<std::string, std::string> provenance;

  double level(const std::string& name) const;
  bool has_level(const std::string& name) const;
};

AtomConstants load_atom_preset(const std::filesystem::path& path);
AtomConstants parse_atom_preset(const std::string& json_text);

struct LaserSpec {
  std::string name;
  double k = 0.0;      // rad/m, sign gives the direction
  double omega = 0.0;  // rad/s
  PulseShape envelope;
  std::string lower;  // retained level
  std::string upper;  // eliminated level
  cplx factor{1.0, 0.0};
};

// One term of the Omega block: ancilla <- level with envelope(t) * factor * exp(i k x) * exp(-i omega t).
struct Coupling {
  LevelId ancilla = 0;
  LevelId level = 0;
  PulseShape envelope;
  cplx factor{1.0, 0.0};
  std::int64_t steps = 0;
  double kappa = 0.0;  // k / k_ref
  double omega = 0.0;  // residual frequency in the chosen frame
  std::string laser;
};

enum class DetuningConvention { derived, as_published };

struct SystemSpec {
  SystemKind kind = SystemKind::five_level;
  std::string name;
  AtomConstants constants;
  std::vector<LaserSpec> lasers;
  InternalSpace space;
  std::vector<double> frame;  // interaction-picture frequency added to each level
  std::vector<Coupling> couplings;
  bool com = false;
  MomentumLadder ladder;
  double commensuration_residual = 0.0;
  double t0 = 0.0;
  double t_end = 0.0;
  DetuningConvention convention = DetuningConvention::derived;
  // optional replacement of the derived detuning of a column coupling (index into couplings)
  std::map<std::size_t, std::function<double(double p)>> detuning_override;

  double diag(LevelId l) const { return space.level(l).omega + frame[static_cast<std::size_t>(l)]; }
  double level_energy(LevelId l, double p) const { return diag(l) + (com ? ladder.kinetic(p) : 0.0); }
  // xi_b(p + kappa_v) - delta_j(p) - omega_v: the detuning that enters S for column coupling v
  double coupling_detuning(std::size_t v, double p) const;
  double doppler(double kappa, double p) const { return 2.0 * ladder.omega_ref * kappa * p; }
  double recoil(double kappa) const { return ladder.omega_ref * kappa * kappa; }
  std::vector<Site> seeds(const std::string& level) const;
};

}  // namespace tdae
