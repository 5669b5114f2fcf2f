#pragma once

#include <map>
#include <string>
#include <vector>

#include "tdae/elimination.hpp"
#include "tdae/hilbert.hpp"
#include "tdae/system.hpp"

namespace tdae {

enum class Verdict { pass, warn, fail };
const char* to_string(Verdict v);

struct ValidityReport {
  double gamma_star = 0.0;
  double epsilon_max = 0.0;
  double smoothness = 0.0;
  double coupling_ratio = 0.0;
  double bound_value = 0.0;
  double coupling_norm = 0.0;    // sup_t ||Omega(t)||
  double derivative_norm = 0.0;  // sup_t ||dOmega/dt||
  Verdict verdict = Verdict::fail;
  std::string support;
  std::vector<std::string> notes;
};

inline constexpr double validity_warn_threshold = 0.1;

// Seeds default to every relevant level at ladder index 0.
ValidityReport validity_report(const SystemSpec& spec, double t0, double t, std::vector<Site> seeds = {});

enum class SMode { closed, quadrature };
const char* to_string(SMode m);
SMode s_mode_from_string(const std::string& s);

struct EffectiveOptions {
  int order = 1;
  SMode s_mode = SMode::closed;
  bool rwa = false;
  double quad_tol = 1e-12;
  ProjectorOptions projector;
};

struct EffectiveTerm {
  LevelId row = 0;
  LevelId col = 0;
  std::int64_t shift = 0;
  LevelId ancilla = 0;
  std::size_t coupling_row = 0;  // u: conjugated envelope
  std::size_t coupling_col = 0;  // v: direct envelope, sets the detuning
  double phase_omega = 0.0;      // coefficient carries exp(-i phase_omega t)
};

struct EffectiveHamiltonian {
  int order = 1;
  BlockOperator block;
  std::vector<LevelId> levels;
  ValidityReport validity;
  std::vector<EffectiveTerm> terms;
  double rwa_ratio_max = 0.0;
  std::map<std::string, std::string> metadata;
};

EffectiveHamiltonian effective_hamiltonian(const SystemSpec& spec, const EffectiveOptions& opt = {});

// Effective matrix Delta + Omega^dag sum P_l of a finite system, evaluated at t.
Matrix effective_matrix(const SystemSpec& spec, int order, double t, bool constant_omega,
                        const ProjectorOptions& opt = {});

}  // namespace tdae
