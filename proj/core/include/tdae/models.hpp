#pragma once

#include <optional>
#include <vector>

#include "tdae/hilbert.hpp"
#include "tdae/system.hpp"

namespace tdae {

struct ComOptions {
  double k_ref = 0.0;  // 0 selects |k_2 - k_1| of the first two lasers
  std::vector<double> base_momenta{0.0};
  std::int64_t window_kicks = 8;
  double commensuration_tol = 1e-9;
  std::optional<double> energy_reference;
  double horizon = 0.0;
};

struct FiveLevelParams {
  double omega_g = -4.1;
  double omega_m = -4.0;
  double omega_e = 8.0;
  double omega_a1 = 22.0;
  double omega_a2 = 23.0;
  Eigen::Matrix<double, 2, 3> coupling = (Eigen::Matrix<double, 2, 3>() << 1.5, 1.5, 1.5, 1.0, 1.0, 1.0).finished();
  double horizon = 1.0;
};

SystemSpec five_level_system(const FiveLevelParams& prm = {});
SystemSpec raman_system(const AtomConstants& constants, const LaserSpec& laser1, const LaserSpec& laser2,
                        const ComOptions& com = {});
SystemSpec double_raman_system(const AtomConstants& constants, const std::vector<LaserSpec>& lasers,
                               const ComOptions& com = {},
                               DetuningConvention convention = DetuningConvention::derived);
SystemSpec bragg_system(const AtomConstants& constants, const LaserSpec& laser1, const LaserSpec& laser2,
                        const ComOptions& com = {});
SystemSpec double_bragg_system(const AtomConstants& constants, const std::vector<LaserSpec>& lasers,
                               const ComOptions& com = {});

BlockOperator full_hamiltonian(const SystemSpec& spec);

// Same Hamiltonian written in another diagonal frame (frame frequencies replaced).
SystemSpec with_frame(const SystemSpec& spec, const std::vector<double>& frame);

std::shared_ptr<const LadderBasis> full_basis(const SystemSpec& spec, const std::vector<Site>& seeds);

// Delta / Xi / Omega blocks on one family of a ladder basis (or the finite system).
struct Blocks {
  Matrix delta, xi, omega;
  std::vector<Site> relevant_sites;
  std::vector<Site> ancilla_sites;
};
Blocks blocks_at(const SystemSpec& spec, const LadderBasis& basis, double p0, double t);
// Constant blocks of a system without COM motion (envelopes evaluated at t).
Blocks finite_blocks(const SystemSpec& spec, double t);

struct TwoPhotonInfo {
  double kappa_eff = 0.0;      // (k2 - k1) / k_ref, grid exact
  std::int64_t steps_eff = 0;
  double delta0 = 0.0;         // two-photon detuning without motional terms
  double p_resonant = 0.0;     // momentum of the resonant class (hbar k_ref units)
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double gamma0 = 0.0;
  double doppler_per_p = 0.0;  // nu_eff = doppler_per_p * p
  double recoil_eff = 0.0;
};
// Two-photon bookkeeping of a Raman or Bragg pair; detunings evaluated at p (default: resonant class).
TwoPhotonInfo two_photon(const SystemSpec& spec, std::optional<double> p = std::nullopt);

}  // namespace tdae
