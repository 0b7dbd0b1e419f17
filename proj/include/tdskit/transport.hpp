#pragma once

#include <algorithm>
#include <cmath>

#include "tdskit/params.hpp"

namespace tds {

// Scalar physics kernels shared by the solver, the data generator and the
// swarm fitter. All functions are pure and safe to call concurrently.

/// Sample temperature at time t: constant T_min during the rest period, then
/// a linear ramp at phi K/s, clamped at T_max where the test ends.
inline double temperature_at(double t, const TestParams& test) {
    const double ramp_time = std::max(t - test.t_rest, 0.0);
    return std::min(test.T_min + test.phi * ramp_time, test.T_max);
}

/// Arrhenius lattice diffusivity D = D0 exp(-E_L / RT) [m^2/s].
inline double lattice_diffusivity(double T, const MaterialParams& mat) {
    return mat.D0 * std::exp(-mat.E_L / (constants::gas_constant * T));
}

/// Capture rate k = nu_t exp(-E_t / RT) [1/s]: lattice hydrogen jumping into
/// an empty trap site.
inline double trap_rate_k(double T, const TrapSpec& trap) {
    return trap.nu_t * std::exp(-trap.E_t / (constants::gas_constant * T));
}

/// Release rate p = nu_d exp(-E_d / RT) [1/s]: trapped hydrogen escaping back
/// to the lattice.
inline double trap_rate_p(double T, const TrapSpec& trap) {
    return trap.nu_d * std::exp(-trap.detrap_energy() / (constants::gas_constant * T));
}

/// Trap/lattice equilibrium constant K_T = k/p = (nu_t/nu_d) exp(-dH / RT).
inline double equilibrium_constant(double T, const TrapSpec& trap) {
    return (trap.nu_t / trap.nu_d) *
           std::exp(-trap.delta_H / (constants::gas_constant * T));
}

/// Trap occupancy in equilibrium with a lattice occupancy theta_L:
///   theta_T = K theta_L / (1 + (K - 1) theta_L).
/// Maps [0,1] onto [0,1] and is monotone in both arguments.
inline double equilibrium_trap_occupancy(double theta_L, double K_T) {
    return K_T * theta_L / (1.0 + (K_T - 1.0) * theta_L);
}

/// Hydrogen concentration [mol/m^3] to weight parts per million of metal.
/// With rho_M in g/cm^3 the 1e6 ppm factor cancels the g/cm^3 -> g/m^3 one.
inline double concentration_to_wppm(double C, const MaterialParams& mat) {
    return C * constants::molar_mass_h / mat.rho_M;
}

/// Inverse of concentration_to_wppm.
inline double wppm_to_concentration(double wppm, const MaterialParams& mat) {
    return wppm * mat.rho_M / constants::molar_mass_h;
}

}  // namespace tds
