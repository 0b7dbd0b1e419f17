#pragma once

#include <stdexcept>
#include <string>

#include "tdskit/constants.hpp"

namespace tds {

/// Lattice-scale material properties. Defaults describe a bcc iron lattice.
///
/// All energies are stored in J/mol; converting user-facing kJ/mol happens at
/// the configuration boundary, never here.
struct MaterialParams {
    double D0 = 7.23e-8;    // pre-exponential diffusivity [m^2/s]
    double E_L = 5690.0;    // lattice activation energy [J/mol]
    double N_L = 5.1e29;    // interstitial lattice site density [sites/m^3]
    double C_L0 = 0.06;     // initial lattice hydrogen concentration [mol/m^3]
    double M_M = 55.847;    // metal molar mass [g/mol]
    double rho_M = 7.847;   // metal density [g/cm^3]
    double nu = 1e13;       // jump frequency for trapping kinetics [1/s]

    /// Initial lattice occupancy theta_L0 = C_L0 * N_A / N_L.
    double initial_lattice_occupancy() const { return C_L0 * constants::avogadro / N_L; }

    void validate() const {
        if (D0 <= 0.0) throw std::invalid_argument("MaterialParams: D0 must be positive");
        if (E_L < 0.0) throw std::invalid_argument("MaterialParams: E_L must be non-negative");
        if (N_L <= 0.0) throw std::invalid_argument("MaterialParams: N_L must be positive");
        if (C_L0 < 0.0) throw std::invalid_argument("MaterialParams: C_L0 must be non-negative");
        if (M_M <= 0.0) throw std::invalid_argument("MaterialParams: M_M must be positive");
        if (rho_M <= 0.0) throw std::invalid_argument("MaterialParams: rho_M must be positive");
        if (nu <= 0.0) throw std::invalid_argument("MaterialParams: nu must be positive");
        if (initial_lattice_occupancy() >= 1.0) {
            throw std::invalid_argument(
                "MaterialParams: initial lattice occupancy C_L0*N_A/N_L must be below 1");
        }
    }
};

/// One trap population. The binding energy is negative by convention; deeper
/// (more negative) traps hold on to hydrogen until higher temperatures.
struct TrapSpec {
    double delta_H;   // binding energy [J/mol], strictly negative
    double N_T;       // trap site density [sites/m^3]
    double E_t;       // capture activation energy [J/mol]
    double nu_t;      // capture attempt frequency [1/s]
    double nu_d;      // release attempt frequency [1/s]

    /// Release barrier E_d = E_t - delta_H (> E_t for a binding trap).
    double detrap_energy() const { return E_t - delta_H; }

    /// Common construction: capture barrier equal to the lattice activation
    /// energy, both attempt frequencies equal to the material jump frequency.
    static TrapSpec with_material_defaults(double delta_H, double N_T,
                                           const MaterialParams& mat) {
        return TrapSpec{delta_H, N_T, mat.E_L, mat.nu, mat.nu};
    }

    void validate() const {
        if (!(delta_H < 0.0)) throw std::invalid_argument("TrapSpec: delta_H must be negative");
        if (N_T <= 0.0) throw std::invalid_argument("TrapSpec: N_T must be positive");
        if (E_t < 0.0) throw std::invalid_argument("TrapSpec: E_t must be non-negative");
        if (nu_t <= 0.0 || nu_d <= 0.0) {
            throw std::invalid_argument("TrapSpec: attempt frequencies must be positive");
        }
    }
};

/// Desorption test protocol: hold at T_min for t_rest, then ramp at phi K/s
/// from T_min to T_max.
struct TestParams {
    double L;        // sample thickness [m]
    double t_rest;   // rest time before the ramp [s]
    double phi;      // heating rate [K/s]
    double T_min;    // K
    double T_max;    // K

    double ramp_duration() const { return (T_max - T_min) / phi; }

    void validate() const {
        if (L <= 0.0) throw std::invalid_argument("TestParams: L must be positive");
        if (t_rest < 0.0) throw std::invalid_argument("TestParams: t_rest must be non-negative");
        if (phi <= 0.0) throw std::invalid_argument("TestParams: phi must be positive");
        if (!(T_max > T_min) || T_min <= 0.0) {
            throw std::invalid_argument("TestParams: need 0 < T_min < T_max");
        }
    }
};

}  // namespace tds
