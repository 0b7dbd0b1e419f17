#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdskit/params.hpp"
#include "tdskit/spectrum.hpp"

namespace tds {

/// Trap kinetics treatment inside the solver.
///   McNabbFoster: finite capture/release rates, trapped concentrations are
///                 degrees of freedom.
///   Oriani:       instantaneous trap/lattice equilibrium, traps collapse
///                 into an algebraic function of the lattice occupancy.
enum class ModelVariant { McNabbFoster, Oriani };

struct NumericalParams {
    int n_elements = 25;     // uniform linear elements on the half thickness
    int ntp = 64;            // recorded flux samples over the ramp
    int f = 10;              // solver time steps per recorded sample
    double penalty_k = 8e5;  // boundary penalty rate [mol/(m^2 s)]
    double E_bc = 1.71e4;    // penalty scaling energy [J/mol]
    double newton_tol_rel = 1e-10;  // residual drop relative to the first iterate
    double newton_tol_abs = 1e-14;  // absolute residual floor
    int newton_max_iter = 25;
    int max_dt_halvings = 5;  // rescue attempts before giving up on a step
    bool record_rest = false; // keep a (time, flux) trace of the rest phase

    void validate() const {
        if (n_elements < 2) throw std::invalid_argument("NumericalParams: n_elements >= 2");
        if (ntp < 2) throw std::invalid_argument("NumericalParams: ntp >= 2");
        if (f < 1) throw std::invalid_argument("NumericalParams: f >= 1");
        if (penalty_k <= 0.0) throw std::invalid_argument("NumericalParams: penalty_k > 0");
        if (E_bc < 0.0) throw std::invalid_argument("NumericalParams: E_bc >= 0");
        if (newton_max_iter < 1) throw std::invalid_argument("NumericalParams: newton_max_iter >= 1");
    }
};

/// Raised when Newton fails to converge even after the time step has been
/// halved max_dt_halvings times. sample_index is the recorded-sample interval
/// being advanced (-1 during the rest phase).
struct NonConvergenceError : std::runtime_error {
    NonConvergenceError(const std::string& msg, int sample_index_, int iterations_)
        : std::runtime_error(msg), sample_index(sample_index_), iterations(iterations_) {}
    int sample_index;
    int iterations;
};

/// Nodal unknowns on the half domain [0, L/2]; x = 0 is the symmetry plane,
/// the last node carries the penalty boundary.
struct SolverState {
    double t = 0.0;
    Eigen::VectorXd c_L;               // lattice concentration [mol/m^3], one per node
    std::vector<Eigen::VectorXd> c_T;  // trapped concentration per trap (kinetic variant only)
};

/// Uniform concentration C_L0 everywhere; for the kinetic variant the traps
/// start in equilibrium with the lattice at T_min. Rejects saturated initial
/// occupancies.
SolverState initialize_state(const MaterialParams& mat, const std::vector<TrapSpec>& traps,
                             const TestParams& test, const NumericalParams& np,
                             ModelVariant variant);

/// Penalty outflux j = penalty_k * theta_L * exp(-E_bc / RT) [mol/(m^2 s)].
/// This is also the quantity recorded in the spectrum.
double boundary_flux(double theta_L_boundary, double T, const NumericalParams& np);

struct StepReport {
    int newton_iterations = 0;
    int clip_events = 0;
    double residual_norm = 0.0;
    double flux = 0.0;          // boundary flux at the end of the step
    double lattice_rate = 0.0;  // d/dt of half-domain lattice inventory [mol/(m^2 s)]
    Eigen::VectorXd trap_release_rate;  // -d/dt of per-trap inventory [mol/(m^2 s)]
};

/// One backward-Euler step of length dt from the current state. Temperature
/// is evaluated from the protocol at the end of the step. Trap equations are
/// integrated with lumped (row-sum) quadrature and condensed node-by-node
/// into the lattice system, which is solved by Newton with an analytic
/// tridiagonal Jacobian. Throws NonConvergenceError (sample_index = -1) when
/// the iteration cap is hit.
StepReport step(SolverState& state, double dt, ModelVariant variant, const MaterialParams& mat,
                const std::vector<TrapSpec>& traps, const TestParams& test,
                const NumericalParams& np);

struct SimulationResult {
    Spectrum spectrum;
    Eigen::VectorXd recorded_times;  // s, aligned with the spectrum rows
    Eigen::VectorXd lattice_rates;   // d/dt lattice inventory at each recorded sample

    // Inventory bookkeeping, per unit area of the one free surface of the
    // half domain. Together these close the hydrogen balance.
    double initial_inventory = 0.0;   // mol/m^2
    double residual_inventory = 0.0;  // mol/m^2 left at the end of the ramp
    double desorbed_rest = 0.0;       // step-exact outflux integral over the rest phase
    double desorbed_tail = 0.0;       // same, over ramp time past the last recorded sample

    std::vector<double> rest_times;   // populated when np.record_rest
    std::vector<double> rest_fluxes;

    int clip_events = 0;              // nodes clipped back into physical bounds
    long newton_iterations_total = 0;
    long steps_taken = 0;
    SolverState final_state;
};

/// Full protocol: rest phase, then heating ramp with dt = t_test / (ntp * f).
/// Records ntp samples starting at ramp onset, spaced f steps apart; per-trap
/// contribution columns hold the half-domain-integrated release rate of each
/// trap so that flux = -lattice_rate + sum of contributions at every sample.
SimulationResult simulate_tds(const MaterialParams& mat, const std::vector<TrapSpec>& traps,
                              const TestParams& test, const NumericalParams& np,
                              ModelVariant variant);

/// Relative hydrogen imbalance of a finished run: initial inventory versus
/// time-integrated desorption (trapezoid over the recorded spectrum, plus the
/// step-exact rest and tail integrals) plus residual inventory.
double mass_audit(const SimulationResult& result);

/// Half-domain hydrogen inventory [mol/m^2] of a state (lattice plus traps;
/// equilibrium traps are evaluated at the state's protocol temperature).
double half_domain_inventory(const SolverState& state, const MaterialParams& mat,
                             const std::vector<TrapSpec>& traps, const TestParams& test,
                             const NumericalParams& np, ModelVariant variant);

}  // namespace tds
