#pragma once

#include <cstdint>
#include <vector>

#include "tdskit/fem.hpp"

namespace tds {

/// Global-best particle swarm settings. Each trap contributes two search
/// dimensions: |delta_H| (linear) and N_T (log10, so densities move
/// multiplicatively).
struct PsoConfig {
    int swarm_size = 40;
    int iterations = 200;
    double inertia = 0.729;
    double cognitive = 1.49445;
    double social = 1.49445;
    int n_traps = 1;            // fixed by the caller
    double energy_min = 50e3;   // |delta_H| bounds [J/mol]
    double energy_max = 150e3;
    double density_min = 6.022e22;  // N_T bounds [sites/m^3]
    double density_max = 6.022e24;
    std::uint64_t seed = 0;

    void validate() const;
};

struct FitResult {
    std::vector<TrapSpec> best_traps;  // ascending |delta_H|
    double best_objective = 0.0;
    Eigen::VectorXd objective_trace;   // global best after init and each iteration
    long failed_evaluations = 0;       // candidates whose simulation failed
};

/// Fit quality of a candidate trap set against a target spectrum: mean
/// squared difference of log10-floored fluxes on the solver's output grid,
/// the same feature space the networks see.
double pso_objective(const std::vector<TrapSpec>& candidate,
                     const Eigen::VectorXd& target_log_flux, const MaterialParams& mat,
                     const TestParams& test, const NumericalParams& np, ModelVariant variant);

/// Convenience overload taking the raw target spectrum.
double pso_objective(const std::vector<TrapSpec>& candidate, const Spectrum& target,
                     const MaterialParams& mat, const TestParams& test,
                     const NumericalParams& np, ModelVariant variant);

/// Global-best PSO over 2*n_traps dimensions. The target must be sampled on
/// the solver grid implied by (test, np). Candidate evaluations within an
/// iteration run in parallel; failed simulations score +infinity. Fully
/// deterministic for a fixed seed.
FitResult pso_fit(const Spectrum& target, const PsoConfig& cfg, const MaterialParams& mat,
                  const TestParams& test, const NumericalParams& np, ModelVariant variant,
                  int threads = 1);

}  // namespace tds
