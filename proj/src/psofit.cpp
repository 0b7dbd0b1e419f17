#include "tdskit/psofit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "tdskit/preprocess.hpp"
#include "tdskit/rng.hpp"
#include "tdskit/threading.hpp"

namespace tds {

void PsoConfig::validate() const {
    if (swarm_size < 2) throw std::invalid_argument("PsoConfig: swarm_size >= 2");
    if (iterations < 1) throw std::invalid_argument("PsoConfig: iterations >= 1");
    if (n_traps < 1) throw std::invalid_argument("PsoConfig: n_traps >= 1");
    if (!(energy_max > energy_min && energy_min > 0.0)) {
        throw std::invalid_argument("PsoConfig: energy bounds must be positive and ordered");
    }
    if (!(density_max > density_min && density_min > 0.0)) {
        throw std::invalid_argument("PsoConfig: density bounds must be positive and ordered");
    }
}

double pso_objective(const std::vector<TrapSpec>& candidate,
                     const Eigen::VectorXd& target_log_flux, const MaterialParams& mat,
                     const TestParams& test, const NumericalParams& np, ModelVariant variant) {
    const SimulationResult sim = simulate_tds(mat, candidate, test, np, variant);
    const Eigen::VectorXd logf = log_floor(sim.spectrum.fluxes);
    if (logf.size() != target_log_flux.size()) {
        throw std::invalid_argument("pso_objective: target grid size mismatch");
    }
    return (logf - target_log_flux).array().square().mean();
}

double pso_objective(const std::vector<TrapSpec>& candidate, const Spectrum& target,
                     const MaterialParams& mat, const TestParams& test,
                     const NumericalParams& np, ModelVariant variant) {
    return pso_objective(candidate, log_floor(target.fluxes), mat, test, np, variant);
}

namespace {

std::vector<TrapSpec> decode(const Eigen::VectorXd& x, int k, const MaterialParams& mat) {
    std::vector<TrapSpec> traps;
    traps.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        traps.push_back(
            TrapSpec::with_material_defaults(-x(i), std::pow(10.0, x(k + i)), mat));
    }
    return traps;
}

}  // namespace

FitResult pso_fit(const Spectrum& target, const PsoConfig& cfg, const MaterialParams& mat,
                  const TestParams& test, const NumericalParams& np, ModelVariant variant,
                  int threads) {
    cfg.validate();
    mat.validate();
    test.validate();
    np.validate();
    if (target.size() != np.ntp) {
        throw std::invalid_argument(
            "pso_fit: target has " + std::to_string(target.size()) +
            " samples but the solver records " + std::to_string(np.ntp) +
            "; resample the target onto the solver grid first");
    }
    const Eigen::VectorXd target_logf = log_floor(target.fluxes);

    const int k = cfg.n_traps;
    const int dims = 2 * k;
    Eigen::VectorXd lo(dims), hi(dims);
    for (int i = 0; i < k; ++i) {
        lo(i) = cfg.energy_min;
        hi(i) = cfg.energy_max;
        lo(k + i) = std::log10(cfg.density_min);
        hi(k + i) = std::log10(cfg.density_max);
    }
    const Eigen::VectorXd vmax = 0.5 * (hi - lo);

    rng::Stream stream(cfg.seed, 0x70736fULL, 0);  // "pso"
    std::vector<Eigen::VectorXd> pos(cfg.swarm_size), vel(cfg.swarm_size),
        pbest(cfg.swarm_size);
    std::vector<double> pbest_fit(cfg.swarm_size, std::numeric_limits<double>::infinity());
    std::vector<double> fit(cfg.swarm_size, std::numeric_limits<double>::infinity());
    for (int p = 0; p < cfg.swarm_size; ++p) {
        pos[p].resize(dims);
        vel[p].resize(dims);
        for (int d = 0; d < dims; ++d) {
            pos[p](d) = stream.uniform(lo(d), hi(d));
            vel[p](d) = stream.uniform(-vmax(d), vmax(d));
        }
    }

    std::atomic<long> failures{0};
    auto evaluate_all = [&] {
        parallel_for(cfg.swarm_size, threads, [&](long p) {
            try {
                fit[static_cast<std::size_t>(p)] = pso_objective(
                    decode(pos[static_cast<std::size_t>(p)], k, mat), target_logf, mat, test,
                    np, variant);
            } catch (const NonConvergenceError&) {
                fit[static_cast<std::size_t>(p)] = std::numeric_limits<double>::infinity();
                failures.fetch_add(1);
            }
        });
    };

    FitResult result;
    result.objective_trace.resize(cfg.iterations + 1);

    evaluate_all();
    int gbest = 0;
    for (int p = 0; p < cfg.swarm_size; ++p) {
        pbest[p] = pos[p];
        pbest_fit[p] = fit[p];
        if (fit[p] < fit[gbest]) gbest = p;
    }
    Eigen::VectorXd gbest_pos = pbest[gbest];
    double gbest_fit = pbest_fit[gbest];
    result.objective_trace(0) = gbest_fit;

    for (int it = 1; it <= cfg.iterations; ++it) {
        for (int p = 0; p < cfg.swarm_size; ++p) {
            for (int d = 0; d < dims; ++d) {
                const double r1 = stream.uniform();
                const double r2 = stream.uniform();
                vel[p](d) = cfg.inertia * vel[p](d) +
                            cfg.cognitive * r1 * (pbest[p](d) - pos[p](d)) +
                            cfg.social * r2 * (gbest_pos(d) - pos[p](d));
                vel[p](d) = std::clamp(vel[p](d), -vmax(d), vmax(d));
                pos[p](d) = std::clamp(pos[p](d) + vel[p](d), lo(d), hi(d));
            }
        }
        evaluate_all();
        for (int p = 0; p < cfg.swarm_size; ++p) {
            if (fit[p] < pbest_fit[p]) {
                pbest_fit[p] = fit[p];
                pbest[p] = pos[p];
            }
            if (fit[p] < gbest_fit) {
                gbest_fit = fit[p];
                gbest_pos = pos[p];
            }
        }
        result.objective_trace(it) = gbest_fit;
    }

    result.best_objective = gbest_fit;
    result.best_traps = decode(gbest_pos, k, mat);
    std::sort(result.best_traps.begin(), result.best_traps.end(),
              [](const TrapSpec& a, const TrapSpec& b) {
                  return std::abs(a.delta_H) < std::abs(b.delta_H);
              });
    result.failed_evaluations = failures.load();
    return result;
}

}  // namespace tds
