#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "tdskit/psofit.hpp"

using namespace tds;
using namespace tds::testing;

namespace {

NumericalParams quick_numerics() {
    NumericalParams np;
    np.ntp = 32;
    np.f = 4;
    return np;
}

}  // namespace

TEST_CASE("objective") {
    const MaterialParams mat = bcc_material();
    const TestParams test = reference_test();
    const NumericalParams np = quick_numerics();
    const std::vector<TrapSpec> truth{
        TrapSpec::with_material_defaults(-60e3, 2.0 * constants::avogadro, mat),
        TrapSpec::with_material_defaults(-85e3, 0.8 * constants::avogadro, mat)};
    const Spectrum target =
        simulate_tds(mat, truth, test, np, ModelVariant::McNabbFoster).spectrum;

    SUBCASE("zero at the generating parameters") {
        CHECK(pso_objective(truth, target, mat, test, np, ModelVariant::McNabbFoster) <
              1e-12);
    }
    SUBCASE("invariant under trap permutation") {
        const std::vector<TrapSpec> swapped{truth[1], truth[0]};
        CHECK(pso_objective(swapped, target, mat, test, np, ModelVariant::McNabbFoster) ==
              doctest::Approx(
                  pso_objective(truth, target, mat, test, np, ModelVariant::McNabbFoster)));
    }
    SUBCASE("perturbing one binding energy raises the objective") {
        std::vector<TrapSpec> off = truth;
        off[0].delta_H -= 10e3;
        off[0] = TrapSpec::with_material_defaults(off[0].delta_H, off[0].N_T, mat);
        CHECK(pso_objective(off, target, mat, test, np, ModelVariant::McNabbFoster) > 1e-3);
    }
}

TEST_CASE("swarm fit") {
    const MaterialParams mat = bcc_material();
    const TestParams test = reference_test();
    const NumericalParams np = quick_numerics();
    const std::vector<TrapSpec> truth{
        TrapSpec::with_material_defaults(-72e3, 2.5 * constants::avogadro, mat)};
    const Spectrum target =
        simulate_tds(mat, truth, test, np, ModelVariant::McNabbFoster).spectrum;

    PsoConfig cfg;
    cfg.swarm_size = 24;
    cfg.iterations = 80;
    cfg.n_traps = 1;
    cfg.energy_min = 50e3;
    cfg.energy_max = 150e3;
    cfg.density_min = 0.1 * constants::avogadro;
    cfg.density_max = 10.0 * constants::avogadro;
    cfg.seed = 314;

    const FitResult fit =
        pso_fit(target, cfg, mat, test, np, ModelVariant::McNabbFoster, 2);

    SUBCASE("recovers the generating single trap") {
        REQUIRE(fit.best_traps.size() == 1);
        CHECK(std::abs(std::abs(fit.best_traps[0].delta_H) - 72e3) < 2e3);
        const double ratio = fit.best_traps[0].N_T / truth[0].N_T;
        CHECK(ratio > 1.0 / 1.5);
        CHECK(ratio < 1.5);
        CHECK(fit.failed_evaluations == 0);
    }
    SUBCASE("global best never increases and the trace ends at the reported best") {
        for (Eigen::Index i = 1; i < fit.objective_trace.size(); ++i) {
            CHECK(fit.objective_trace(i) <= fit.objective_trace(i - 1));
        }
        CHECK(fit.objective_trace(fit.objective_trace.size() - 1) ==
              doctest::Approx(fit.best_objective));
        CHECK(fit.best_objective == doctest::Approx(fit.objective_trace.minCoeff()));
    }
    SUBCASE("bounds are respected") {
        CHECK(std::abs(fit.best_traps[0].delta_H) >= cfg.energy_min);
        CHECK(std::abs(fit.best_traps[0].delta_H) <= cfg.energy_max);
        CHECK(fit.best_traps[0].N_T >= cfg.density_min);
        CHECK(fit.best_traps[0].N_T <= cfg.density_max);
    }
    SUBCASE("a fixed seed reproduces the trajectory exactly") {
        const FitResult again =
            pso_fit(target, cfg, mat, test, np, ModelVariant::McNabbFoster, 1);
        CHECK((again.objective_trace - fit.objective_trace).cwiseAbs().maxCoeff() == 0.0);
        CHECK(again.best_traps[0].delta_H == fit.best_traps[0].delta_H);
        CHECK(again.best_traps[0].N_T == fit.best_traps[0].N_T);
    }
    SUBCASE("degenerate configurations are rejected") {
        PsoConfig bad = cfg;
        bad.swarm_size = 1;
        CHECK_THROWS_AS(pso_fit(target, bad, mat, test, np, ModelVariant::McNabbFoster),
                        std::invalid_argument);
        bad = cfg;
        bad.energy_max = bad.energy_min;
        CHECK_THROWS_AS(pso_fit(target, bad, mat, test, np, ModelVariant::McNabbFoster),
                        std::invalid_argument);
    }
    SUBCASE("a target off the solver grid is rejected") {
        Spectrum short_target = target;
        short_target.temperatures.conservativeResize(10);
        short_target.fluxes.conservativeResize(10);
        CHECK_THROWS_AS(
            pso_fit(short_target, cfg, mat, test, np, ModelVariant::McNabbFoster),
            std::invalid_argument);
    }
}
