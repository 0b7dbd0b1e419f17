#include "tdskit/fem.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "tdskit/transport.hpp"

namespace tds {
namespace {

struct Mesh {
    int n;              // nodes
    double h;           // element length [m]
    Eigen::VectorXd w;  // nodal quadrature weights (row sums of the mass matrix)
};

Mesh make_mesh(double L, int n_elements) {
    Mesh m;
    m.n = n_elements + 1;
    m.h = 0.5 * L / n_elements;  // half domain, symmetry plane at x = 0
    m.w = Eigen::VectorXd::Constant(m.n, m.h);
    m.w(0) = 0.5 * m.h;
    m.w(m.n - 1) = 0.5 * m.h;
    return m;
}

// Tridiagonal operator with a Thomas solve.
struct TriDiag {
    Eigen::VectorXd lower, diag, upper;  // lower(i) couples row i to i-1

    explicit TriDiag(int n)
        : lower(Eigen::VectorXd::Zero(n)),
          diag(Eigen::VectorXd::Zero(n)),
          upper(Eigen::VectorXd::Zero(n)) {}

    Eigen::VectorXd multiply(const Eigen::VectorXd& x) const {
        const int n = static_cast<int>(diag.size());
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            double v = diag(i) * x(i);
            if (i > 0) v += lower(i) * x(i - 1);
            if (i + 1 < n) v += upper(i) * x(i + 1);
            y(i) = v;
        }
        return y;
    }

    Eigen::VectorXd solve(Eigen::VectorXd rhs) const {
        const int n = static_cast<int>(diag.size());
        Eigen::VectorXd scratch(n);
        double d = diag(0);
        scratch(0) = upper(0) / d;
        rhs(0) /= d;
        for (int i = 1; i < n; ++i) {
            d = diag(i) - lower(i) * scratch(i - 1);
            scratch(i) = upper(i) / d;
            rhs(i) = (rhs(i) - lower(i) * rhs(i - 1)) / d;
        }
        for (int i = n - 2; i >= 0; --i) rhs(i) -= scratch(i) * rhs(i + 1);
        return rhs;
    }
};

TriDiag mass_matrix(const Mesh& mesh) {
    TriDiag M(mesh.n);
    const double h6 = mesh.h / 6.0;
    for (int e = 0; e < mesh.n - 1; ++e) {
        M.diag(e) += 2.0 * h6;
        M.diag(e + 1) += 2.0 * h6;
        M.upper(e) += h6;
        M.lower(e + 1) += h6;
    }
    return M;
}

TriDiag stiffness_matrix(const Mesh& mesh) {
    TriDiag K(mesh.n);
    const double ih = 1.0 / mesh.h;
    for (int e = 0; e < mesh.n - 1; ++e) {
        K.diag(e) += ih;
        K.diag(e + 1) += ih;
        K.upper(e) -= ih;
        K.lower(e + 1) -= ih;
    }
    return K;
}

// Trap evaluations clamp the lattice occupancy into [0,1] (with zero slope
// outside) so that transient Newton iterates cannot push the rational trap
// expressions through their poles.
struct TrapPoint {
    double value;  // trapped concentration at the end of the step [mol/m^3]
    double slope;  // d(value) / d(theta_L)
};

// Implicit nodal update of one kinetic trap over dt. The backward-Euler
// equation is linear in the trapped concentration and is solved exactly:
//   c1 = c0 + dt * cap * [k th (1 - c1/cap) - p (c1/cap) (1 - th)]
TrapPoint kinetic_update(double c0, double theta, double dt, double k, double p, double cap) {
    const double th = std::clamp(theta, 0.0, 1.0);
    const double gate = (theta >= 0.0 && theta <= 1.0) ? 1.0 : 0.0;
    const double num = c0 + dt * cap * k * th;
    const double den = 1.0 + dt * (k * th + p * (1.0 - th));
    const double slope = (dt * cap * k * den - num * dt * (k - p)) / (den * den);
    return {num / den, gate * slope};
}

// Equilibrium trapped concentration and its capacity slope.
TrapPoint equilibrium_point(double theta, double K, double cap) {
    const double th = std::clamp(theta, 0.0, 1.0);
    const double gate = (theta >= 0.0 && theta <= 1.0) ? 1.0 : 0.0;
    const double den = 1.0 + (K - 1.0) * th;
    return {cap * K * th / den, gate * cap * K / (den * den)};
}

}  // namespace

double boundary_flux(double theta_L_boundary, double T, const NumericalParams& np) {
    return np.penalty_k * theta_L_boundary *
           std::exp(-np.E_bc / (constants::gas_constant * T));
}

SolverState initialize_state(const MaterialParams& mat, const std::vector<TrapSpec>& traps,
                             const TestParams& test, const NumericalParams& np,
                             ModelVariant variant) {
    mat.validate();
    test.validate();
    np.validate();
    for (const TrapSpec& trap : traps) trap.validate();

    const double theta_L0 = mat.initial_lattice_occupancy();
    if (theta_L0 >= 1.0) {
        throw std::invalid_argument("initialize_state: initial lattice occupancy >= 1");
    }

    SolverState state;
    state.t = 0.0;
    state.c_L = Eigen::VectorXd::Constant(np.n_elements + 1, mat.C_L0);
    if (variant == ModelVariant::McNabbFoster) {
        state.c_T.reserve(traps.size());
        for (const TrapSpec& trap : traps) {
            const double K = equilibrium_constant(test.T_min, trap);
            const double theta_T0 = equilibrium_trap_occupancy(theta_L0, K);
            state.c_T.push_back(Eigen::VectorXd::Constant(
                np.n_elements + 1, theta_T0 * trap.N_T / constants::avogadro));
        }
    }
    return state;
}

StepReport step(SolverState& state, double dt, ModelVariant variant, const MaterialParams& mat,
                const std::vector<TrapSpec>& traps, const TestParams& test,
                const NumericalParams& np) {
    if (dt <= 0.0) throw std::invalid_argument("step: dt must be positive");
    const int n = static_cast<int>(state.c_L.size());
    const Mesh mesh = make_mesh(test.L, n - 1);
    const int n_traps = static_cast<int>(traps.size());

    const double occ = constants::avogadro / mat.N_L;  // c_L -> theta_L
    const double T0 = temperature_at(state.t, test);
    const double T1 = temperature_at(state.t + dt, test);
    const double D1 = lattice_diffusivity(T1, mat);
    // Outflux written as pk_c * c_L(boundary node).
    const double pk_c =
        np.penalty_k * std::exp(-np.E_bc / (constants::gas_constant * T1)) * occ;

    struct TrapCoeffs {
        double cap, k1, p1, K1;
    };
    std::vector<TrapCoeffs> tc(n_traps);
    std::vector<Eigen::VectorXd> cT0(n_traps);
    for (int i = 0; i < n_traps; ++i) {
        tc[i].cap = traps[i].N_T / constants::avogadro;
        tc[i].k1 = trap_rate_k(T1, traps[i]);
        tc[i].p1 = trap_rate_p(T1, traps[i]);
        tc[i].K1 = equilibrium_constant(T1, traps[i]);
        if (variant == ModelVariant::McNabbFoster) {
            cT0[i] = state.c_T[i];
        } else {
            const double K0 = equilibrium_constant(T0, traps[i]);
            cT0[i].resize(n);
            for (int j = 0; j < n; ++j) {
                cT0[i](j) = equilibrium_point(state.c_L(j) * occ, K0, tc[i].cap).value;
            }
        }
    }

    const TriDiag M = mass_matrix(mesh);
    const TriDiag Kst = stiffness_matrix(mesh);
    const double cap_L = mat.N_L / constants::avogadro;

    const Eigen::VectorXd c0 = state.c_L;
    Eigen::VectorXd c1 = c0;
    std::vector<Eigen::VectorXd> cT1(n_traps, Eigen::VectorXd::Zero(n));

    double r0 = 0.0;
    double rnorm = 0.0;
    bool converged = false;
    int it = 0;
    for (it = 0; it <= np.newton_max_iter; ++it) {
        Eigen::VectorXd res = M.multiply(c1 - c0) / dt + D1 * Kst.multiply(c1);
        res(n - 1) += pk_c * c1(n - 1);
        Eigen::VectorXd trap_diag = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n_traps; ++i) {
            for (int j = 0; j < n; ++j) {
                const double theta = c1(j) * occ;
                const TrapPoint pt =
                    variant == ModelVariant::McNabbFoster
                        ? kinetic_update(cT0[i](j), theta, dt, tc[i].k1, tc[i].p1, tc[i].cap)
                        : equilibrium_point(theta, tc[i].K1, tc[i].cap);
                cT1[i](j) = pt.value;
                res(j) += mesh.w(j) * (pt.value - cT0[i](j)) / dt;
                trap_diag(j) += mesh.w(j) * pt.slope * occ / dt;
            }
        }
        rnorm = res.norm();
        if (it == 0) r0 = rnorm;
        if (rnorm <= std::max(np.newton_tol_rel * r0, np.newton_tol_abs)) {
            converged = true;
            break;
        }
        if (it == np.newton_max_iter) break;

        TriDiag J(n);
        J.lower = M.lower / dt + D1 * Kst.lower;
        J.diag = M.diag / dt + D1 * Kst.diag + trap_diag;
        J.upper = M.upper / dt + D1 * Kst.upper;
        J.diag(n - 1) += pk_c;
        const Eigen::VectorXd delta = J.solve(-res);

        // Keep iterates inside a loose physical box so the rational trap
        // terms stay well behaved.
        double alpha = 1.0;
        for (int tries = 0; tries < 60; ++tries) {
            const double lo = (c1 + alpha * delta).minCoeff();
            const double hi = (c1 + alpha * delta).maxCoeff();
            if (lo > -0.25 * cap_L && hi < 1.25 * cap_L) break;
            alpha *= 0.5;
        }
        c1 += alpha * delta;
    }
    if (!converged) {
        throw NonConvergenceError("Newton did not converge within the iteration cap", -1, it);
    }

    StepReport rep;
    rep.newton_iterations = it;
    rep.residual_norm = rnorm;
    rep.flux = pk_c * c1(n - 1);
    rep.lattice_rate = mesh.w.dot(c1 - c0) / dt;
    rep.trap_release_rate.resize(n_traps);
    for (int i = 0; i < n_traps; ++i) {
        rep.trap_release_rate(i) = -mesh.w.dot(cT1[i] - cT0[i]) / dt;
    }

    state.t += dt;
    state.c_L = std::move(c1);
    if (variant == ModelVariant::McNabbFoster) state.c_T = cT1;

    // Clip occupancies back into [0,1]; genuine excursions are counted.
    auto clip = [&rep](Eigen::VectorXd& v, double cap) {
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            if (v(j) < 0.0 || v(j) > cap) {
                if (v(j) < -1e-12 * cap || v(j) > (1.0 + 1e-12) * cap) ++rep.clip_events;
                v(j) = std::clamp(v(j), 0.0, cap);
            }
        }
    };
    clip(state.c_L, cap_L);
    if (variant == ModelVariant::McNabbFoster) {
        for (int i = 0; i < n_traps; ++i) clip(state.c_T[i], tc[i].cap);
    }
    return rep;
}

double half_domain_inventory(const SolverState& state, const MaterialParams& mat,
                             const std::vector<TrapSpec>& traps, const TestParams& test,
                             const NumericalParams& /*np*/, ModelVariant variant) {
    const Mesh mesh = make_mesh(test.L, static_cast<int>(state.c_L.size()) - 1);
    const double occ = constants::avogadro / mat.N_L;
    double inv = mesh.w.dot(state.c_L);
    if (variant == ModelVariant::McNabbFoster) {
        for (const Eigen::VectorXd& c : state.c_T) inv += mesh.w.dot(c);
    } else {
        const double T = temperature_at(state.t, test);
        for (const TrapSpec& trap : traps) {
            const double K = equilibrium_constant(T, trap);
            const double cap = trap.N_T / constants::avogadro;
            for (int j = 0; j < mesh.n; ++j) {
                inv += mesh.w(j) * equilibrium_point(state.c_L(j) * occ, K, cap).value;
            }
        }
    }
    return inv;
}

SimulationResult simulate_tds(const MaterialParams& mat, const std::vector<TrapSpec>& traps,
                              const TestParams& test, const NumericalParams& np,
                              ModelVariant variant) {
    const double t_test = test.ramp_duration();
    const double dt = t_test / (static_cast<double>(np.ntp) * np.f);
    const int n_traps = static_cast<int>(traps.size());

    SimulationResult out;
    SolverState state = initialize_state(mat, traps, test, np, variant);
    out.initial_inventory = half_domain_inventory(state, mat, traps, test, np, variant);
    const double occ = constants::avogadro / mat.N_L;

    StepReport last;
    last.trap_release_rate = Eigen::VectorXd::Zero(n_traps);

    // Advance one interval, recursively halving on Newton failure. Returns
    // the desorbed amount over the interval so split steps integrate exactly.
    std::function<double(double, int, int)> advance = [&](double dt_step, int depth,
                                                          int sample) -> double {
        try {
            last = step(state, dt_step, variant, mat, traps, test, np);
            out.newton_iterations_total += last.newton_iterations;
            out.steps_taken += 1;
            out.clip_events += last.clip_events;
            return dt_step * last.flux;
        } catch (const NonConvergenceError& err) {
            if (depth >= np.max_dt_halvings) {
                throw NonConvergenceError(
                    "solver did not converge at recorded sample " + std::to_string(sample) +
                        " (dt already halved " + std::to_string(depth) + " times)",
                    sample, err.iterations);
            }
            double des = advance(0.5 * dt_step, depth + 1, sample);
            des += advance(0.5 * dt_step, depth + 1, sample);
            return des;
        }
    };

    if (test.t_rest > 0.0) {
        const int n_rest = std::max(1, static_cast<int>(std::ceil(test.t_rest / dt - 1e-12)));
        const double dt_rest = test.t_rest / n_rest;
        // The rest phase opens with a step change to a near-zero boundary, so
        // ramp the step size up geometrically before settling on dt_rest.
        double dt_cur = dt_rest / 64.0;
        double remaining = test.t_rest;
        while (remaining > 1e-12 * test.t_rest) {
            const double dt_step = std::min(dt_cur, remaining);
            out.desorbed_rest += advance(dt_step, 0, -1);
            remaining -= dt_step;
            dt_cur = std::min(2.0 * dt_cur, dt_rest);
            if (np.record_rest) {
                out.rest_times.push_back(state.t);
                out.rest_fluxes.push_back(last.flux);
            }
        }
    }

    out.spectrum.temperatures.resize(np.ntp);
    out.spectrum.fluxes.resize(np.ntp);
    out.spectrum.trap_contributions.resize(np.ntp, n_traps);
    out.recorded_times.resize(np.ntp);
    out.lattice_rates.resize(np.ntp);

    const bool had_rest = test.t_rest > 0.0;
    auto record = [&](int m) {
        out.recorded_times(m) = state.t;
        out.spectrum.temperatures(m) = temperature_at(state.t, test);
        if (m == 0 && !had_rest) {
            const int nb = static_cast<int>(state.c_L.size()) - 1;
            out.spectrum.fluxes(0) =
                boundary_flux(state.c_L(nb) * occ, test.T_min, np);
            out.lattice_rates(0) = 0.0;
            out.spectrum.trap_contributions.row(0).setZero();
        } else {
            out.spectrum.fluxes(m) = last.flux;
            out.lattice_rates(m) = last.lattice_rate;
            out.spectrum.trap_contributions.row(m) = last.trap_release_rate.transpose();
        }
    };

    record(0);  // ramp onset; with a rest phase this is the end-of-rest flux
    const int total_steps = np.ntp * np.f;
    const int last_recorded_step = (np.ntp - 1) * np.f;
    for (int s = 1; s <= total_steps; ++s) {
        const int sample = std::min((s + np.f - 1) / np.f, np.ntp - 1);
        const double des = advance(dt, 0, sample);
        if (s % np.f == 0 && s / np.f <= np.ntp - 1) record(s / np.f);
        if (s > last_recorded_step) out.desorbed_tail += des;
    }

    out.residual_inventory = half_domain_inventory(state, mat, traps, test, np, variant);
    out.final_state = std::move(state);
    return out;
}

double mass_audit(const SimulationResult& result) {
    if (result.initial_inventory <= 0.0) return 0.0;
    double desorbed = 0.0;
    for (Eigen::Index m = 1; m < result.recorded_times.size(); ++m) {
        desorbed += 0.5 * (result.spectrum.fluxes(m) + result.spectrum.fluxes(m - 1)) *
                    (result.recorded_times(m) - result.recorded_times(m - 1));
    }
    const double accounted = desorbed + result.desorbed_rest + result.desorbed_tail +
                             result.residual_inventory;
    return std::abs(result.initial_inventory - accounted) / result.initial_inventory;
}

}  // namespace tds
