#include "tdskit/config.hpp"

#include <fstream>
#include <sstream>

#include "tdskit/jsonio.hpp"

namespace tds {
namespace {

using nlohmann::ordered_json;

double number_at(const ordered_json& j, const std::string& section, const std::string& key,
                 const char* unit) {
    if (!j.contains(key)) {
        throw ConfigError("config: missing key " + section + "." + key + " [" + unit + "]");
    }
    if (!j.at(key).is_number()) {
        throw ConfigError("config: " + section + "." + key + " must be a number [" + unit + "]");
    }
    return j.at(key).get<double>();
}

double number_or(const ordered_json& j, const std::string& section, const std::string& key,
                 const char* unit, double fallback) {
    if (!j.contains(key)) return fallback;
    return number_at(j, section, key, unit);
}

std::pair<double, double> range_at(const ordered_json& j, const std::string& section,
                                   const std::string& key, const char* unit) {
    if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 2) {
        throw ConfigError("config: " + section + "." + key + " must be [min, max] [" + unit +
                          "]");
    }
    const double lo = j.at(key)[0].get<double>();
    const double hi = j.at(key)[1].get<double>();
    if (!(hi > lo)) {
        throw ConfigError("config: " + section + "." + key + " must satisfy min < max [" +
                          std::string(unit) + "]");
    }
    return {lo, hi};
}

double heating_rate(const ordered_json& j) {
    const bool si = j.contains("phi_K_per_s");
    const bool ch = j.contains("phi_C_per_h");
    if (si == ch) {
        throw ConfigError(
            "config: test section needs exactly one of phi_K_per_s [K/s] or phi_C_per_h "
            "[degC/h]");
    }
    return si ? number_at(j, "test", "phi_K_per_s", "K/s")
              : number_at(j, "test", "phi_C_per_h", "degC/h") / 3600.0;
}

TrapRanges trap_ranges(const ordered_json& j, const std::string& section) {
    TrapRanges r;
    const auto [elo, ehi] = range_at(j, section, "energy_range_kJ_mol", "kJ/mol");
    r.energy_min = elo * 1e3;
    r.energy_max = ehi * 1e3;
    const auto [dlo, dhi] = range_at(j, section, "density_range_mol_m3", "mol/m^3");
    r.density_min = dlo;
    r.density_max = dhi;
    return r;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& err) {
        throw ConfigError("config: " + path + ": " + err.what());
    }

    RunConfig cfg;
    cfg.config_hash = fnv1a_hex(text);
    try {
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("model_variant")) {
            cfg.variant = variant_from_string(j.at("model_variant").get<std::string>());
        }

        if (!j.contains("material")) throw ConfigError("config: missing material section");
        const auto& jm = j.at("material");
        cfg.material.D0 = number_at(jm, "material", "D0_m2_s", "m^2/s");
        cfg.material.E_L = number_at(jm, "material", "E_L_kJ_mol", "kJ/mol") * 1e3;
        cfg.material.N_L = number_at(jm, "material", "N_L_sites_m3", "sites/m^3");
        cfg.material.C_L0 = number_at(jm, "material", "C_L0_mol_m3", "mol/m^3");
        cfg.material.M_M = number_at(jm, "material", "M_M_g_mol", "g/mol");
        cfg.material.rho_M = number_at(jm, "material", "rho_M_g_cm3", "g/cm^3");
        cfg.material.nu = number_or(jm, "material", "nu_per_s", "1/s", 1e13);

        if (!j.contains("test")) throw ConfigError("config: missing test section");
        const auto& jt = j.at("test");
        cfg.test.L = number_at(jt, "test", "L_m", "m");
        cfg.test.t_rest = number_at(jt, "test", "t_rest_s", "s");
        cfg.test.phi = heating_rate(jt);
        cfg.test.T_min = number_at(jt, "test", "T_min_K", "K");
        cfg.test.T_max = number_at(jt, "test", "T_max_K", "K");

        if (j.contains("numerical")) {
            const auto& jn = j.at("numerical");
            NumericalParams& np = cfg.numerical;
            np.n_elements = static_cast<int>(number_or(jn, "numerical", "n_elements", "count",
                                                       np.n_elements));
            np.ntp = static_cast<int>(number_or(jn, "numerical", "ntp", "count", np.ntp));
            np.f = static_cast<int>(number_or(jn, "numerical", "f", "steps/sample", np.f));
            np.penalty_k = number_or(jn, "numerical", "penalty_k_mol_m2_s", "mol/(m^2 s)",
                                     np.penalty_k);
            np.E_bc = number_or(jn, "numerical", "E_bc_kJ_mol", "kJ/mol", np.E_bc / 1e3) * 1e3;
            np.newton_tol_rel = number_or(jn, "numerical", "newton_tol_rel", "relative",
                                          np.newton_tol_rel);
            np.newton_max_iter = static_cast<int>(
                number_or(jn, "numerical", "newton_max_iter", "count", np.newton_max_iter));
            np.max_dt_halvings = static_cast<int>(
                number_or(jn, "numerical", "max_dt_halvings", "count", np.max_dt_halvings));
        }

        if (j.contains("traps")) {
            if (!j.at("traps").is_array()) throw ConfigError("config: traps must be an array");
            for (std::size_t i = 0; i < j.at("traps").size(); ++i) {
                const auto& trap = j.at("traps")[i];
                const std::string section = "traps[" + std::to_string(i) + "]";
                const double dh = number_at(trap, section, "dH_kJ_mol", "kJ/mol") * 1e3;
                const double nt =
                    number_at(trap, section, "NT_mol_m3", "mol/m^3") * constants::avogadro;
                if (dh >= 0.0) {
                    throw ConfigError("config: " + section +
                                      ".dH_kJ_mol must be negative [kJ/mol]");
                }
                cfg.traps.push_back(TrapSpec::with_material_defaults(dh, nt, cfg.material));
            }
        }

        if (j.contains("generation")) {
            const auto& jg = j.at("generation");
            GenerationConfig g;
            g.max_traps = static_cast<int>(number_at(jg, "generation", "max_traps", "count"));
            g.base = trap_ranges(jg, "generation");
            g.min_separation =
                number_at(jg, "generation", "min_separation_kJ_mol", "kJ/mol") * 1e3;
            if (jg.contains("first_trap")) {
                g.first_trap = trap_ranges(jg.at("first_trap"), "generation.first_trap");
            }
            g.rejection_cap = static_cast<int>(
                number_or(jg, "generation", "rejection_cap", "count", g.rejection_cap));
            g.seed = cfg.seed;
            g.validate();
            cfg.generation = g;
        }

        if (j.contains("training")) {
            const auto& jr = j.at("training");
            TrainingSection& t = cfg.training;
            t.points_per_count = static_cast<int>(
                number_or(jr, "training", "points_per_count", "count", t.points_per_count));
            t.test_points = static_cast<int>(
                number_or(jr, "training", "test_points", "count", t.test_points));
            t.validation_fraction = number_or(jr, "training", "validation_fraction", "fraction",
                                              t.validation_fraction);
            t.batch_size = static_cast<int>(
                number_or(jr, "training", "batch_size", "count", t.batch_size));
            t.classifier_epochs_per_output =
                static_cast<int>(number_or(jr, "training", "classifier_epochs_per_output",
                                           "count", t.classifier_epochs_per_output));
            t.regressor_epochs_per_output =
                static_cast<int>(number_or(jr, "training", "regressor_epochs_per_output",
                                           "count", t.regressor_epochs_per_output));
            t.lr = number_or(jr, "training", "learning_rate", "1", t.lr);
            t.weight_decay = number_or(jr, "training", "weight_decay", "1", t.weight_decay);
        }

        if (j.contains("noise")) {
            cfg.noise.sigma = number_at(j.at("noise"), "noise", "sigma", "standardized units");
        }
        cfg.noise.seed = cfg.seed;

        if (j.contains("pso")) {
            const auto& jp = j.at("pso");
            PsoConfig p;
            p.swarm_size = static_cast<int>(
                number_or(jp, "pso", "swarm_size", "count", p.swarm_size));
            p.iterations = static_cast<int>(
                number_or(jp, "pso", "iterations", "count", p.iterations));
            p.inertia = number_or(jp, "pso", "inertia", "1", p.inertia);
            p.cognitive = number_or(jp, "pso", "cognitive", "1", p.cognitive);
            p.social = number_or(jp, "pso", "social", "1", p.social);
            p.n_traps = static_cast<int>(number_at(jp, "pso", "n_traps", "count"));
            const auto [elo, ehi] = range_at(jp, "pso", "energy_bounds_kJ_mol", "kJ/mol");
            p.energy_min = elo * 1e3;
            p.energy_max = ehi * 1e3;
            const auto [dlo, dhi] = range_at(jp, "pso", "density_bounds_mol_m3", "mol/m^3");
            p.density_min = dlo * constants::avogadro;
            p.density_max = dhi * constants::avogadro;
            p.seed = cfg.seed;
            p.validate();
            cfg.pso = p;
        }

        cfg.material.validate();
        cfg.test.validate();
        cfg.numerical.validate();
        for (const TrapSpec& trap : cfg.traps) trap.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& err) {
        throw ConfigError("config: " + path + ": " + err.what());
    }
    return cfg;
}

}  // namespace tds
