#include "tdskit/jsonio.hpp"

namespace tds {

std::string to_string(ModelVariant v) {
    return v == ModelVariant::McNabbFoster ? "mcnabb-foster" : "oriani";
}

ModelVariant variant_from_string(const std::string& s) {
    if (s == "mcnabb-foster") return ModelVariant::McNabbFoster;
    if (s == "oriani") return ModelVariant::Oriani;
    throw std::invalid_argument("unknown model variant '" + s +
                                "' (expected mcnabb-foster or oriani)");
}

ojson material_to_json(const MaterialParams& m) {
    return ojson{{"D0_m2_s", m.D0},       {"E_L_J_mol", m.E_L}, {"N_L_sites_m3", m.N_L},
                 {"C_L0_mol_m3", m.C_L0}, {"M_M_g_mol", m.M_M}, {"rho_M_g_cm3", m.rho_M},
                 {"nu_per_s", m.nu}};
}

MaterialParams material_from_json(const ojson& j) {
    MaterialParams m;
    m.D0 = j.at("D0_m2_s").get<double>();
    m.E_L = j.at("E_L_J_mol").get<double>();
    m.N_L = j.at("N_L_sites_m3").get<double>();
    m.C_L0 = j.at("C_L0_mol_m3").get<double>();
    m.M_M = j.at("M_M_g_mol").get<double>();
    m.rho_M = j.at("rho_M_g_cm3").get<double>();
    m.nu = j.at("nu_per_s").get<double>();
    return m;
}

ojson test_to_json(const TestParams& t) {
    return ojson{{"L_m", t.L},
                 {"t_rest_s", t.t_rest},
                 {"phi_K_per_s", t.phi},
                 {"T_min_K", t.T_min},
                 {"T_max_K", t.T_max}};
}

TestParams test_from_json(const ojson& j) {
    TestParams t;
    t.L = j.at("L_m").get<double>();
    t.t_rest = j.at("t_rest_s").get<double>();
    t.phi = j.at("phi_K_per_s").get<double>();
    t.T_min = j.at("T_min_K").get<double>();
    t.T_max = j.at("T_max_K").get<double>();
    return t;
}

ojson numerical_to_json(const NumericalParams& n) {
    return ojson{{"n_elements", n.n_elements},
                 {"ntp", n.ntp},
                 {"f", n.f},
                 {"penalty_k_mol_m2_s", n.penalty_k},
                 {"E_bc_J_mol", n.E_bc},
                 {"newton_tol_rel", n.newton_tol_rel},
                 {"newton_tol_abs", n.newton_tol_abs},
                 {"newton_max_iter", n.newton_max_iter},
                 {"max_dt_halvings", n.max_dt_halvings}};
}

NumericalParams numerical_from_json(const ojson& j) {
    NumericalParams n;
    n.n_elements = j.at("n_elements").get<int>();
    n.ntp = j.at("ntp").get<int>();
    n.f = j.at("f").get<int>();
    n.penalty_k = j.at("penalty_k_mol_m2_s").get<double>();
    n.E_bc = j.at("E_bc_J_mol").get<double>();
    n.newton_tol_rel = j.at("newton_tol_rel").get<double>();
    n.newton_tol_abs = j.at("newton_tol_abs").get<double>();
    n.newton_max_iter = j.at("newton_max_iter").get<int>();
    n.max_dt_halvings = j.at("max_dt_halvings").get<int>();
    return n;
}

namespace {

ojson ranges_to_json(const TrapRanges& r) {
    return ojson{{"energy_min_J_mol", r.energy_min},
                 {"energy_max_J_mol", r.energy_max},
                 {"density_min_mol_m3", r.density_min},
                 {"density_max_mol_m3", r.density_max}};
}

TrapRanges ranges_from_json(const ojson& j) {
    TrapRanges r;
    r.energy_min = j.at("energy_min_J_mol").get<double>();
    r.energy_max = j.at("energy_max_J_mol").get<double>();
    r.density_min = j.at("density_min_mol_m3").get<double>();
    r.density_max = j.at("density_max_mol_m3").get<double>();
    return r;
}

}  // namespace

ojson generation_to_json(const GenerationConfig& g) {
    ojson j{{"max_traps", g.max_traps},
            {"base", ranges_to_json(g.base)},
            {"min_separation_J_mol", g.min_separation},
            {"rejection_cap", g.rejection_cap},
            {"seed", g.seed}};
    if (g.first_trap) j["first_trap"] = ranges_to_json(*g.first_trap);
    return j;
}

GenerationConfig generation_from_json(const ojson& j) {
    GenerationConfig g;
    g.max_traps = j.at("max_traps").get<int>();
    g.base = ranges_from_json(j.at("base"));
    g.min_separation = j.at("min_separation_J_mol").get<double>();
    g.rejection_cap = j.at("rejection_cap").get<int>();
    g.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("first_trap")) g.first_trap = ranges_from_json(j.at("first_trap"));
    return g;
}

namespace {

ojson vector_to_json(const Eigen::VectorXd& v) {
    ojson arr = ojson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Eigen::VectorXd vector_from_json(const ojson& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    Eigen::Index i = 0;
    for (const auto& x : j) v(i++) = x.get<double>();
    return v;
}

}  // namespace

ojson transform_to_json(const InputTransform& t) {
    return ojson{{"floor_mol_m2_s", t.floor},
                 {"mean", vector_to_json(t.mean)},
                 {"std", vector_to_json(t.std_dev)},
                 {"guarded_features", t.guarded_features}};
}

InputTransform transform_from_json(const ojson& j) {
    InputTransform t;
    t.floor = j.at("floor_mol_m2_s").get<double>();
    t.mean = vector_from_json(j.at("mean"));
    t.std_dev = vector_from_json(j.at("std"));
    t.guarded_features = j.at("guarded_features").get<int>();
    if (t.mean.size() != t.std_dev.size()) {
        throw std::invalid_argument("input transform: mean/std length mismatch");
    }
    return t;
}

ojson scalers_to_json(const OutputScalers& s) {
    return ojson{{"energy_min_J_mol", s.energy.lo},
                 {"energy_max_J_mol", s.energy.hi},
                 {"density_min_sites_m3", s.density.lo},
                 {"density_max_sites_m3", s.density.hi}};
}

OutputScalers scalers_from_json(const ojson& j) {
    OutputScalers s;
    s.energy.lo = j.at("energy_min_J_mol").get<double>();
    s.energy.hi = j.at("energy_max_J_mol").get<double>();
    s.density.lo = j.at("density_min_sites_m3").get<double>();
    s.density.hi = j.at("density_max_sites_m3").get<double>();
    return s;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace tds
