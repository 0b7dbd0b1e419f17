#include "tdskit/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tdskit/jsonio.hpp"
#include "tdskit/threading.hpp"

namespace tds {

void GenerationConfig::validate() const {
    if (max_traps < 1) throw std::invalid_argument("GenerationConfig: max_traps >= 1");
    auto check_ranges = [](const TrapRanges& r, const char* which) {
        if (!(r.energy_min > 0.0 && r.energy_max > r.energy_min)) {
            throw std::invalid_argument(std::string("GenerationConfig: ") + which +
                                        " energy range must be positive and ordered");
        }
        if (!(r.density_min > 0.0 && r.density_max > r.density_min)) {
            throw std::invalid_argument(std::string("GenerationConfig: ") + which +
                                        " density range must be positive and ordered");
        }
    };
    check_ranges(base, "base");
    if (first_trap) check_ranges(*first_trap, "first_trap");
    if (min_separation < 0.0) {
        throw std::invalid_argument("GenerationConfig: min_separation must be non-negative");
    }
    if (rejection_cap < 1) throw std::invalid_argument("GenerationConfig: rejection_cap >= 1");
    // Feasibility: the base range must hold its share of traps min_separation apart.
    const int base_slots = first_trap ? max_traps - 1 : max_traps;
    if (base_slots > 1 &&
        base.energy_max - base.energy_min < (base_slots - 1) * min_separation) {
        throw std::invalid_argument(
            "GenerationConfig: energy range too narrow for max_traps at min_separation");
    }
}

std::vector<TrapSpec> generate_trap_set(int k, const GenerationConfig& cfg,
                                        const MaterialParams& mat, rng::Stream& stream) {
    if (k < 1 || k > cfg.max_traps) {
        throw std::invalid_argument("generate_trap_set: k must be in [1, max_traps]");
    }
    std::vector<double> energies;
    std::vector<TrapSpec> traps;
    energies.reserve(static_cast<std::size_t>(k));
    traps.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const TrapRanges& r = (i == 0 && cfg.first_trap) ? *cfg.first_trap : cfg.base;
        double energy = 0.0;
        bool accepted = false;
        for (int attempt = 0; attempt < cfg.rejection_cap; ++attempt) {
            energy = stream.uniform(r.energy_min, r.energy_max);
            accepted = std::all_of(energies.begin(), energies.end(), [&](double e) {
                return std::abs(e - energy) >= cfg.min_separation;
            });
            if (accepted) break;
        }
        if (!accepted) {
            throw ExhaustedRetriesError(
                "generate_trap_set: could not place trap " + std::to_string(i + 1) + " of " +
                std::to_string(k) + " after " + std::to_string(cfg.rejection_cap) +
                " attempts; the configured ranges are too tight");
        }
        const double density_sites = stream.uniform(r.density_min, r.density_max) *
                                     constants::avogadro;
        energies.push_back(energy);
        traps.push_back(TrapSpec::with_material_defaults(-energy, density_sites, mat));
    }
    std::sort(traps.begin(), traps.end(), [](const TrapSpec& a, const TrapSpec& b) {
        return std::abs(a.delta_H) < std::abs(b.delta_H);
    });
    return traps;
}

namespace {

std::string describe_traps(const std::vector<TrapSpec>& traps) {
    std::ostringstream oss;
    for (std::size_t i = 0; i < traps.size(); ++i) {
        if (i) oss << ", ";
        oss << "(dH=" << traps[i].delta_H / 1e3 << " kJ/mol, N_T=" << traps[i].N_T
            << " sites/m^3)";
    }
    return oss.str();
}

DataPoint make_point(int k, std::uint64_t stream_tag, long index, const GenerationConfig& cfg,
                     const MaterialParams& mat, const TestParams& test,
                     const NumericalParams& np, ModelVariant variant) {
    rng::Stream stream(cfg.seed, stream_tag, static_cast<std::uint64_t>(index));
    DataPoint point;
    point.n_traps = k;
    point.traps = generate_trap_set(k, cfg, mat, stream);
    try {
        point.spectrum = simulate_tds(mat, point.traps, test, np, variant).spectrum;
    } catch (const NonConvergenceError& err) {
        throw DataGenError("point " + std::to_string(index) + ": " + err.what() +
                               "; traps: " + describe_traps(point.traps),
                           point.traps);
    }
    return point;
}

}  // namespace

Dataset generate_dataset(int n_points, int k, const GenerationConfig& cfg,
                         const MaterialParams& mat, const TestParams& test,
                         const NumericalParams& np, ModelVariant variant, int threads,
                         std::uint64_t stream_tag) {
    cfg.validate();
    mat.validate();
    test.validate();
    np.validate();
    if (n_points < 0) throw std::invalid_argument("generate_dataset: n_points >= 0");

    Dataset ds;
    ds.trap_count = k;
    ds.generation = cfg;
    ds.material = mat;
    ds.test = test;
    ds.numerical = np;
    ds.variant = variant;
    ds.stream_tag = stream_tag;
    ds.points.resize(static_cast<std::size_t>(n_points));
    parallel_for(n_points, threads, [&](long i) {
        ds.points[static_cast<std::size_t>(i)] =
            make_point(k, stream_tag, i, cfg, mat, test, np, variant);
    });
    return ds;
}

SuiteResult generate_suite(const GenerationConfig& cfg, const MaterialParams& mat,
                           const TestParams& test, const NumericalParams& np,
                           ModelVariant variant, int points_per_count, int test_points,
                           int threads) {
    cfg.validate();
    SuiteResult suite;
    suite.training.reserve(static_cast<std::size_t>(cfg.max_traps));
    for (int k = 1; k <= cfg.max_traps; ++k) {
        suite.training.push_back(generate_dataset(points_per_count, k, cfg, mat, test, np,
                                                  variant, threads,
                                                  static_cast<std::uint64_t>(k)));
    }

    // Held-out test set: counts cycle 1..max_traps on an independent stream.
    Dataset& ts = suite.test_set;
    ts.trap_count = 0;
    ts.generation = cfg;
    ts.material = mat;
    ts.test = test;
    ts.numerical = np;
    ts.variant = variant;
    ts.stream_tag = kTestSetStreamTag;
    ts.points.resize(static_cast<std::size_t>(test_points));
    parallel_for(test_points, threads, [&](long i) {
        const int k = 1 + static_cast<int>(i % cfg.max_traps);
        ts.points[static_cast<std::size_t>(i)] =
            make_point(k, kTestSetStreamTag, i, cfg, mat, test, np, variant);
    });
    return suite;
}

namespace {

constexpr const char* kDatasetFormat = "tds-dataset-1";

std::string format_double_json(double v) {
    // nlohmann emits shortest round-trip decimals already; used for arrays
    // written manually.
    ojson j = v;
    return j.dump();
}

}  // namespace

void write_dataset_jsonl(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);

    ojson meta{{"format_version", kDatasetFormat},
               {"trap_count", dataset.trap_count},
               {"n_points", dataset.points.size()},
               {"seed", dataset.generation.seed},
               {"stream_tag", dataset.stream_tag},
               {"variant", to_string(dataset.variant)},
               {"generation", generation_to_json(dataset.generation)},
               {"material", material_to_json(dataset.material)},
               {"test", test_to_json(dataset.test)},
               {"numerical", numerical_to_json(dataset.numerical)}};
    meta["config_hash"] = fnv1a_hex(meta.dump());
    out << meta.dump() << "\n";

    for (const DataPoint& p : dataset.points) {
        out << "{\"n_traps\":" << p.n_traps << ",\"dH_J_mol\":[";
        for (std::size_t i = 0; i < p.traps.size(); ++i) {
            out << (i ? "," : "") << format_double_json(p.traps[i].delta_H);
        }
        out << "],\"NT_sites_m3\":[";
        for (std::size_t i = 0; i < p.traps.size(); ++i) {
            out << (i ? "," : "") << format_double_json(p.traps[i].N_T);
        }
        out << "],\"flux\":[";
        for (Eigen::Index i = 0; i < p.spectrum.fluxes.size(); ++i) {
            out << (i ? "," : "") << format_double_json(p.spectrum.fluxes(i));
        }
        out << "],\"temp_K\":[";
        for (Eigen::Index i = 0; i < p.spectrum.temperatures.size(); ++i) {
            out << (i ? "," : "") << format_double_json(p.spectrum.temperatures(i));
        }
        out << "]}\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

Dataset read_dataset_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);

    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty dataset file");

    Dataset ds;
    try {
        const ojson meta = ojson::parse(line);
        const std::string version = meta.at("format_version").get<std::string>();
        if (version != kDatasetFormat) {
            throw IoError(path + ": format version mismatch: file has '" + version +
                          "', reader expects '" + kDatasetFormat + "'");
        }
        ds.trap_count = meta.at("trap_count").get<int>();
        ds.stream_tag = meta.at("stream_tag").get<std::uint64_t>();
        ds.variant = variant_from_string(meta.at("variant").get<std::string>());
        ds.generation = generation_from_json(meta.at("generation"));
        ds.material = material_from_json(meta.at("material"));
        ds.test = test_from_json(meta.at("test"));
        ds.numerical = numerical_from_json(meta.at("numerical"));
    } catch (const nlohmann::json::exception& err) {
        throw IoError(path + ": bad metadata header: " + err.what());
    }

    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const ojson j = ojson::parse(line);
            DataPoint p;
            p.n_traps = j.at("n_traps").get<int>();
            const auto& dh = j.at("dH_J_mol");
            const auto& nt = j.at("NT_sites_m3");
            if (dh.size() != nt.size() || static_cast<int>(dh.size()) != p.n_traps) {
                throw IoError(path + ":" + std::to_string(line_no) + ": trap arity mismatch");
            }
            for (std::size_t i = 0; i < dh.size(); ++i) {
                p.traps.push_back(TrapSpec::with_material_defaults(
                    dh[i].get<double>(), nt[i].get<double>(), ds.material));
            }
            const auto& flux = j.at("flux");
            const auto& temp = j.at("temp_K");
            if (flux.size() != temp.size()) {
                throw IoError(path + ":" + std::to_string(line_no) + ": flux/temp length mismatch");
            }
            p.spectrum.fluxes.resize(static_cast<Eigen::Index>(flux.size()));
            p.spectrum.temperatures.resize(static_cast<Eigen::Index>(temp.size()));
            for (std::size_t i = 0; i < flux.size(); ++i) {
                p.spectrum.fluxes(static_cast<Eigen::Index>(i)) = flux[i].get<double>();
                p.spectrum.temperatures(static_cast<Eigen::Index>(i)) = temp[i].get<double>();
            }
            p.spectrum.trap_contributions.resize(p.spectrum.fluxes.size(), 0);
            ds.points.push_back(std::move(p));
        } catch (const nlohmann::json::exception& err) {
            throw IoError(path + ":" + std::to_string(line_no) + ": " + err.what());
        }
    }
    return ds;
}

}  // namespace tds
