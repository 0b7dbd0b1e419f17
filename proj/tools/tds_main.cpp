// Command-line front end: simulate spectra, generate labeled datasets, train
// identification bundles, run two-stage inference and swarm fits.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "tdskit/config.hpp"
#include "tdskit/jsonio.hpp"
#include "tdskit/pipeline.hpp"
#include "tdskit/psofit.hpp"

namespace {

using namespace tds;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;

struct CommonFlags {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> variant;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
};

void apply_overrides(RunConfig& cfg, const CommonFlags& flags) {
    if (flags.seed) {
        cfg.seed = *flags.seed;
        if (cfg.generation) cfg.generation->seed = *flags.seed;
        cfg.noise.seed = *flags.seed;
        if (cfg.pso) cfg.pso->seed = *flags.seed;
    }
    if (flags.variant) cfg.variant = variant_from_string(*flags.variant);
}

void write_json(const ojson& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

std::vector<std::pair<double, double>> csv_pairs(const Spectrum& s) {
    std::vector<std::pair<double, double>> raw;
    raw.reserve(static_cast<std::size_t>(s.size()));
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        raw.emplace_back(s.temperatures(i), s.fluxes(i));
    }
    return raw;
}

Eigen::VectorXd solver_grid(const TestParams& test, const NumericalParams& np) {
    Eigen::VectorXd grid(np.ntp);
    const double step = (test.T_max - test.T_min) / np.ntp;
    for (int m = 0; m < np.ntp; ++m) grid(m) = test.T_min + m * step;
    return grid;
}

ResampleResult resample_onto(const Spectrum& raw, const Eigen::VectorXd& grid,
                             const std::string& what) {
    const double raw_lo = raw.temperatures.minCoeff();
    const double raw_hi = raw.temperatures.maxCoeff();
    if (raw_hi < grid.minCoeff() || raw_lo > grid.maxCoeff()) {
        std::ostringstream oss;
        oss << what << ": spectrum temperatures [" << raw_lo << ", " << raw_hi
            << "] K do not overlap the target grid [" << grid.minCoeff() << ", "
            << grid.maxCoeff() << "] K";
        throw ConfigError(oss.str());
    }
    const ResampleResult r = resample_spectrum(csv_pairs(raw), grid);
    if (r.coverage_warning) {
        std::cerr << "warning: " << what
                  << ": target grid extends beyond the measured range; "
                     "missing samples filled with the flux floor\n";
    }
    return r;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 bool double_sided, const std::string& rest_path, const CommonFlags& flags) {
    RunConfig cfg = load_run_config(config_path);
    apply_overrides(cfg, flags);
    if (cfg.traps.empty()) {
        std::cerr << "note: no traps configured; simulating pure lattice diffusion\n";
    }
    NumericalParams np = cfg.numerical;
    np.record_rest = !rest_path.empty();

    std::cerr << "simulating " << cfg.traps.size() << " trap(s), variant "
              << to_string(cfg.variant) << ", phi = " << cfg.test.phi << " K/s\n";
    SimulationResult result = simulate_tds(cfg.material, cfg.traps, cfg.test, np, cfg.variant);
    if (double_sided) {
        result.spectrum.fluxes *= 2.0;
        result.spectrum.trap_contributions *= 2.0;
    }
    write_spectrum_csv(result.spectrum, out_path);

    if (!rest_path.empty()) {
        std::ofstream rest(rest_path);
        if (!rest) throw IoError("cannot open for writing: " + rest_path);
        rest << "time_s,temperature_K,flux_mol_m2_s\n";
        for (std::size_t i = 0; i < result.rest_times.size(); ++i) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", result.rest_times[i],
                          cfg.test.T_min,
                          double_sided ? 2.0 * result.rest_fluxes[i] : result.rest_fluxes[i]);
            rest << buf;
        }
    }

    ojson meta{{"config_hash", cfg.config_hash},
               {"seed", cfg.seed},
               {"variant", to_string(cfg.variant)},
               {"double_sided", double_sided},
               {"mass_audit", mass_audit(result)},
               {"clip_events", result.clip_events},
               {"newton_iterations", result.newton_iterations_total}};
    write_json(meta, out_path + ".meta.json");
    std::cerr << "wrote " << out_path << " (" << np.ntp
              << " samples, peak flux = " << result.spectrum.peak_flux() << " mol/m^2/s)\n";
    return kExitOk;
}

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 const CommonFlags& flags) {
    RunConfig cfg = load_run_config(config_path);
    apply_overrides(cfg, flags);
    if (!cfg.generation) {
        throw ConfigError("config: generate needs a generation section");
    }
    std::filesystem::create_directories(out_dir);

    const int per_count = cfg.training.points_per_count;
    const int test_points = cfg.training.test_points;
    std::cerr << "generating " << cfg.generation->max_traps << " dataset(s) of " << per_count
              << " points plus " << test_points << " test points on " << flags.threads
              << " thread(s)\n";
    const SuiteResult suite = generate_suite(*cfg.generation, cfg.material, cfg.test,
                                             cfg.numerical, cfg.variant, per_count,
                                             test_points, flags.threads);
    for (const Dataset& ds : suite.training) {
        const std::string path =
            (std::filesystem::path(out_dir) / ("dataset_k" + std::to_string(ds.trap_count) +
                                               ".jsonl"))
                .string();
        write_dataset_jsonl(ds, path);
        std::cerr << "wrote " << path << "\n";
    }
    const std::string test_path =
        (std::filesystem::path(out_dir) / "test_set.jsonl").string();
    write_dataset_jsonl(suite.test_set, test_path);
    std::cerr << "wrote " << test_path << "\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_path, const CommonFlags& flags) {
    RunConfig cfg = load_run_config(config_path);
    apply_overrides(cfg, flags);

    std::vector<Dataset> suite;
    for (int k = 1;; ++k) {
        const std::string path =
            (std::filesystem::path(data_dir) / ("dataset_k" + std::to_string(k) + ".jsonl"))
                .string();
        if (!std::filesystem::exists(path)) break;
        std::cerr << "loading " << path << "\n";
        suite.push_back(read_dataset_jsonl(path));
    }
    if (suite.empty()) {
        throw ConfigError("train: no dataset_k*.jsonl files found in " + data_dir);
    }

    TrainOptions opts;
    opts.noise = cfg.noise;
    opts.seed = cfg.seed;
    opts.validation_fraction = cfg.training.validation_fraction;
    opts.batch_size = cfg.training.batch_size;
    opts.classifier_epochs_per_output = cfg.training.classifier_epochs_per_output;
    opts.regressor_epochs_per_output = cfg.training.regressor_epochs_per_output;
    opts.lr = cfg.training.lr;
    opts.weight_decay = cfg.training.weight_decay;
    opts.threads = flags.threads;

    std::cerr << "training classifier and " << suite.size() << " regressor(s)\n";
    const ModelBundle bundle = train_bundle(suite, opts);
    save_bundle(bundle, out_path);
    std::cerr << "wrote " << out_path
              << " (classifier val loss = " << bundle.metadata.classifier_val_loss << ")\n";
    return kExitOk;
}

int cmd_infer(const std::string& bundle_path, const std::string& spectrum_path,
              const std::string& out_path) {
    const ModelBundle bundle = load_bundle(bundle_path);
    const Spectrum raw = read_spectrum_csv(spectrum_path);
    const ResampleResult resampled = resample_onto(raw, bundle.temperature_grid, "infer");
    const TrapPrediction pred = infer(resampled.spectrum, bundle);

    ojson traps = ojson::array();
    for (std::size_t i = 0; i < pred.delta_H.size(); ++i) {
        traps.push_back(ojson{{"dH_J_mol", pred.delta_H[i]},
                              {"dH_kJ_mol", pred.delta_H[i] / 1e3},
                              {"NT_sites_m3", pred.N_T[i]},
                              {"NT_mol_m3", pred.N_T[i] / constants::avogadro}});
    }
    ojson probs = ojson::array();
    for (Eigen::Index i = 0; i < pred.probabilities.size(); ++i) {
        probs.push_back(pred.probabilities(i));
    }
    const ojson out{{"format_version", "tds-prediction-1"},
                    {"n_traps", pred.n_traps},
                    {"traps", traps},
                    {"class_probabilities", probs},
                    {"low_confidence", pred.low_confidence},
                    {"extrapolated", pred.extrapolated},
                    {"coverage_warning", resampled.coverage_warning},
                    {"bundle_config_hash", bundle.metadata.config_hash},
                    {"bundle_train_seed", bundle.metadata.train_seed}};
    if (!out_path.empty()) write_json(out, out_path);
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

int cmd_fit_pso(const std::string& config_path, const std::string& spectrum_path,
                const std::string& out_path, const CommonFlags& flags) {
    RunConfig cfg = load_run_config(config_path);
    apply_overrides(cfg, flags);
    if (!cfg.pso) throw ConfigError("config: fit-pso needs a pso section");

    const Spectrum raw = read_spectrum_csv(spectrum_path);
    const ResampleResult resampled =
        resample_onto(raw, solver_grid(cfg.test, cfg.numerical), "fit-pso");

    std::cerr << "swarm of " << cfg.pso->swarm_size << " particles, " << cfg.pso->iterations
              << " iterations, " << cfg.pso->n_traps << " trap(s)\n";
    const FitResult fit = pso_fit(resampled.spectrum, *cfg.pso, cfg.material, cfg.test,
                                  cfg.numerical, cfg.variant, flags.threads);

    ojson traps = ojson::array();
    for (const TrapSpec& trap : fit.best_traps) {
        traps.push_back(ojson{{"dH_J_mol", trap.delta_H},
                              {"dH_kJ_mol", trap.delta_H / 1e3},
                              {"NT_sites_m3", trap.N_T},
                              {"NT_mol_m3", trap.N_T / constants::avogadro}});
    }
    ojson trace = ojson::array();
    for (Eigen::Index i = 0; i < fit.objective_trace.size(); ++i) {
        trace.push_back(fit.objective_trace(i));
    }
    const ojson out{{"format_version", "tds-fit-1"},
                    {"best_traps", traps},
                    {"best_objective", fit.best_objective},
                    {"objective_trace", trace},
                    {"failed_evaluations", fit.failed_evaluations},
                    {"config_hash", cfg.config_hash},
                    {"seed", cfg.seed}};
    if (!out_path.empty()) write_json(out, out_path);
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thermal desorption spectroscopy toolkit: simulate hydrogen "
                 "diffusion-trapping spectra, build synthetic corpora, train the two-stage "
                 "identifier, and fit trap parameters"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string config_path, out_path, out_dir, data_dir, bundle_path, spectrum_path,
        rest_path;
    bool double_sided = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", flags.seed, "override the config seed");
        cmd->add_option("--threads", flags.threads, "worker threads");
        cmd->add_option("--model-variant", flags.variant,
                        "trap kinetics treatment: mcnabb-foster or oriani")
            ->check(CLI::IsMember({"mcnabb-foster", "oriani"}));
    };

    CLI::App* simulate = app.add_subcommand("simulate", "solve one spectrum to CSV");
    simulate->add_option("--config", config_path, "run configuration JSON")->required();
    simulate->add_option("--out", out_path, "output spectrum CSV")->required();
    simulate->add_flag("--double-sided", double_sided,
                       "report flux for both faces of the sample");
    simulate->add_option("--record-rest", rest_path, "also write a rest-phase trace CSV");
    add_common(simulate);

    CLI::App* generate = app.add_subcommand("generate", "build labeled synthetic datasets");
    generate->add_option("--config", config_path, "run configuration JSON")->required();
    generate->add_option("--out-dir", out_dir, "directory for dataset_k*.jsonl")->required();
    add_common(generate);

    CLI::App* train = app.add_subcommand("train", "train a model bundle from datasets");
    train->add_option("--config", config_path, "run configuration JSON")->required();
    train->add_option("--data-dir", data_dir, "directory holding dataset_k*.jsonl")
        ->required();
    train->add_option("--out", out_path, "output bundle JSON")->required();
    add_common(train);

    CLI::App* infer_cmd = app.add_subcommand("infer", "predict trap parameters from a CSV");
    infer_cmd->add_option("--bundle", bundle_path, "trained bundle JSON")->required();
    infer_cmd->add_option("--spectrum", spectrum_path, "measured spectrum CSV")->required();
    infer_cmd->add_option("--out", out_path, "output prediction JSON");

    CLI::App* fit = app.add_subcommand("fit-pso", "swarm-fit trap parameters to a CSV");
    fit->add_option("--config", config_path, "run configuration JSON")->required();
    fit->add_option("--spectrum", spectrum_path, "target spectrum CSV")->required();
    fit->add_option("--out", out_path, "output fit JSON");
    add_common(fit);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (app.got_subcommand(simulate)) {
            return cmd_simulate(config_path, out_path, double_sided, rest_path, flags);
        }
        if (app.got_subcommand(generate)) {
            return cmd_generate(config_path, out_dir, flags);
        }
        if (app.got_subcommand(train)) {
            return cmd_train(config_path, data_dir, out_path, flags);
        }
        if (app.got_subcommand(infer_cmd)) {
            return cmd_infer(bundle_path, spectrum_path, out_path);
        }
        if (app.got_subcommand(fit)) {
            return cmd_fit_pso(config_path, spectrum_path, out_path, flags);
        }
    } catch (const ConfigError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const NonConvergenceError& err) {
        std::cerr << "solver error: " << err.what() << "\n";
        return kExitSolver;
    } catch (const DataGenError& err) {
        std::cerr << "solver error: " << err.what() << "\n";
        return kExitSolver;
    } catch (const IoError& err) {
        std::cerr << "io error: " << err.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return kExitOk;
}
