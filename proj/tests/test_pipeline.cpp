#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "tdskit/pipeline.hpp"

using namespace tds;
using namespace tds::testing;

namespace {

NumericalParams quick_numerics() {
    NumericalParams np;
    np.ntp = 32;
    np.f = 4;
    return np;
}

// A miniature two-count suite shared by the training subcases. Accuracy at
// this scale is not the point; mechanics and contracts are.
const SuiteResult& tiny_suite() {
    static const SuiteResult suite = [] {
        GenerationConfig cfg;
        cfg.max_traps = 2;
        cfg.base = TrapRanges{50e3, 150e3, 0.1, 10.0};
        cfg.min_separation = 10e3;
        cfg.seed = 9001;
        return generate_suite(cfg, bcc_material(), reference_test(), quick_numerics(),
                              ModelVariant::McNabbFoster, 120, 16, 2);
    }();
    return suite;
}

TrainOptions tiny_options() {
    TrainOptions opts;
    opts.noise = NoiseConfig{0.05, 77};
    opts.seed = 42;
    opts.classifier_epochs_per_output = 8;
    opts.regressor_epochs_per_output = 6;
    opts.threads = 2;
    return opts;
}

const ModelBundle& tiny_bundle() {
    static const ModelBundle bundle = train_bundle(tiny_suite().training, tiny_options());
    return bundle;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("resampling onto a grid") {
    Eigen::VectorXd grid(3);
    grid << 300.0, 350.0, 400.0;

    SUBCASE("raw data already on the grid passes through") {
        const ResampleResult r =
            resample_spectrum({{300.0, 1e-8}, {350.0, 2e-8}, {400.0, 3e-8}}, grid);
        CHECK_FALSE(r.coverage_warning);
        CHECK(r.spectrum.fluxes(0) == doctest::Approx(1e-8));
        CHECK(r.spectrum.fluxes(1) == doctest::Approx(2e-8));
        CHECK(r.spectrum.fluxes(2) == doctest::Approx(3e-8));
    }
    SUBCASE("linear midpoint") {
        const ResampleResult r = resample_spectrum({{300.0, 1e-8}, {400.0, 3e-8}}, grid);
        CHECK(r.spectrum.fluxes(1) == doctest::Approx(2e-8).epsilon(1e-12));
    }
    SUBCASE("points outside the raw range take the floor and warn") {
        const ResampleResult r = resample_spectrum({{320.0, 1e-8}, {380.0, 3e-8}}, grid);
        CHECK(r.coverage_warning);
        CHECK(r.spectrum.fluxes(0) == doctest::Approx(1e-10));
        CHECK(r.spectrum.fluxes(2) == doctest::Approx(1e-10));
    }
    SUBCASE("unsorted input with duplicates is cleaned up") {
        const ResampleResult r = resample_spectrum(
            {{400.0, 3e-8}, {300.0, 1e-8}, {300.0, 3e-8}}, grid);  // duplicate 300 K averages
        CHECK(r.spectrum.fluxes(0) == doctest::Approx(2e-8));
    }
    SUBCASE("fewer than two points is an error") {
        CHECK_THROWS_AS(resample_spectrum({{300.0, 1e-8}}, grid), std::invalid_argument);
    }
    SUBCASE("dense solver output resampled to the coarse grid matches a direct run") {
        const MaterialParams mat = bcc_material();
        const TestParams test = reference_test();
        const auto traps = reference_traps(mat);
        NumericalParams coarse = quick_numerics();  // ntp=32, f=4
        NumericalParams dense = coarse;
        dense.ntp = 128;
        dense.f = 1;  // same time step, four times the recorded resolution
        const SimulationResult rc = simulate_tds(mat, traps, test, coarse, ModelVariant::Oriani);
        const SimulationResult rd = simulate_tds(mat, traps, test, dense, ModelVariant::Oriani);
        std::vector<std::pair<double, double>> raw;
        for (int m = 0; m < dense.ntp; ++m) {
            raw.emplace_back(rd.spectrum.temperatures(m), rd.spectrum.fluxes(m));
        }
        const ResampleResult rr = resample_spectrum(raw, rc.spectrum.temperatures);
        const double peak = rc.spectrum.peak_flux();
        CHECK(max_abs_dev(rr.spectrum.fluxes, rc.spectrum.fluxes) < 0.01 * peak);
    }
}

TEST_CASE("bundle training mechanics") {
    const ModelBundle& bundle = tiny_bundle();

    SUBCASE("shapes follow the two-stage contract") {
        CHECK(bundle.max_traps == 2);
        CHECK(bundle.classifier.n_outputs() == 2);
        CHECK(bundle.regressors.at(1).n_outputs() == 2);
        CHECK(bundle.regressors.at(2).n_outputs() == 4);
        CHECK(bundle.input_transform.n_features() == 32);
        CHECK(bundle.temperature_grid.size() == 32);
    }
    SUBCASE("metadata records seeds, protocol and losses") {
        CHECK(bundle.metadata.train_seed == 42);
        CHECK(bundle.metadata.noise.sigma == doctest::Approx(0.05));
        CHECK(bundle.metadata.dataset_seeds == std::vector<std::uint64_t>{9001, 9001});
        CHECK(bundle.metadata.points_per_count.at(1) == 120);
        CHECK(bundle.metadata.regressor_val_loss.count(1) == 1);
        CHECK(bundle.metadata.regressor_val_loss.count(2) == 1);
        CHECK(std::isfinite(bundle.metadata.classifier_val_loss));
        CHECK_FALSE(bundle.metadata.config_hash.empty());
    }
    SUBCASE("training is deterministic") {
        const ModelBundle again = train_bundle(tiny_suite().training, tiny_options());
        for (std::size_t l = 0; l < bundle.classifier.W.size(); ++l) {
            CHECK((again.classifier.W[l] - bundle.classifier.W[l]).cwiseAbs().maxCoeff() == 0.0);
        }
        for (const auto& [k, net] : bundle.regressors) {
            for (std::size_t l = 0; l < net.W.size(); ++l) {
                CHECK((again.regressors.at(k).W[l] - net.W[l]).cwiseAbs().maxCoeff() == 0.0);
            }
        }
    }
    SUBCASE("mismatched protocols are rejected") {
        std::vector<Dataset> broken = tiny_suite().training;
        broken[1].test.phi *= 2.0;
        CHECK_THROWS_AS(train_bundle(broken, tiny_options()), std::invalid_argument);
    }
}

TEST_CASE("inference") {
    const ModelBundle& bundle = tiny_bundle();
    const DataPoint& sample = tiny_suite().test_set.points.front();

    SUBCASE("prediction respects the two-stage contract") {
        const TrapPrediction pred = infer(sample.spectrum, bundle);
        CHECK(pred.n_traps >= 1);
        CHECK(pred.n_traps <= 2);
        CHECK(pred.delta_H.size() == static_cast<std::size_t>(pred.n_traps));
        CHECK(pred.N_T.size() == static_cast<std::size_t>(pred.n_traps));
        Eigen::Index argmax;
        pred.probabilities.maxCoeff(&argmax);
        CHECK(static_cast<int>(argmax) + 1 == pred.n_traps);
        for (std::size_t i = 0; i < pred.delta_H.size(); ++i) {
            CHECK(pred.delta_H[i] < 0.0);
            if (i > 0) CHECK(std::abs(pred.delta_H[i]) > std::abs(pred.delta_H[i - 1]));
        }
    }
    SUBCASE("inference is deterministic") {
        const TrapPrediction a = infer(sample.spectrum, bundle);
        const TrapPrediction b = infer(sample.spectrum, bundle);
        CHECK(a.n_traps == b.n_traps);
        for (std::size_t i = 0; i < a.delta_H.size(); ++i) {
            CHECK(a.delta_H[i] == b.delta_H[i]);
            CHECK(a.N_T[i] == b.N_T[i]);
        }
    }
    SUBCASE("an all-floor spectrum still yields a prediction") {
        Spectrum flat;
        flat.temperatures = bundle.temperature_grid;
        flat.fluxes = Eigen::VectorXd::Constant(bundle.temperature_grid.size(), 1e-12);
        const TrapPrediction pred = infer(flat, bundle);
        CHECK(pred.probabilities.size() == 2);
        // degenerate inputs are reported, not rejected; confidence may be low
    }
    SUBCASE("a mismatched grid is rejected with both ranges named") {
        Spectrum wrong = sample.spectrum;
        wrong.temperatures.array() += 400.0;
        try {
            infer(wrong, bundle);
            FAIL("expected std::invalid_argument");
        } catch (const std::invalid_argument& err) {
            const std::string msg = err.what();
            CHECK(msg.find("bundle grid") != std::string::npos);
            CHECK(msg.find("resample") != std::string::npos);
        }
    }
}

TEST_CASE("single-count suite degenerates gracefully") {
    // With one trap count the classifier has a single class and inference
    // always routes to the lone regressor.
    GenerationConfig cfg;
    cfg.max_traps = 1;
    cfg.base = TrapRanges{50e3, 150e3, 0.1, 10.0};
    cfg.min_separation = 10e3;
    cfg.seed = 404;
    const SuiteResult suite = generate_suite(cfg, bcc_material(), reference_test(),
                                             quick_numerics(), ModelVariant::Oriani, 60, 4, 2);
    TrainOptions opts = tiny_options();
    const ModelBundle bundle = train_bundle(suite.training, opts);
    CHECK(bundle.max_traps == 1);
    CHECK(bundle.classifier.n_outputs() == 1);
    const TrapPrediction pred = infer(suite.test_set.points.front().spectrum, bundle);
    CHECK(pred.n_traps == 1);
    CHECK(pred.probabilities(0) == doctest::Approx(1.0));
}

TEST_CASE("bundle persistence") {
    const ModelBundle& bundle = tiny_bundle();
    const auto dir = std::filesystem::temp_directory_path();
    const std::string path = (dir / "tdskit_bundle.json").string();
    save_bundle(bundle, path);

    SUBCASE("load after save restores every number bit-exactly") {
        const ModelBundle back = load_bundle(path);
        CHECK(back.max_traps == bundle.max_traps);
        CHECK((back.temperature_grid - bundle.temperature_grid).cwiseAbs().maxCoeff() == 0.0);
        for (std::size_t l = 0; l < bundle.classifier.W.size(); ++l) {
            CHECK((back.classifier.W[l] - bundle.classifier.W[l]).cwiseAbs().maxCoeff() == 0.0);
            CHECK((back.classifier.b[l] - bundle.classifier.b[l]).cwiseAbs().maxCoeff() == 0.0);
        }
        for (const auto& [k, net] : bundle.regressors) {
            for (std::size_t l = 0; l < net.W.size(); ++l) {
                CHECK((back.regressors.at(k).W[l] - net.W[l]).cwiseAbs().maxCoeff() == 0.0);
            }
            CHECK(back.output_scalers.at(k).energy.lo == bundle.output_scalers.at(k).energy.lo);
            CHECK(back.output_scalers.at(k).density.hi == bundle.output_scalers.at(k).density.hi);
        }
        for (Eigen::Index i = 0; i < bundle.input_transform.mean.size(); ++i) {
            CHECK(back.input_transform.mean(i) == bundle.input_transform.mean(i));
            CHECK(back.input_transform.std_dev(i) == bundle.input_transform.std_dev(i));
        }
        // saving the reloaded bundle reproduces the file byte for byte
        const std::string path2 = (dir / "tdskit_bundle2.json").string();
        save_bundle(back, path2);
        CHECK(slurp(path) == slurp(path2));
        std::filesystem::remove(path2);
    }
    SUBCASE("truncated files fail with a parse diagnostic") {
        const std::string broken = (dir / "tdskit_bundle_trunc.json").string();
        const std::string text = slurp(path);
        std::ofstream out(broken, std::ios::binary);
        out << text.substr(0, text.size() / 2);
        out.close();
        try {
            load_bundle(broken);
            FAIL("expected IoError");
        } catch (const IoError& err) {
            CHECK(std::string(err.what()).find("parse") != std::string::npos);
        }
        std::filesystem::remove(broken);
    }
    SUBCASE("future format versions are rejected explicitly") {
        const std::string doctored = (dir / "tdskit_bundle_v2.json").string();
        std::string text = slurp(path);
        const auto pos = text.find("tds-bundle-1");
        text.replace(pos, 12, "tds-bundle-2");
        std::ofstream out(doctored, std::ios::binary);
        out << text;
        out.close();
        try {
            load_bundle(doctored);
            FAIL("expected IoError");
        } catch (const IoError& err) {
            const std::string msg = err.what();
            CHECK(msg.find("version mismatch") != std::string::npos);
            CHECK(msg.find("tds-bundle-2") != std::string::npos);
        }
        std::filesystem::remove(doctored);
    }
    std::filesystem::remove(path);
}
