#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tdskit/jsonio.hpp"
#include "tdskit/preprocess.hpp"
#include "tdskit/rng.hpp"

using namespace tds;

TEST_CASE("log-floor featurization") {
    Eigen::VectorXd fluxes(3);
    fluxes << 1e-12, 1e-6, 1.0;
    const Eigen::VectorXd f = log_floor(fluxes);
    CHECK(f(0) == doctest::Approx(-10.0));  // floor binds
    CHECK(f(1) == doctest::Approx(-6.0));
    CHECK(f(2) == doctest::Approx(0.0));

    SUBCASE("identity in log space across the whole range") {
        for (double x = -10.0; x <= 0.0; x += 0.5) {
            Eigen::VectorXd one(1);
            one << std::pow(10.0, x);
            CHECK(log_floor(one)(0) == doctest::Approx(x).epsilon(1e-12));
        }
    }
    SUBCASE("rejects NaN and negative values") {
        Eigen::VectorXd bad(1);
        bad << -1e-9;
        CHECK_THROWS_AS(log_floor(bad), std::invalid_argument);
        bad << std::nan("");
        CHECK_THROWS_AS(log_floor(bad), std::invalid_argument);
    }
}

TEST_CASE("z-score standardization") {
    SUBCASE("hand-checked column") {
        Eigen::MatrixXd rows(3, 1);
        rows << 1.0, 2.0, 3.0;
        const InputTransform t = fit_standardizer(rows);
        CHECK(t.mean(0) == doctest::Approx(2.0));
        CHECK(t.std_dev(0) == doctest::Approx(0.816496580927726).epsilon(1e-12));
        const Eigen::MatrixXd z = apply_transform(t, rows);
        CHECK(z(0, 0) == doctest::Approx(-1.224744871391589).epsilon(1e-12));
        CHECK(z(1, 0) == doctest::Approx(0.0));
        CHECK(z(2, 0) == doctest::Approx(1.224744871391589).epsilon(1e-12));
    }
    SUBCASE("constant column collapses to zero under the guard") {
        Eigen::MatrixXd rows(4, 2);
        rows << 1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0, 5.0;
        const InputTransform t = fit_standardizer(rows);
        CHECK(t.guarded_features == 1);
        const Eigen::MatrixXd z = apply_transform(t, rows);
        CHECK(z.col(1).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    }
    SUBCASE("fitted-then-applied training matrix is centered and unit-scaled") {
        rng::Stream stream(7, 1, 1);
        Eigen::MatrixXd rows(200, 64);
        for (Eigen::Index r = 0; r < rows.rows(); ++r) {
            for (Eigen::Index c = 0; c < rows.cols(); ++c) {
                rows(r, c) = stream.uniform(-8.0, -4.0) * (1.0 + 0.01 * c);
            }
        }
        const InputTransform t = fit_standardizer(rows);
        const Eigen::MatrixXd z = apply_transform(t, rows);
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            const double mean = z.col(c).mean();
            const double sd = std::sqrt(z.col(c).array().square().mean() - mean * mean);
            CHECK(std::abs(mean) < 1e-3);
            CHECK(std::abs(sd - 1.0) < 1e-3);
        }
    }
    SUBCASE("affine map preserves within-feature ordering") {
        rng::Stream stream(11, 2, 2);
        Eigen::MatrixXd rows(50, 4);
        for (Eigen::Index r = 0; r < rows.rows(); ++r)
            for (Eigen::Index c = 0; c < rows.cols(); ++c) rows(r, c) = stream.uniform(-9, -3);
        const InputTransform t = fit_standardizer(rows);
        const Eigen::MatrixXd z = apply_transform(t, rows);
        for (Eigen::Index c = 0; c < rows.cols(); ++c) {
            for (Eigen::Index r = 1; r < rows.rows(); ++r) {
                if (rows(r, c) > rows(r - 1, c)) CHECK(z(r, c) > z(r - 1, c));
                if (rows(r, c) < rows(r - 1, c)) CHECK(z(r, c) < z(r - 1, c));
            }
        }
    }
    SUBCASE("needs at least two rows") {
        CHECK_THROWS_AS(fit_standardizer(Eigen::MatrixXd::Zero(1, 8)), std::invalid_argument);
    }
}

TEST_CASE("noise augmentation") {
    Eigen::MatrixXd feats = Eigen::MatrixXd::Zero(100, 10);
    SUBCASE("zero sigma is the identity") {
        const Eigen::MatrixXd out = add_noise(feats, NoiseConfig{0.0, 42});
        CHECK((out - feats).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    }
    SUBCASE("same seed reproduces the same perturbation") {
        const Eigen::MatrixXd a = add_noise(feats, NoiseConfig{0.05, 42});
        const Eigen::MatrixXd b = add_noise(feats, NoiseConfig{0.05, 42});
        CHECK((a - b).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
        const Eigen::MatrixXd c = add_noise(feats, NoiseConfig{0.05, 43});
        CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
    }
    SUBCASE("empirical spread matches sigma within two percent") {
        Eigen::MatrixXd wide = Eigen::MatrixXd::Zero(1000, 100);  // 1e5 draws
        const double sigma = 0.05;
        const Eigen::MatrixXd out = add_noise(wide, NoiseConfig{sigma, 3});
        const double emp = std::sqrt(out.array().square().mean());
        CHECK(std::abs(emp - sigma) / sigma < 0.02);
    }
}

TEST_CASE("output scalers") {
    std::vector<double> energies{50e3, 80e3, 150e3};
    std::vector<double> densities{6.022e22, 3.0e24, 6.022e24};
    const OutputScalers s = fit_output_scalers(energies, densities);

    SUBCASE("range endpoints map to zero and one") {
        CHECK(s.energy.scale(50e3) == doctest::Approx(0.0));
        CHECK(s.energy.scale(150e3) == doctest::Approx(1.0));
        CHECK(s.density.scale(6.022e22) == doctest::Approx(0.0));
        CHECK(s.density.scale(6.022e24) == doctest::Approx(1.0));
    }
    SUBCASE("round trip identity on random targets") {
        rng::Stream stream(5, 0, 0);
        for (int i = 0; i < 1000; ++i) {
            const double e = stream.uniform(50e3, 150e3);
            const double d = stream.uniform(6.022e22, 6.022e24);
            CHECK(s.energy.unscale(s.energy.scale(e)) == doctest::Approx(e).epsilon(1e-12));
            CHECK(s.density.unscale(s.density.scale(d)) == doctest::Approx(d).epsilon(1e-12));
        }
    }
    SUBCASE("mixed magnitudes each land in the unit interval independently") {
        MaterialParams mat;
        const std::vector<TrapSpec> traps{
            TrapSpec::with_material_defaults(-1.2e5, 1.0e24, mat),
            TrapSpec::with_material_defaults(-6.0e4, 5.5e24, mat)};
        const Eigen::VectorXd scaled = scale_targets(traps, s);
        REQUIRE(scaled.size() == 4);
        for (Eigen::Index i = 0; i < scaled.size(); ++i) {
            CHECK(scaled(i) >= 0.0);
            CHECK(scaled(i) <= 1.0);
        }
    }
    SUBCASE("out-of-range outputs are inverse-mapped without clamping and flagged") {
        Eigen::VectorXd scaled(2);
        scaled << 1.2, 0.5;
        const UnscaledTargets t = unscale_targets(scaled, s);
        CHECK(t.extrapolated);
        CHECK(t.abs_energies[0] == doctest::Approx(50e3 + 1.2 * 100e3));
    }
    SUBCASE("degenerate target ranges are rejected") {
        CHECK_THROWS_AS(fit_output_scalers({1.0, 1.0}, {2.0, 3.0}), std::invalid_argument);
    }
    SUBCASE("scaler parameters survive serialization bit-exactly") {
        const ojson j = scalers_to_json(s);
        const OutputScalers back = scalers_from_json(ojson::parse(j.dump()));
        CHECK(back.energy.lo == s.energy.lo);
        CHECK(back.energy.hi == s.energy.hi);
        CHECK(back.density.lo == s.density.lo);
        CHECK(back.density.hi == s.density.hi);
    }
}

TEST_CASE("input transform serialization is lossless") {
    rng::Stream stream(9, 9, 9);
    Eigen::MatrixXd rows(20, 16);
    for (Eigen::Index r = 0; r < rows.rows(); ++r)
        for (Eigen::Index c = 0; c < rows.cols(); ++c) rows(r, c) = stream.uniform(-9, -2);
    const InputTransform t = fit_standardizer(rows);
    const InputTransform back = transform_from_json(ojson::parse(transform_to_json(t).dump()));
    CHECK(back.floor == t.floor);
    for (Eigen::Index i = 0; i < t.mean.size(); ++i) {
        CHECK(back.mean(i) == t.mean(i));
        CHECK(back.std_dev(i) == t.std_dev(i));
    }
}
