#include "tdskit/preprocess.hpp"

#include <cmath>
#include <stdexcept>

#include "tdskit/rng.hpp"

namespace tds {

Eigen::VectorXd log_floor(const Eigen::VectorXd& fluxes, double floor) {
    Eigen::VectorXd out(fluxes.size());
    for (Eigen::Index i = 0; i < fluxes.size(); ++i) {
        const double j = fluxes(i);
        if (std::isnan(j)) throw std::invalid_argument("log_floor: NaN flux");
        if (j < 0.0) throw std::invalid_argument("log_floor: negative flux");
        out(i) = std::log10(std::max(j, floor));
    }
    return out;
}

InputTransform fit_standardizer(const Eigen::MatrixXd& features, double floor) {
    if (features.rows() < 2) {
        throw std::invalid_argument("fit_standardizer: need at least 2 training rows");
    }
    InputTransform t;
    t.floor = floor;
    t.mean = features.colwise().mean();
    const Eigen::MatrixXd centered = features.rowwise() - t.mean.transpose();
    // population variance
    Eigen::VectorXd var =
        centered.array().square().colwise().sum() / static_cast<double>(features.rows());
    t.std_dev = var.array().sqrt();
    for (Eigen::Index i = 0; i < t.std_dev.size(); ++i) {
        if (t.std_dev(i) < kStdGuard) {
            t.std_dev(i) = kStdGuard;
            ++t.guarded_features;
        }
    }
    return t;
}

Eigen::VectorXd apply_transform(const InputTransform& t, const Eigen::VectorXd& features) {
    if (features.size() != t.n_features()) {
        throw std::invalid_argument("apply_transform: feature size mismatch");
    }
    return (features - t.mean).cwiseQuotient(t.std_dev);
}

Eigen::MatrixXd apply_transform(const InputTransform& t, const Eigen::MatrixXd& features) {
    if (features.cols() != t.n_features()) {
        throw std::invalid_argument("apply_transform: feature size mismatch");
    }
    return (features.rowwise() - t.mean.transpose()).array().rowwise() /
           t.std_dev.transpose().array();
}

Eigen::VectorXd featurize(const InputTransform& t, const Eigen::VectorXd& fluxes) {
    return apply_transform(t, log_floor(fluxes, t.floor));
}

Eigen::MatrixXd add_noise(Eigen::MatrixXd features, const NoiseConfig& cfg) {
    if (cfg.sigma < 0.0) throw std::invalid_argument("add_noise: sigma must be non-negative");
    if (cfg.sigma == 0.0) return features;
    rng::Stream stream(cfg.seed, 0x6e6f697365ULL, 0);  // "noise"
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
        for (Eigen::Index c = 0; c < features.cols(); ++c) {
            features(r, c) += cfg.sigma * stream.normal();
        }
    }
    return features;
}

OutputScalers fit_output_scalers(const std::vector<double>& abs_energies,
                                 const std::vector<double>& densities) {
    auto fit = [](const std::vector<double>& v, const char* what) {
        if (v.empty()) throw std::invalid_argument(std::string("fit_output_scalers: no ") + what);
        MinMaxScaler s;
        s.lo = s.hi = v.front();
        for (double x : v) {
            s.lo = std::min(s.lo, x);
            s.hi = std::max(s.hi, x);
        }
        if (!(s.hi > s.lo)) {
            throw std::invalid_argument(std::string("fit_output_scalers: degenerate ") + what +
                                        " range");
        }
        return s;
    };
    return OutputScalers{fit(abs_energies, "energy targets"), fit(densities, "density targets")};
}

Eigen::VectorXd scale_targets(const std::vector<TrapSpec>& traps, const OutputScalers& s) {
    const Eigen::Index k = static_cast<Eigen::Index>(traps.size());
    Eigen::VectorXd out(2 * k);
    for (Eigen::Index i = 0; i < k; ++i) {
        out(i) = s.energy.scale(std::abs(traps[i].delta_H));
        out(k + i) = s.density.scale(traps[i].N_T);
    }
    return out;
}

UnscaledTargets unscale_targets(const Eigen::VectorXd& scaled, const OutputScalers& s) {
    if (scaled.size() % 2 != 0) {
        throw std::invalid_argument("unscale_targets: expected an even-length vector");
    }
    const Eigen::Index k = scaled.size() / 2;
    UnscaledTargets out;
    out.abs_energies.reserve(k);
    out.densities.reserve(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        if (scaled(i) < 0.0 || scaled(i) > 1.0 || scaled(k + i) < 0.0 || scaled(k + i) > 1.0) {
            out.extrapolated = true;
        }
        out.abs_energies.push_back(s.energy.unscale(scaled(i)));
        out.densities.push_back(s.density.unscale(scaled(k + i)));
    }
    return out;
}

}  // namespace tds
