#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "tdskit/params.hpp"

namespace tds {

/// Fitted input featurization: log10 of floored fluxes, then per-feature
/// z-score standardization using training-set population statistics. Fitted
/// once, then frozen.
struct InputTransform {
    double floor = 1e-10;     // mol/(m^2 s)
    Eigen::VectorXd mean;     // per feature
    Eigen::VectorXd std_dev;  // per feature, >= guard
    int guarded_features = 0; // constant features whose std hit the guard

    Eigen::Index n_features() const { return mean.size(); }
};

inline constexpr double kStdGuard = 1e-8;

/// feature_n = log10(max(J_n, floor)). Rejects NaN and negative fluxes.
Eigen::VectorXd log_floor(const Eigen::VectorXd& fluxes, double floor = 1e-10);

/// Population mean/std per feature; one sample per row, >= 2 rows required.
InputTransform fit_standardizer(const Eigen::MatrixXd& features, double floor = 1e-10);

Eigen::VectorXd apply_transform(const InputTransform& t, const Eigen::VectorXd& features);
Eigen::MatrixXd apply_transform(const InputTransform& t, const Eigen::MatrixXd& features);

/// log-floor then standardize one spectrum's fluxes.
Eigen::VectorXd featurize(const InputTransform& t, const Eigen::VectorXd& fluxes);

struct NoiseConfig {
    double sigma = 0.05;  // std dev in standardized units
    std::uint64_t seed = 0;
};

/// Elementwise N(0, sigma^2) perturbation. Meant for training inputs only;
/// validation, test and inference inputs stay clean.
Eigen::MatrixXd add_noise(Eigen::MatrixXd features, const NoiseConfig& cfg);

/// Linear min-max map fitted on training targets.
struct MinMaxScaler {
    double lo = 0.0;
    double hi = 1.0;
    double scale(double x) const { return (x - lo) / (hi - lo); }
    double unscale(double y) const { return lo + y * (hi - lo); }
};

/// Binding energies and densities never share a scaler; their magnitudes
/// differ by orders of magnitude and a joint scale would drown the smaller.
struct OutputScalers {
    MinMaxScaler energy;   // |delta_H| [J/mol]
    MinMaxScaler density;  // N_T [sites/m^3]
};

OutputScalers fit_output_scalers(const std::vector<double>& abs_energies,
                                 const std::vector<double>& densities);

/// [e_1..e_k, n_1..n_k], each coordinate scaled into [0,1] by its scaler.
Eigen::VectorXd scale_targets(const std::vector<TrapSpec>& traps, const OutputScalers& s);

struct UnscaledTargets {
    std::vector<double> abs_energies;  // J/mol
    std::vector<double> densities;     // sites/m^3
    bool extrapolated = false;         // any scaled coordinate fell outside [0,1]
};

/// Inverse of scale_targets; out-of-range coordinates are mapped without
/// clamping and flagged.
UnscaledTargets unscale_targets(const Eigen::VectorXd& scaled, const OutputScalers& s);

}  // namespace tds
