#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tdskit/datagen.hpp"
#include "tdskit/nn.hpp"
#include "tdskit/preprocess.hpp"

namespace tds {

struct TrainOptions {
    NoiseConfig noise;                       // training-input augmentation
    std::uint64_t seed = 0;                  // weight init, shuffling, splits
    double validation_fraction = 0.2;
    int batch_size = 32;
    int classifier_epochs_per_output = 100;  // total = value * n_classes
    int regressor_epochs_per_output = 200;   // total = value * 2k
    double lr = 1e-3;
    double weight_decay = 1e-3;
    int threads = 1;                         // networks trained in parallel
};

struct BundleMetadata {
    GenerationConfig generation;
    MaterialParams material;
    TestParams test;
    NumericalParams numerical;
    ModelVariant variant = ModelVariant::McNabbFoster;
    NoiseConfig noise;
    std::uint64_t train_seed = 0;
    std::vector<std::uint64_t> dataset_seeds;
    std::map<int, long> points_per_count;
    double classifier_val_loss = 0.0;
    std::map<int, double> regressor_val_loss;
    std::string config_hash;
    std::int64_t created_unix_s = 0;
};

/// Everything needed to turn a measured spectrum into trap parameters:
/// count classifier, one regressor per count, the frozen input transform and
/// per-regressor output scalers.
struct ModelBundle {
    int max_traps = 0;
    Eigen::VectorXd temperature_grid;        // K, the network input grid
    Mlp classifier;
    std::map<int, Mlp> regressors;           // keyed by trap count 1..max_traps
    InputTransform input_transform;
    std::map<int, OutputScalers> output_scalers;
    BundleMetadata metadata;
};

struct TrapPrediction {
    int n_traps = 0;
    std::vector<double> delta_H;       // J/mol, negative, ascending |delta_H|
    std::vector<double> N_T;           // sites/m^3, aligned with delta_H
    Eigen::VectorXd probabilities;     // classifier output per count
    bool low_confidence = false;       // max class probability below 0.5
    bool extrapolated = false;         // regressor output left the scaler range
};

/// Trains the classifier on the combined suite and one regressor per trap
/// count. The input transform is fitted on the combined training split;
/// Gaussian noise augments training inputs only.
ModelBundle train_bundle(const std::vector<Dataset>& suite, const TrainOptions& opts);

/// Two-stage inference on a spectrum already sampled on the bundle grid
/// (see resample_spectrum). Classifier argmax picks the count (ties break
/// toward fewer traps), then that count's regressor recovers parameters.
TrapPrediction infer(const Spectrum& spectrum, const ModelBundle& bundle);

struct ResampleResult {
    Spectrum spectrum;
    bool coverage_warning = false;  // grid reached outside the raw data range
};

/// Linear interpolation of raw (temperature, flux) pairs onto a grid; points
/// outside the raw range take the flux floor. Needs at least two rows.
ResampleResult resample_spectrum(std::vector<std::pair<double, double>> raw,
                                 const Eigen::VectorXd& grid, double floor = 1e-10);

/// Single-document JSON persistence; numeric arrays round-trip bit exactly.
void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

}  // namespace tds
