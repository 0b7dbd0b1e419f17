#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdskit/datagen.hpp"
#include "tdskit/preprocess.hpp"
#include "tdskit/psofit.hpp"

namespace tds {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingSection {
    int points_per_count = 2000;
    int test_points = 500;
    double validation_fraction = 0.2;
    int batch_size = 32;
    int classifier_epochs_per_output = 100;
    int regressor_epochs_per_output = 200;
    double lr = 1e-3;
    double weight_decay = 1e-3;
};

/// One declarative run configuration. Energies enter in kJ/mol and heating
/// rates in K/s or degC/h; everything is converted to SI on load and echoed
/// back in SI.
struct RunConfig {
    std::uint64_t seed = 0;
    ModelVariant variant = ModelVariant::McNabbFoster;
    MaterialParams material;
    TestParams test{};
    NumericalParams numerical;
    std::vector<TrapSpec> traps;               // for direct simulation
    std::optional<GenerationConfig> generation;
    TrainingSection training;
    NoiseConfig noise;
    std::optional<PsoConfig> pso;
    std::string config_hash;                   // over the raw file contents
};

/// Loads and validates a JSON run configuration. Errors name the offending
/// key and its expected unit.
RunConfig load_run_config(const std::string& path);

}  // namespace tds
