#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdskit/fem.hpp"
#include "tdskit/rng.hpp"

namespace tds {

/// Allowable ranges for one randomly generated trap.
struct TrapRanges {
    double energy_min = 50e3;   // |delta_H| [J/mol]
    double energy_max = 150e3;
    double density_min = 0.1;   // N_T [mol/m^3]
    double density_max = 10.0;
};

struct GenerationConfig {
    int max_traps = 4;
    TrapRanges base;
    std::optional<TrapRanges> first_trap;  // two-step variant: trap 1 draws from here
    double min_separation = 10e3;          // minimum |delta_H| gap within a sample [J/mol]
    int rejection_cap = 1000;              // redraw attempts per trap
    std::uint64_t seed = 0;

    void validate() const;
};

struct ExhaustedRetriesError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Solver failure during generation, with the offending trap set attached
/// for triage.
struct DataGenError : std::runtime_error {
    DataGenError(const std::string& msg, std::vector<TrapSpec> traps_)
        : std::runtime_error(msg), traps(std::move(traps_)) {}
    std::vector<TrapSpec> traps;
};

struct DataPoint {
    int n_traps = 0;
    std::vector<TrapSpec> traps;  // sorted ascending |delta_H|
    Spectrum spectrum;
};

struct Dataset {
    int trap_count = 0;  // traps per point; 0 marks a mixed-count set
    std::vector<DataPoint> points;
    GenerationConfig generation;
    MaterialParams material;
    TestParams test;
    NumericalParams numerical;
    ModelVariant variant = ModelVariant::McNabbFoster;
    std::uint64_t stream_tag = 0;  // substream family the points drew from
};

/// Substream tag reserved for the held-out test set.
inline constexpr std::uint64_t kTestSetStreamTag = 1ULL << 32;

/// Draws k traps: |delta_H| uniform in range (trap 1 from the override when
/// configured), redrawn until every pairwise gap is at least min_separation;
/// density uniform in range; E_t = E_L and nu_t = nu_d = nu from the
/// material. Output sorted ascending |delta_H|.
std::vector<TrapSpec> generate_trap_set(int k, const GenerationConfig& cfg,
                                        const MaterialParams& mat, rng::Stream& stream);

/// n_points labeled spectra with k traps each. Work fans out across threads;
/// every point draws from its own counter-based substream, so the output is
/// identical no matter how the work is scheduled.
Dataset generate_dataset(int n_points, int k, const GenerationConfig& cfg,
                         const MaterialParams& mat, const TestParams& test,
                         const NumericalParams& np, ModelVariant variant, int threads = 1,
                         std::uint64_t stream_tag = 0);

struct SuiteResult {
    std::vector<Dataset> training;  // one dataset per trap count 1..max_traps
    Dataset test_set;               // mixed counts, cycling 1..max_traps
};

/// One training dataset per trap count plus a held-out mixed test set.
SuiteResult generate_suite(const GenerationConfig& cfg, const MaterialParams& mat,
                           const TestParams& test, const NumericalParams& np,
                           ModelVariant variant, int points_per_count, int test_points = 500,
                           int threads = 1);

/// JSON-lines persistence: one metadata header line, then one point per line.
void write_dataset_jsonl(const Dataset& dataset, const std::string& path);
Dataset read_dataset_jsonl(const std::string& path);

}  // namespace tds
