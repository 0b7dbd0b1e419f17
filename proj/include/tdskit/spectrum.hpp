#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace tds {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A desorption spectrum: boundary flux sampled at evenly spaced temperatures
/// over the heating ramp. The universal exchange object between the solver,
/// datasets and the networks.
struct Spectrum {
    Eigen::VectorXd temperatures;        // K, strictly increasing
    Eigen::VectorXd fluxes;              // mol/(m^2 s), per unit area of one face
    Eigen::MatrixXd trap_contributions;  // rows x n_traps release rates; 0 cols when untracked

    Eigen::Index size() const { return temperatures.size(); }
    double peak_flux() const { return fluxes.size() ? fluxes.maxCoeff() : 0.0; }
};

/// Writes `temperature_K,flux_mol_m2_s[,J_T_1,...]` rows in full double
/// precision. Throws IoError when the file cannot be written.
void write_spectrum_csv(const Spectrum& spectrum, const std::string& path);

/// Reads a spectrum CSV. Accepts the exact format written by
/// write_spectrum_csv and, for experimental data, any comma-separated file
/// whose first two columns are temperature [K] and flux [mol/(m^2 s)] with a
/// single header line.
Spectrum read_spectrum_csv(const std::string& path);

}  // namespace tds
