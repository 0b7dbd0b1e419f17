#include "tdskit/spectrum.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace tds {
namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_spectrum_csv(const Spectrum& spectrum, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);

    out << "temperature_K,flux_mol_m2_s";
    for (Eigen::Index i = 0; i < spectrum.trap_contributions.cols(); ++i) {
        out << ",J_T_" << (i + 1);
    }
    out << "\n";
    for (Eigen::Index r = 0; r < spectrum.size(); ++r) {
        out << format_double(spectrum.temperatures(r)) << ","
            << format_double(spectrum.fluxes(r));
        for (Eigen::Index i = 0; i < spectrum.trap_contributions.cols(); ++i) {
            out << "," << format_double(spectrum.trap_contributions(r, i));
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

Spectrum read_spectrum_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);

    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t n_cols = 0;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> fields;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
                fields.push_back(v);
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (rows.empty() && line_no == 1) continue;  // header row
            throw IoError(path + ":" + std::to_string(line_no) + ": non-numeric row");
        }
        if (fields.size() < 2) {
            throw IoError(path + ":" + std::to_string(line_no) +
                          ": expected at least temperature and flux columns");
        }
        if (n_cols == 0) n_cols = fields.size();
        if (fields.size() != n_cols) {
            throw IoError(path + ":" + std::to_string(line_no) + ": ragged row");
        }
        rows.push_back(std::move(fields));
    }
    if (rows.size() < 2) throw IoError(path + ": fewer than two data rows");

    Spectrum s;
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index extra = static_cast<Eigen::Index>(n_cols) - 2;
    s.temperatures.resize(n);
    s.fluxes.resize(n);
    s.trap_contributions.resize(n, extra);
    for (Eigen::Index r = 0; r < n; ++r) {
        s.temperatures(r) = rows[r][0];
        s.fluxes(r) = rows[r][1];
        for (Eigen::Index i = 0; i < extra; ++i) s.trap_contributions(r, i) = rows[r][2 + i];
    }
    return s;
}

}  // namespace tds
