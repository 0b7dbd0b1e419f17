#pragma once

namespace tds {

/// Physical constants. Single authoritative definition, used everywhere.
namespace constants {

inline constexpr double gas_constant = 8.314;   // J/(mol K)
inline constexpr double avogadro = 6.022e23;    // 1/mol
inline constexpr double molar_mass_h = 1.008;   // g/mol

}  // namespace constants

}  // namespace tds
