#pragma once

#include <vector>

#include "tdskit/fem.hpp"

namespace tds::testing {

// Shared reference setup for solver verification: a bcc iron plate on a slow
// ramp with three traps spread across the release window. Chosen so that the
// recorded flux is carried at temperatures where the boundary penalty is
// strong and the profiles are well resolved on the default mesh.
inline MaterialParams bcc_material() { return MaterialParams{}; }

inline TestParams reference_test() {
    return TestParams{0.012, 2700.0, 100.0 / 3600.0, 293.15, 873.15};
}

inline std::vector<TrapSpec> reference_traps(const MaterialParams& mat) {
    return {
        TrapSpec::with_material_defaults(-45e3, 5.0 * constants::avogadro, mat),
        TrapSpec::with_material_defaults(-60e3, 1.5 * constants::avogadro, mat),
        TrapSpec::with_material_defaults(-80e3, 0.9 * constants::avogadro, mat),
    };
}

inline double max_abs_dev(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace tds::testing
