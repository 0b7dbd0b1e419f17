#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "tdskit/datagen.hpp"
#include "tdskit/fem.hpp"
#include "tdskit/params.hpp"
#include "tdskit/preprocess.hpp"

namespace tds {

// Internal JSON schema helpers shared by dataset files, model bundles and
// tooling metadata. Keys carry explicit SI unit suffixes (energies in J/mol,
// densities in sites/m^3); user-facing kJ/mol conversion lives in the config
// loader, not here.

using ojson = nlohmann::ordered_json;

std::string to_string(ModelVariant v);
ModelVariant variant_from_string(const std::string& s);

ojson material_to_json(const MaterialParams& m);
MaterialParams material_from_json(const ojson& j);

ojson test_to_json(const TestParams& t);
TestParams test_from_json(const ojson& j);

ojson numerical_to_json(const NumericalParams& n);
NumericalParams numerical_from_json(const ojson& j);

ojson generation_to_json(const GenerationConfig& g);
GenerationConfig generation_from_json(const ojson& j);

ojson transform_to_json(const InputTransform& t);
InputTransform transform_from_json(const ojson& j);

ojson scalers_to_json(const OutputScalers& s);
OutputScalers scalers_from_json(const ojson& j);

/// FNV-1a 64-bit hex digest; used to stamp output artifacts with the exact
/// configuration that produced them.
std::string fnv1a_hex(const std::string& text);

}  // namespace tds
