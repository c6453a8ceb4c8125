#pragma once

#include <string>
#include <variant>

#include <json.hpp>

#include "perispec/absorbed.hpp"
#include "perispec/certify.hpp"
#include "perispec/semigroup.hpp"

namespace perispec {

// A loaded model file: either an absorbed-chain model (variants "explicit",
// "lazy_chain", "birth_death", "density") or a continuous-time generator
// (variant "generator"). Lazy-chain files may carry the dominating pair
// (mu, a) used by the lazy-chain certificate.
struct LoadedModel {
    std::variant<AbsorbedModel, SubMarkovGenerator> payload;
    Eigen::VectorXd mu;  // optional dominating measure (size 0 = absent)
    double a = 0.0;      // optional domination constant
};

// Parses a model JSON with a "variant" discriminator. Validation errors name
// the offending field and state index.
LoadedModel load_model(const std::string& path);
LoadedModel parse_model(const nlohmann::json& j);

// Exact serialization (doubles round-trip bit-for-bit through JSON).
nlohmann::json serialize_model(const AbsorbedModel& model);
nlohmann::json serialize_model(const SubMarkovGenerator& gen);

nlohmann::json certificate_to_json(const Certificate& cert);
nlohmann::json decomposition_to_json(const PeripheralDecomposition& dec);

// Deterministic CSV cell for a double: printf %.17g (17 significant digits,
// enough to reproduce the bits exactly).
std::string format_double(double v);

}  // namespace perispec
