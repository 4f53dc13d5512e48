#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "csac/adam.hpp"
#include "csac/mlp.hpp"

namespace csac {

using Json = nlohmann::json;

inline constexpr int kCheckpointFormatVersion = 1;

/// {"format_version", "layer_sizes", "layers": [{"weight": [...], "bias": [...]}]}
/// Weights are row-major (out x in). Doubles are written with round-trip
/// precision, so save/load is value-exact.
Json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const Json& j);

/// {"steps", "learning_rate", "beta1", "beta2", "epsilon", "m", "v"}
Json adam_to_json(const Adam& opt);
Adam adam_from_json(const Json& j);

/// Network plus optimizer in one document.
Json network_checkpoint(const Mlp& net, const Adam& opt);

/// Throws ValidationError if the document is missing or has another format_version.
void check_format_version(const Json& j);

void save_json(const std::filesystem::path& path, const Json& j);
Json load_json(const std::filesystem::path& path);

}  // namespace csac
