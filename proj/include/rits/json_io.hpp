#pragma once

#include "rits/core.hpp"
#include "rits/inference.hpp"
#include "rits/policy.hpp"

#include <json.hpp>

namespace rits {

using Json = nlohmann::json;

/// Every TrialConfig field under its own name. rho_mode is a string.
Json to_json(const TrialConfig& config);
/// Missing fields keep their defaults; unknown fields and type mismatches
/// raise ConfigError naming the field. The result is validated.
TrialConfig config_from_json(const Json& j, TrialConfig base = {});

/// {"name": "rits", "w": 0.5}
Json to_json(const PolicyKind& policy);
PolicyKind policy_from_json(const Json& j);

Json to_json(const CsPoint& p);
Json to_json(const CsSeries& s);

/// Parses text, reporting malformed input as ValidationError.
Json parse_json(const std::string& text);

}  // namespace rits
