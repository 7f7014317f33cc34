#pragma once

#include <nlohmann/json.hpp>

#include <string>

namespace dqlens {

// Canonical serialization used for digests, logs, snapshots and frames:
// keys sorted, no whitespace, integers verbatim, floating point values with
// 17 significant digits ("%.17g"), non-finite numbers as null.
std::string canonical_dump(const nlohmann::json& value);
void canonical_dump(const nlohmann::json& value, std::string& out);

// SHA-256 (hex) of canonical_dump(value).
std::string canonical_digest(const nlohmann::json& value);

}  // namespace dqlens
