#pragma once

// Versioned JSON container shared by every saved model:
//   {"format": "cdcp-checkpoint", "version": 1, "kind": ..., "payload": {...}}
// Doubles are written in shortest round-trip form, so load followed by save
// reproduces the file byte for byte.

#include <string>

#include <json.hpp>

namespace cdcp::checkpoint {

inline constexpr const char* kFormat = "cdcp-checkpoint";
inline constexpr int kVersion = 1;

std::string serialize(const std::string& kind, const nlohmann::json& payload);

// Throws FormatError for malformed text or a different kind, VersionError for
// a different version.
nlohmann::json parse(const std::string& text, const std::string& kind);

void save(const std::string& path, const std::string& kind, const nlohmann::json& payload);
nlohmann::json load(const std::string& path, const std::string& kind);

}  // namespace cdcp::checkpoint
