#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "json.hpp"

namespace reid {

inline constexpr std::string_view kToolVersion = "0.1.0";

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Everything needed to rerun a command bit-exactly. Wall-clock duration is
/// kept out of the JSON form so reruns produce identical manifests.
struct RunManifest {
    std::string command;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::string panel_hash;
    std::map<std::string, std::string> input_hashes;
    std::string tool_version{kToolVersion};
    double duration_seconds = 0.0;

    /// First 16 hex digits of the SHA-256 of to_json().
    std::string id() const;
    nlohmann::json to_json() const;
};

}  // namespace reid
