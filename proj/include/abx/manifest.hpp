#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace abx {

uint64_t fnv1a64(const void* data, std::size_t len);
inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// One manifest per command run: what ran, on which inputs, with which config
// hash and seed, and the row counts at each stage.
struct RunManifest {
    std::string command;
    std::string tool_version = "0.1.0";
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> inputs;
    std::vector<std::pair<std::string, std::string>> outputs;
    std::vector<std::pair<std::string, int64_t>> row_counts;
    double duration_seconds = 0.0;

    std::string to_json() const;
    void write(const std::string& path) const;
};

}  // namespace abx
