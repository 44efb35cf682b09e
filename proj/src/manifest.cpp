#include "abx/manifest.hpp"

#include <cstdio>
#include <fstream>

#include "abx/error.hpp"

namespace abx {

uint64_t fnv1a64(const void* data, std::size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::string RunManifest::to_json() const {
    std::string out = "{\n";
    char buf[256];
    out += "  \"command\": \"" + command + "\",\n";
    out += "  \"toolVersion\": \"" + tool_version + "\",\n";
    std::snprintf(buf, sizeof buf, "  \"configHash\": \"%016llx\",\n",
                  static_cast<unsigned long long>(config_hash));
    out += buf;
    std::snprintf(buf, sizeof buf, "  \"seed\": %llu,\n", static_cast<unsigned long long>(seed));
    out += buf;
    auto dump_pairs = [&](const char* key,
                          const std::vector<std::pair<std::string, std::string>>& pairs) {
        out += std::string("  \"") + key + "\": {";
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            out += "\"" + pairs[i].first + "\": \"" + pairs[i].second + "\"";
            if (i + 1 < pairs.size()) out += ", ";
        }
        out += "},\n";
    };
    dump_pairs("inputs", inputs);
    dump_pairs("outputs", outputs);
    out += "  \"rowCounts\": {";
    for (std::size_t i = 0; i < row_counts.size(); ++i) {
        std::snprintf(buf, sizeof buf, "\"%s\": %lld", row_counts[i].first.c_str(),
                      static_cast<long long>(row_counts[i].second));
        out += buf;
        if (i + 1 < row_counts.size()) out += ", ";
    }
    out += "},\n";
    std::snprintf(buf, sizeof buf, "  \"durationSeconds\": %.3f\n", duration_seconds);
    out += buf;
    out += "}\n";
    return out;
}

void RunManifest::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw_io("cannot write manifest: " + path);
    out << to_json();
    if (!out) throw_io("write failed: " + path);
}

}  // namespace abx
