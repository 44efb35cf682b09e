#include "abx/baselines.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <vector>

#include "abx/error.hpp"

namespace abx {

double CategoryBaselines::at(int category_id) const {
    auto it = mean_clicks.find(category_id);
    if (it == mean_clicks.end())
        throw_model("no baseline for categoryId " + std::to_string(category_id));
    return it->second;
}

void CategoryBaselines::write_csv(const std::string& path) const {
    std::map<int, double> sorted(mean_clicks.begin(), mean_clicks.end());
    std::ofstream out(path);
    if (!out) throw_io("cannot write baselines file: " + path);
    out << "categoryId,catClickRateAA\n";
    char buf[64];
    for (const auto& [id, v] : sorted) {
        std::snprintf(buf, sizeof buf, "%d,%.17g\n", id, v);
        out << buf;
    }
    if (!out) throw_io("write failed: " + path);
}

CategoryBaselines CategoryBaselines::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open baselines file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw_io(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "categoryId,catClickRateAA")
        throw_io(path + ":1: expected header 'categoryId,catClickRateAA'");
    CategoryBaselines b;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw_io(path + ":" + std::to_string(line_no) + ": expected 2 fields");
        try {
            int id = std::stoi(line.substr(0, comma));
            double v = std::stod(line.substr(comma + 1));
            if (v < 0.0) throw_io(path + ":" + std::to_string(line_no) + ": negative rate");
            if (!b.mean_clicks.emplace(id, v).second)
                throw_io(path + ":" + std::to_string(line_no) + ": duplicate categoryId " +
                         std::to_string(id));
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            throw_io(path + ":" + std::to_string(line_no) + ": bad numeric field");
        }
    }
    return b;
}

CategoryBaselines compute_category_baselines(std::span<const ListingSession> aa_sessions,
                                             bool pooled) {
    if (aa_sessions.empty()) throw_model("compute_category_baselines: no sessions");

    CategoryBaselines out;
    if (pooled) {
        std::unordered_map<int, std::pair<double, int64_t>> acc;  // cat -> (sum, n)
        for (const auto& s : aa_sessions) {
            auto& a = acc[s.category_id];
            a.first += s.clicks;
            a.second += 1;
        }
        for (const auto& [cat, a] : acc) out.mean_clicks[cat] = a.first / a.second;
        return out;
    }

    // Per-user session means first, then the mean of user means per category.
    struct UserAcc {
        double sum = 0;
        int64_t n = 0;
    };
    std::unordered_map<int, std::unordered_map<std::string, UserAcc>> acc;
    for (const auto& s : aa_sessions) {
        auto& u = acc[s.category_id][s.anony_id];
        u.sum += s.clicks;
        u.n += 1;
    }
    for (const auto& [cat, users] : acc) {
        double sum_of_means = 0;
        for (const auto& [id, u] : users) sum_of_means += u.sum / u.n;
        out.mean_clicks[cat] = sum_of_means / users.size();
    }
    return out;
}

}  // namespace abx
