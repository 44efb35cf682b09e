#pragma once

#include <span>
#include <string>
#include <unordered_map>

#include "abx/weblog.hpp"

namespace abx {

// Per-category baseline click rates estimated from A/A-stage sessions.
struct CategoryBaselines {
    std::unordered_map<int, double> mean_clicks;  // categoryId -> clicks/session

    bool has(int category_id) const { return mean_clicks.count(category_id) != 0; }
    double at(int category_id) const;

    // CSV with header `categoryId,catClickRateAA`, rows sorted by categoryId.
    void write_csv(const std::string& path) const;
    static CategoryBaselines read_csv(const std::string& path);
};

// Default: per category, average clicks within each user first, then average
// the user means. pooled=true instead averages all of a category's sessions
// directly (the --pooled-baseline variant).
CategoryBaselines compute_category_baselines(std::span<const ListingSession> aa_sessions,
                                             bool pooled = false);

}  // namespace abx
