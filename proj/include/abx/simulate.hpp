#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "abx/taxonomy.hpp"
#include "abx/weblog.hpp"

namespace abx {

// Generative parameters for synthetic traffic. Per-category rates and
// per-zone additive treatment effects default to a calibrated mix (control
// session mean 0.305, session-weighted mean effect 0.011); any value can be
// overridden through the key/value config format (see from_file).
struct ExperimentConfig {
    uint64_t seed = 42;
    int64_t n_users = 200000;
    int aa_days = 5;
    int ab_days = 20;
    int64_t start_ms = 1459468800000;  // 2016-04-01T00:00:00Z

    double visit_rate_per_user_per_day = 0.5;  // mean visits per user per day
    double visit_count_sigma = 1.0;            // log-normal sigma of per-user visit counts
    int max_visits_per_user = 1500;
    double span_scale_hours = 36.0;   // active-span scale ...
    double span_power = 0.4;          // ... grows as visits^power
    double span_sigma = 0.9;          // log-normal jitter on the span
    double cookie_expiry_hours = 90.0;
    double assign_prob = 0.5;
    double usage_click_boost = 0.018;  // per-user rate shift ~ log visit count
    double logged_in_prob = 0.25;
    double bot_fraction = 0.001;
    double bot_declared_share = 0.5;
    int bot_flood_visits = 300;
    double pixel_loss_prob = 0.002;
    std::vector<double> page_count_dist = {0.62, 0.18, 0.09, 0.05, 0.03, 0.02, 0.01};
    int items_per_page_max = 15;
    double items_full_prob = 0.78;
    double control_mean_target = 0.305;  // session-weighted control click rate

    Taxonomy taxonomy;                   // defaults to builtin_taxonomy()
    std::map<int, double> zone_ate;      // zoneId -> additive effect
    std::map<int, double> zone_weight;   // zoneId -> traffic share
    std::map<int, double> cat_lambda;    // categoryId -> control rate
    std::map<int, double> cat_weight;    // categoryId -> weight within zone

    int64_t cutover_ms() const { return start_ms + int64_t(aa_days) * 86400000; }
    int64_t end_ms() const { return cutover_ms() + int64_t(ab_days) * 86400000; }

    static ExperimentConfig defaults();

    // Flat dotted-key config file (`sim.nUsers=200000`, `zone.6.ate=0.029`,
    // `cat.601.lambda=0.40`); '#' starts a comment. Unknown keys are config
    // errors. Starts from defaults().
    static ExperimentConfig from_file(const std::string& path);
    void apply_key(const std::string& key, const std::string& value);

    // Regenerates zone weights/effects and per-category rates for the current
    // taxonomy and control_mean_target. Explicit overrides go on top.
    void rebuild_category_tables();

    // Canonical key/value dump; hashing this gives the config hash.
    std::string dump() const;

    void validate() const;  // config errors name the offending zone/category
};

struct SimCounts {
    uint64_t records = 0;
    uint64_t renders = 0;
    uint64_t beacons = 0;
    uint64_t clicks = 0;
    uint64_t bot_records = 0;
    uint64_t bot_beacons = 0;
    uint64_t pixel_lost = 0;
    uint64_t sessions_aa = 0;  // non-bot beacons by stage
    uint64_t sessions_ab = 0;
};

// Emits the full record stream, interleaved by timestamp, to `sink`.
// Deterministic for a given config: per-user substreams make the output
// independent of `threads`.
SimCounts simulate_experiment(const ExperimentConfig& cfg,
                              const std::function<void(const WebLogRecord&)>& sink,
                              int threads = 1);

// Convenience: simulate, then run the cleaning pipeline in memory (bot
// filter, sessionization, zone resolution). Used by tests and calibration.
std::vector<ListingSession> simulate_sessions(const ExperimentConfig& cfg, CleaningReport& report,
                                              int threads = 1);

struct CalibrationResult {
    ExperimentConfig config;
    double fraction_users_double = 0.0;
    double fraction_sessions_double = 0.0;
    int iterations = 0;
};

// Bisection on the visit rate until the double-assignment fractions land in
// [0.17,0.27] (users) and [0.33,0.43] (sessions). Measured on a reduced user
// count for speed; throws with the achieved fractions when unreachable.
CalibrationResult calibrate_reassignment(ExperimentConfig cfg, int64_t probe_users = 30000,
                                         int max_iterations = 18, int threads = 1);

}  // namespace abx
