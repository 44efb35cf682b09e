#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abx/baselines.hpp"
#include "abx/stats.hpp"
#include "abx/taxonomy.hpp"
#include "abx/weblog.hpp"

namespace abx {

// Columnar session table with interned users; the working form for model
// fitting. Browser families ride along per user when known (in-memory
// pipelines fill them; CSV loads can attach them from the ua-map side file).
struct SessionFrame {
    struct Row {
        int32_t user = 0;   // index into users
        int32_t category_id = 0;
        int32_t zone_id = -1;
        int16_t page_no = 1;
        int16_t items_per_page = 15;
        int8_t logged_in = 0;
        int8_t treat = 0;
        int32_t clicks = 0;
        int64_t ts_ms = 0;
        Stage stage = Stage::AA;
    };

    std::vector<Row> rows;
    std::vector<std::string> users;            // dense index -> anonyId
    std::vector<std::string> user_ua_family;   // parallel to users; may be empty

    static SessionFrame from_sessions(std::span<const ListingSession> sessions);
    static SessionFrame read_csv(const std::string& path);

    void attach_ua_map(const std::unordered_map<std::string, std::string>& ua_by_user);

    SessionFrame filter_stage(Stage stage) const;
    int64_t count_stage(Stage stage) const;

    // Per-user double-assignment flags over the frame's AB rows, dense user
    // index order.
    std::vector<uint8_t> double_assignment_flags() const;
    ReassignmentStats reassignment_stats() const;
};

struct ModelSpec {
    std::string response = "clicks";
    // Vocabulary: treat, pageNo, itemsPerPage, isLogin, catClickRateAA,
    // zone, treat:zone, isDoubleAssigned. Interactions must reference
    // declared regressors.
    std::vector<std::string> regressors;
    CovChoice covariance = CovChoice::Clustered;
    std::optional<int> zone_filter;
    std::optional<Stage> stage_filter;
};

struct BuildResult {
    DesignMatrix design;
    int64_t rows_used = 0;
    int64_t dropped_missing_baseline = 0;
};

// Intercept first, categorical zone expanded against the lowest present zone,
// interactions as elementwise products, clusters = user ids.
BuildResult build_design(const SessionFrame& frame, const ModelSpec& spec,
                         const CategoryBaselines* baselines,
                         const std::vector<uint8_t>* double_flags = nullptr);

struct FitResult {
    std::string model_name;
    RegressionFit fit;
    std::vector<CoefficientTest> tests;  // per the model's covariance choice
    CovChoice covariance = CovChoice::Clustered;
    int64_t rows_used = 0;
    int64_t dropped_missing_baseline = 0;
};

// clicks ~ 1 + treat, clustered by user.
FitResult fit_simple_model(const SessionFrame& ab);

// clicks ~ 1 + treat + pageNo + itemsPerPage + isLogin + catClickRateAA.
FitResult fit_full_model(const SessionFrame& ab, const CategoryBaselines& baselines);

struct ZoneFits {
    std::map<int, FitResult> fits;                       // by zoneId
    std::vector<std::pair<int, std::string>> skipped;    // zoneId, reason
};

// The full model per zone subset.
ZoneFits fit_zone_models(const SessionFrame& ab, const CategoryBaselines& baselines,
                         const Taxonomy& taxonomy);

// Pooled model with zone main effects and treat:zone interactions; the
// per-zone implied effect is treat + its interaction (reference zone: lowest
// zoneId present).
FitResult fit_combined_zone_model(const SessionFrame& ab, const CategoryBaselines& baselines,
                                  const Taxonomy& taxonomy);

// Full model plus the isDoubleAssigned main effect (no treat interaction).
FitResult fit_double_assigned_model(const SessionFrame& ab, const CategoryBaselines& baselines,
                                    const ReassignmentStats& stats);

struct PlaceboReport {
    std::vector<CoefficientTest> category_tests;  // one per category-count regressor
    int64_t users = 0;
    int significant_05 = 0;
    double fraction_significant = 0.0;
    double bonferroni_threshold = 0.0;
    bool pass = true;
    bool separation_warning = false;

    std::string to_json() const;
};

// Logistic regression of user-level treatment assignment on browser family
// and per-category page-view counts over A/A sessions.
PlaceboReport placebo_test(const SessionFrame& aa);

struct SweepRow {
    double true_ate = 0.0;
    double ols_est = 0.0;
    double glm_est = 0.0;
    double ols_se = 0.0;
    double glm_se = 0.0;
    double ratio = 0.0;  // ols_se / glm_se
    double ols_lower = 0.0, ols_upper = 0.0;
    double glm_lower = 0.0, glm_upper = 0.0;
};

// Two-group OLS vs Poisson comparison per grid point. GLM interval via the
// +-2SE banding of the treatment coefficient mapped through the response;
// glm_se is a quarter of that interval. delta_method switches to the
// first-order variance instead.
std::vector<SweepRow> ols_vs_poisson_sweep(int64_t n_per_arm, double lambda0,
                                           const std::vector<double>& ate_grid, uint64_t seed,
                                           bool delta_method = false);

struct UpliftProjection {
    double ate = 0.0;
    double se = 0.0;
    double daily_sessions = 0.0;
    double expected_daily_views = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
};

// expected = ate * dailySessions; 95% bounds with the 1.959964 multiplier.
UpliftProjection project_daily_uplift(double ate, double se, double daily_sessions);

}  // namespace abx
