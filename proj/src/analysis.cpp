#include "abx/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "abx/error.hpp"
#include "abx/rng.hpp"

namespace abx {

SessionFrame SessionFrame::from_sessions(std::span<const ListingSession> sessions) {
    SessionFrame f;
    f.rows.reserve(sessions.size());
    std::unordered_map<std::string, int32_t> index;
    index.reserve(sessions.size() / 4 + 8);
    for (const auto& s : sessions) {
        auto [it, inserted] = index.emplace(s.anony_id, static_cast<int32_t>(f.users.size()));
        if (inserted) {
            f.users.push_back(s.anony_id);
            f.user_ua_family.push_back(s.ua_family);
        }
        Row r;
        r.user = it->second;
        r.category_id = s.category_id;
        r.zone_id = s.zone_id;
        r.page_no = static_cast<int16_t>(s.page_no);
        r.items_per_page = static_cast<int16_t>(s.items_per_page);
        r.logged_in = static_cast<int8_t>(s.logged_in);
        r.treat = static_cast<int8_t>(s.treat);
        r.clicks = s.clicks;
        r.ts_ms = s.ts_ms;
        r.stage = s.stage;
        f.rows.push_back(r);
    }
    return f;
}

SessionFrame SessionFrame::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open sessions file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw_io(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "sessionId,anonyId,treat,categoryId,zoneId,pageNo,itemsPerPage,isLoggedIn,clicks,ts,stage")
        throw_io(path + ":1: unexpected sessions header");

    SessionFrame f;
    std::unordered_map<std::string, int32_t> index;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::array<std::string_view, 11> fields;
        std::string_view sv(line);
        std::size_t start = 0;
        for (int i = 0; i < 11; ++i) {
            const std::size_t comma = sv.find(',', start);
            if (comma == std::string_view::npos && i < 10)
                throw_io(path + ":" + std::to_string(line_no) + ": expected 11 fields");
            fields[i] = sv.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                         : comma - start);
            start = comma + 1;
        }

        auto to_i64 = [&](std::string_view s) -> int64_t {
            int64_t v = 0;
            bool neg = false;
            std::size_t i = 0;
            if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
                neg = s[0] == '-';
                i = 1;
            }
            if (i == s.size()) throw_io(path + ":" + std::to_string(line_no) + ": bad numeric field");
            for (; i < s.size(); ++i) {
                if (s[i] < '0' || s[i] > '9')
                    throw_io(path + ":" + std::to_string(line_no) + ": bad numeric field");
                v = v * 10 + (s[i] - '0');
            }
            return neg ? -v : v;
        };

        const std::string anony(fields[1]);
        auto [it, inserted] = index.emplace(anony, static_cast<int32_t>(f.users.size()));
        if (inserted) {
            f.users.push_back(anony);
            f.user_ua_family.emplace_back();
        }
        Row r;
        r.user = it->second;
        r.treat = static_cast<int8_t>(to_i64(fields[2]));
        r.category_id = static_cast<int32_t>(to_i64(fields[3]));
        r.zone_id = static_cast<int32_t>(to_i64(fields[4]));
        r.page_no = static_cast<int16_t>(to_i64(fields[5]));
        r.items_per_page = static_cast<int16_t>(to_i64(fields[6]));
        r.logged_in = static_cast<int8_t>(to_i64(fields[7]));
        r.clicks = static_cast<int32_t>(to_i64(fields[8]));
        r.ts_ms = to_i64(fields[9]);
        if (fields[10] == "AA")
            r.stage = Stage::AA;
        else if (fields[10] == "AB")
            r.stage = Stage::AB;
        else
            throw_io(path + ":" + std::to_string(line_no) + ": bad stage field");
        f.rows.push_back(r);
    }
    return f;
}

void SessionFrame::attach_ua_map(const std::unordered_map<std::string, std::string>& ua_by_user) {
    for (std::size_t i = 0; i < users.size(); ++i) {
        auto it = ua_by_user.find(users[i]);
        if (it != ua_by_user.end()) user_ua_family[i] = it->second;
    }
}

SessionFrame SessionFrame::filter_stage(Stage stage) const {
    SessionFrame f;
    f.users = users;
    f.user_ua_family = user_ua_family;
    f.rows.reserve(rows.size());
    for (const auto& r : rows)
        if (r.stage == stage) f.rows.push_back(r);
    return f;
}

int64_t SessionFrame::count_stage(Stage stage) const {
    int64_t n = 0;
    for (const auto& r : rows) n += r.stage == stage;
    return n;
}

std::vector<uint8_t> SessionFrame::double_assignment_flags() const {
    std::vector<uint8_t> mask(users.size(), 0);
    for (const auto& r : rows)
        if (r.stage == Stage::AB) mask[r.user] |= r.treat ? 2 : 1;
    std::vector<uint8_t> flags(users.size(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i) flags[i] = mask[i] == 3 ? 1 : 0;
    return flags;
}

ReassignmentStats SessionFrame::reassignment_stats() const {
    std::vector<uint8_t> mask(users.size(), 0);
    int64_t ab_rows = 0;
    for (const auto& r : rows) {
        if (r.stage != Stage::AB) continue;
        ++ab_rows;
        mask[r.user] |= r.treat ? 2 : 1;
    }
    if (ab_rows == 0) throw_model("reassignment stats: no AB sessions");

    ReassignmentStats stats;
    int64_t ab_users = 0, double_users = 0, double_sessions = 0;
    std::vector<uint8_t> flags(users.size(), 0);
    for (std::size_t i = 0; i < users.size(); ++i) {
        if (mask[i] == 0) continue;
        ++ab_users;
        flags[i] = mask[i] == 3 ? 1 : 0;
        double_users += flags[i];
        stats.is_double_assigned.emplace(users[i], flags[i]);
    }
    for (const auto& r : rows)
        if (r.stage == Stage::AB) double_sessions += flags[r.user];
    stats.fraction_users_double = static_cast<double>(double_users) / static_cast<double>(ab_users);
    stats.fraction_sessions_double =
        static_cast<double>(double_sessions) / static_cast<double>(ab_rows);
    return stats;
}

namespace {

std::vector<int> present_zones(const SessionFrame& frame, const std::optional<Stage>& stage) {
    std::set<int> zones;
    for (const auto& r : frame.rows) {
        if (stage && r.stage != *stage) continue;
        zones.insert(r.zone_id);
    }
    return {zones.begin(), zones.end()};
}

}  // namespace

BuildResult build_design(const SessionFrame& frame, const ModelSpec& spec,
                         const CategoryBaselines* baselines,
                         const std::vector<uint8_t>* double_flags) {
    if (spec.response != "clicks") throw_model("unknown response '" + spec.response + "'");

    bool wants_zone = false, wants_treat_zone = false, wants_baseline = false,
         wants_double = false, wants_treat = false;
    for (const auto& reg : spec.regressors) {
        if (reg == "treat") wants_treat = true;
        else if (reg == "zone") wants_zone = true;
        else if (reg == "treat:zone") wants_treat_zone = true;
        else if (reg == "catClickRateAA") wants_baseline = true;
        else if (reg == "isDoubleAssigned") wants_double = true;
        else if (reg != "pageNo" && reg != "itemsPerPage" && reg != "isLogin")
            throw_model("unknown regressor '" + reg + "'");
    }
    if (wants_treat_zone && (!wants_treat || !wants_zone))
        throw_model("interaction treat:zone requires both treat and zone");
    if (wants_baseline && baselines == nullptr)
        throw_model("catClickRateAA requested without baselines");
    if (wants_double && double_flags == nullptr)
        throw_model("isDoubleAssigned requested without reassignment flags");

    // Pass 1: row selection.
    std::vector<int64_t> keep;
    keep.reserve(frame.rows.size());
    int64_t dropped_baseline = 0;
    for (std::size_t i = 0; i < frame.rows.size(); ++i) {
        const auto& r = frame.rows[i];
        if (spec.stage_filter && r.stage != *spec.stage_filter) continue;
        if (spec.zone_filter && r.zone_id != *spec.zone_filter) continue;
        if (wants_baseline && !baselines->has(r.category_id)) {
            ++dropped_baseline;
            continue;
        }
        keep.push_back(static_cast<int64_t>(i));
    }
    if (keep.empty()) throw_model("empty design: all rows filtered out");

    std::vector<int> zones;
    if (wants_zone) {
        std::set<int> zs;
        for (int64_t i : keep) zs.insert(frame.rows[static_cast<std::size_t>(i)].zone_id);
        zones.assign(zs.begin(), zs.end());  // ascending; first is the reference
    }

    std::vector<std::string> names;
    names.emplace_back("(Intercept)");
    // Column layout follows the declared regressor order.
    struct Col {
        enum Kind { Treat, PageNo, Items, Login, Baseline, ZoneDummy, TreatZone, Double } kind;
        int zone = 0;
    };
    std::vector<Col> cols;
    for (const auto& reg : spec.regressors) {
        if (reg == "treat") {
            cols.push_back({Col::Treat, 0});
            names.emplace_back("treat");
        } else if (reg == "pageNo") {
            cols.push_back({Col::PageNo, 0});
            names.emplace_back("pageNo");
        } else if (reg == "itemsPerPage") {
            cols.push_back({Col::Items, 0});
            names.emplace_back("itemsPerPage");
        } else if (reg == "isLogin") {
            cols.push_back({Col::Login, 0});
            names.emplace_back("isLogin");
        } else if (reg == "catClickRateAA") {
            cols.push_back({Col::Baseline, 0});
            names.emplace_back("catClickRateAA");
        } else if (reg == "zone") {
            for (std::size_t z = 1; z < zones.size(); ++z) {
                cols.push_back({Col::ZoneDummy, zones[z]});
                names.emplace_back("zone" + std::to_string(zones[z]));
            }
        } else if (reg == "treat:zone") {
            for (std::size_t z = 1; z < zones.size(); ++z) {
                cols.push_back({Col::TreatZone, zones[z]});
                names.emplace_back("treat:zone" + std::to_string(zones[z]));
            }
        } else if (reg == "isDoubleAssigned") {
            cols.push_back({Col::Double, 0});
            names.emplace_back("isDoubleAssigned");
        }
    }

    const int64_t n = static_cast<int64_t>(keep.size());
    const int64_t k = static_cast<int64_t>(cols.size()) + 1;

    BuildResult out;
    out.rows_used = n;
    out.dropped_missing_baseline = dropped_baseline;
    out.design.X.resize(n, k);
    out.design.y.resize(n);
    out.design.names = std::move(names);
    out.design.cluster.resize(static_cast<std::size_t>(n));

    for (int64_t row = 0; row < n; ++row) {
        const auto& r = frame.rows[static_cast<std::size_t>(keep[static_cast<std::size_t>(row)])];
        out.design.X(row, 0) = 1.0;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            double v = 0.0;
            switch (cols[c].kind) {
                case Col::Treat: v = r.treat; break;
                case Col::PageNo: v = r.page_no; break;
                case Col::Items: v = r.items_per_page; break;
                case Col::Login: v = r.logged_in; break;
                case Col::Baseline: v = baselines->at(r.category_id); break;
                case Col::ZoneDummy: v = r.zone_id == cols[c].zone ? 1.0 : 0.0; break;
                case Col::TreatZone: v = (r.zone_id == cols[c].zone && r.treat) ? 1.0 : 0.0; break;
                case Col::Double: v = (*double_flags)[static_cast<std::size_t>(r.user)]; break;
            }
            out.design.X(row, static_cast<Eigen::Index>(c + 1)) = v;
        }
        out.design.y(row) = r.clicks;
        out.design.cluster[static_cast<std::size_t>(row)] = r.user;
    }
    return out;
}

namespace {

FitResult run_ols_model(const SessionFrame& frame, const ModelSpec& spec,
                        const CategoryBaselines* baselines, const std::vector<uint8_t>* flags,
                        std::string name) {
    BuildResult built = build_design(frame, spec, baselines, flags);
    FitResult out;
    out.model_name = std::move(name);
    out.covariance = spec.covariance;
    out.rows_used = built.rows_used;
    out.dropped_missing_baseline = built.dropped_missing_baseline;
    out.fit = ols_fit(built.design);
    out.fit.n_clusters = 0;
    if (out.fit.cluster_cov) {
        std::set<int32_t> distinct(built.design.cluster.begin(), built.design.cluster.end());
        out.fit.n_clusters = static_cast<int64_t>(distinct.size());
    }
    out.tests = coefficient_tests(out.fit, spec.covariance);
    return out;
}

const std::vector<std::string> kFullRegressors = {"treat", "pageNo", "itemsPerPage", "isLogin",
                                                  "catClickRateAA"};

}  // namespace

FitResult fit_simple_model(const SessionFrame& ab) {
    ModelSpec spec;
    spec.regressors = {"treat"};
    return run_ols_model(ab, spec, nullptr, nullptr, "Basic");
}

FitResult fit_full_model(const SessionFrame& ab, const CategoryBaselines& baselines) {
    ModelSpec spec;
    spec.regressors = kFullRegressors;
    return run_ols_model(ab, spec, &baselines, nullptr, "Full");
}

ZoneFits fit_zone_models(const SessionFrame& ab, const CategoryBaselines& baselines,
                         const Taxonomy& taxonomy) {
    ZoneFits out;
    std::vector<int> zones = present_zones(ab, std::nullopt);
    for (int zid : zones) {
        ModelSpec spec;
        spec.regressors = kFullRegressors;
        spec.zone_filter = zid;
        std::string name = "Zone " + std::to_string(zid);
        try {
            name += " - " + taxonomy.zone_name(zid);
        } catch (const Error&) {
            // keep the numeric label for zones missing from the taxonomy
        }
        try {
            out.fits.emplace(zid, run_ols_model(ab, spec, &baselines, nullptr, name));
        } catch (const Error& e) {
            out.skipped.emplace_back(zid, e.what());
        }
    }
    return out;
}

FitResult fit_combined_zone_model(const SessionFrame& ab, const CategoryBaselines& baselines,
                                  const Taxonomy& taxonomy) {
    (void)taxonomy;
    std::vector<int> zones = present_zones(ab, std::nullopt);
    if (zones.size() < 2)
        throw_model("combined zone model needs at least 2 zones, found " +
                    std::to_string(zones.size()));
    ModelSpec spec;
    spec.regressors = {"zone", "treat", "treat:zone", "pageNo", "itemsPerPage", "isLogin",
                       "catClickRateAA"};
    return run_ols_model(ab, spec, &baselines, nullptr, "Combined zones");
}

FitResult fit_double_assigned_model(const SessionFrame& ab, const CategoryBaselines& baselines,
                                    const ReassignmentStats& stats) {
    std::vector<uint8_t> flags(ab.users.size(), 0);
    for (std::size_t i = 0; i < ab.users.size(); ++i) {
        auto it = stats.is_double_assigned.find(ab.users[i]);
        if (it != stats.is_double_assigned.end()) flags[i] = static_cast<uint8_t>(it->second);
    }
    ModelSpec spec;
    spec.regressors = {"treat", "pageNo", "itemsPerPage", "isLogin", "catClickRateAA",
                       "isDoubleAssigned"};
    return run_ols_model(ab, spec, &baselines, &flags, "Full + isDoubleAssigned");
}

PlaceboReport placebo_test(const SessionFrame& aa) {
    bool has_ua = false;
    for (const auto& fam : aa.user_ua_family)
        if (!fam.empty()) {
            has_ua = true;
            break;
        }
    if (!has_ua) throw_model("placebo test: browser families unavailable (attach a ua map)");

    // Per-user aggregation over AA rows: assignment label from the first AA
    // session, page-view counts per category.
    const std::size_t n_users_total = aa.users.size();
    std::vector<int64_t> first_ts(n_users_total, -1);
    std::vector<int8_t> label(n_users_total, -1);
    std::set<int> category_set;
    for (const auto& r : aa.rows) {
        if (r.stage != Stage::AA) continue;
        category_set.insert(r.category_id);
        if (first_ts[r.user] < 0 || r.ts_ms < first_ts[r.user]) {
            first_ts[r.user] = r.ts_ms;
            label[r.user] = r.treat;
        }
    }
    std::vector<int32_t> user_rows;  // dense user -> design row
    for (std::size_t u = 0; u < n_users_total; ++u)
        if (label[u] >= 0) user_rows.push_back(static_cast<int32_t>(u));
    if (user_rows.size() < 2) throw_model("placebo test: need at least 2 users with AA sessions");

    bool any_control = false, any_treat = false;
    for (int32_t u : user_rows) (label[u] ? any_treat : any_control) = true;
    if (!any_control || !any_treat)
        throw_model("placebo test: no variation in treatment assignment");

    std::vector<int> categories(category_set.begin(), category_set.end());
    std::unordered_map<int, int> cat_col;
    for (std::size_t i = 0; i < categories.size(); ++i) cat_col[categories[i]] = static_cast<int>(i);

    std::set<std::string> family_set;
    for (int32_t u : user_rows) {
        const std::string& fam = aa.user_ua_family[static_cast<std::size_t>(u)];
        family_set.insert(fam.empty() ? "Other" : fam);
    }
    std::vector<std::string> families(family_set.begin(), family_set.end());  // ref = first

    const int64_t n = static_cast<int64_t>(user_rows.size());
    const int64_t n_fam = static_cast<int64_t>(families.size()) - 1;
    const int64_t k = 1 + n_fam + static_cast<int64_t>(categories.size());

    DesignMatrix d;
    d.X = Eigen::MatrixXd::Zero(n, k);
    d.y.resize(n);
    d.names.emplace_back("(Intercept)");
    for (std::size_t i = 1; i < families.size(); ++i) d.names.push_back("ua" + families[i]);
    for (int cid : categories) d.names.push_back("catCount_" + std::to_string(cid));

    std::unordered_map<int32_t, int32_t> row_of;
    for (std::size_t i = 0; i < user_rows.size(); ++i)
        row_of[user_rows[i]] = static_cast<int32_t>(i);

    for (std::size_t i = 0; i < user_rows.size(); ++i) {
        const int32_t u = user_rows[i];
        d.X(static_cast<Eigen::Index>(i), 0) = 1.0;
        const std::string& fam_raw = aa.user_ua_family[static_cast<std::size_t>(u)];
        const std::string fam = fam_raw.empty() ? "Other" : fam_raw;
        for (std::size_t fidx = 1; fidx < families.size(); ++fidx)
            if (families[fidx] == fam) {
                d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(fidx)) = 1.0;
                break;
            }
        d.y(static_cast<Eigen::Index>(i)) = label[u];
    }
    for (const auto& r : aa.rows) {
        if (r.stage != Stage::AA) continue;
        auto it = row_of.find(r.user);
        if (it == row_of.end()) continue;
        d.X(it->second, 1 + n_fam + cat_col[r.category_id]) += 1.0;
    }

    RegressionFit fit = glm_fit(d, Family::Binomial);
    auto tests = coefficient_tests(fit, CovChoice::Classical);

    PlaceboReport report;
    report.users = n;
    report.separation_warning = fit.separation_warning;
    report.bonferroni_threshold = 0.05 / static_cast<double>(categories.size());
    for (std::size_t j = static_cast<std::size_t>(1 + n_fam); j < tests.size(); ++j) {
        report.category_tests.push_back(tests[j]);
        if (tests[j].p_value < 0.05) ++report.significant_05;
        if (tests[j].p_value < report.bonferroni_threshold) report.pass = false;
    }
    report.fraction_significant =
        static_cast<double>(report.significant_05) / static_cast<double>(categories.size());
    return report;
}

std::string PlaceboReport::to_json() const {
    std::string out = "{\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "  \"users\": %lld,\n", static_cast<long long>(users));
    out += buf;
    std::snprintf(buf, sizeof buf, "  \"categories\": %zu,\n", category_tests.size());
    out += buf;
    std::snprintf(buf, sizeof buf, "  \"significantAt05\": %d,\n", significant_05);
    out += buf;
    std::snprintf(buf, sizeof buf, "  \"fractionSignificant\": %.17g,\n", fraction_significant);
    out += buf;
    std::snprintf(buf, sizeof buf, "  \"bonferroniThreshold\": %.17g,\n", bonferroni_threshold);
    out += buf;
    std::snprintf(buf, sizeof buf, "  \"separationWarning\": %s,\n",
                  separation_warning ? "true" : "false");
    out += buf;
    std::snprintf(buf, sizeof buf, "  \"verdict\": \"%s\",\n", pass ? "pass" : "fail");
    out += buf;
    out += "  \"categoryTests\": [\n";
    for (std::size_t i = 0; i < category_tests.size(); ++i) {
        const auto& t = category_tests[i];
        std::snprintf(buf, sizeof buf,
                      "    {\"name\": \"%s\", \"estimate\": %.17g, \"se\": %.17g, \"p\": %.17g}%s\n",
                      t.name.c_str(), t.estimate, t.se, t.p_value,
                      i + 1 < category_tests.size() ? "," : "");
        out += buf;
    }
    out += "  ]\n}\n";
    return out;
}

std::vector<SweepRow> ols_vs_poisson_sweep(int64_t n_per_arm, double lambda0,
                                           const std::vector<double>& ate_grid, uint64_t seed,
                                           bool delta_method) {
    if (n_per_arm < 2) throw_model("sweep: nPerArm must be at least 2");
    if (!(lambda0 > 0.0)) throw_model("sweep: lambda0 must be positive");
    if (ate_grid.empty()) throw_model("sweep: empty grid");
    for (double ate : ate_grid)
        if (lambda0 + ate < 0.0) throw_model("sweep: lambda0 + ate is negative");

    std::vector<double> grid = ate_grid;
    std::sort(grid.begin(), grid.end());

    std::vector<SweepRow> rows(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        Rng rng(seed, g);
        const double ate = grid[g];
        const int64_t n = 2 * n_per_arm;

        DesignMatrix d;
        d.X.resize(n, 2);
        d.y.resize(n);
        d.names = {"(Intercept)", "treat"};
        for (int64_t i = 0; i < n_per_arm; ++i) {
            d.X(i, 0) = 1.0;
            d.X(i, 1) = 0.0;
            d.y(i) = static_cast<double>(rng.poisson(lambda0));
        }
        for (int64_t i = n_per_arm; i < n; ++i) {
            d.X(i, 0) = 1.0;
            d.X(i, 1) = 1.0;
            d.y(i) = static_cast<double>(rng.poisson(lambda0 + ate));
        }

        RegressionFit ols = ols_fit(d);
        RegressionFit glm = glm_fit(d, Family::Poisson);
        AteInterval glm_iv = poisson_ate(glm);

        SweepRow& row = rows[g];
        row.true_ate = ate;
        row.ols_est = ols.beta(1);
        row.ols_se = ols.se(1, false);
        row.ols_lower = row.ols_est - 2.0 * row.ols_se;
        row.ols_upper = row.ols_est + 2.0 * row.ols_se;
        row.glm_est = glm_iv.ate;
        if (delta_method) {
            const double mu0 = std::exp(glm.beta(0));
            const double mu1 = std::exp(glm.beta(0) + glm.beta(1));
            Eigen::Vector2d grad(mu1 - mu0, mu1);
            row.glm_se = std::sqrt(grad.dot(glm.classical_cov * grad));
            row.glm_lower = row.glm_est - 2.0 * row.glm_se;
            row.glm_upper = row.glm_est + 2.0 * row.glm_se;
        } else {
            row.glm_lower = glm_iv.lower;
            row.glm_upper = glm_iv.upper;
            row.glm_se = (glm_iv.upper - glm_iv.lower) / 4.0;
        }
        row.ratio = row.ols_se / row.glm_se;
    }
    return rows;
}

UpliftProjection project_daily_uplift(double ate, double se, double daily_sessions) {
    if (!(daily_sessions > 0.0)) throw_model("uplift: dailySessions must be positive");
    if (se < 0.0) throw_model("uplift: se must be nonnegative");
    constexpr double kZ95 = 1.959964;
    UpliftProjection p;
    p.ate = ate;
    p.se = se;
    p.daily_sessions = daily_sessions;
    p.expected_daily_views = ate * daily_sessions;
    p.ci_lower = (ate - kZ95 * se) * daily_sessions;
    p.ci_upper = (ate + kZ95 * se) * daily_sessions;
    return p;
}

}  // namespace abx
