#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "abx/report.hpp"

namespace abx {

namespace {

std::string thousands(int64_t v) {
    std::string digits = std::to_string(v < 0 ? -v : v);
    std::string out;
    int count = 0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        if (count && count % 3 == 0) out += ',';
        out += *it;
        ++count;
    }
    if (v < 0) out += '-';
    std::reverse(out.begin(), out.end());
    return out;
}

std::string fmt(double v, const char* spec = "%.4f") {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

const char* stars_str(int stars) {
    switch (stars) {
        case 3: return "***";
        case 2: return "**";
        case 1: return "*";
        default: return "";
    }
}

std::string coef_cell(const CoefficientTest& t) {
    std::string s = fmt(t.estimate);
    s += stars_str(t.stars);
    s += " (";
    s += fmt(t.se);
    s += ")";
    return s;
}

void append_row(std::string& out, const std::string& label, const std::vector<std::string>& cells,
                std::size_t label_w, const std::vector<std::size_t>& widths) {
    out += label;
    out.append(label_w > label.size() ? label_w - label.size() : 1, ' ');
    for (std::size_t c = 0; c < cells.size(); ++c) {
        out += cells[c];
        if (c + 1 < cells.size())
            out.append(widths[c] > cells[c].size() ? widths[c] - cells[c].size() + 2 : 2, ' ');
    }
    out += '\n';
}

}  // namespace

std::string render_fit_table(const std::string& title, std::span<const FitResult> columns) {
    // Coefficient rows: first-appearance order with the intercept last.
    std::vector<std::string> coef_names;
    bool has_intercept = false;
    for (const auto& col : columns) {
        for (const auto& t : col.tests) {
            if (t.name == "(Intercept)") {
                has_intercept = true;
                continue;
            }
            if (std::find(coef_names.begin(), coef_names.end(), t.name) == coef_names.end())
                coef_names.push_back(t.name);
        }
    }
    if (has_intercept) coef_names.emplace_back("(Intercept)");

    auto cell_for = [](const FitResult& col, const std::string& name) -> std::string {
        for (const auto& t : col.tests)
            if (t.name == name) return coef_cell(t);
        return "";
    };

    struct Line {
        std::string label;
        std::vector<std::string> cells;
    };
    std::vector<Line> lines;
    for (const auto& name : coef_names) {
        Line l;
        l.label = name == "(Intercept)" ? "Constant" : name;
        for (const auto& col : columns) l.cells.push_back(cell_for(col, name));
        lines.push_back(std::move(l));
    }

    std::vector<Line> footer;
    {
        Line obs{"Observations", {}};
        Line r2{"R2", {}}, ar2{"Adjusted R2", {}}, rse{"Residual Std. Error", {}},
            fstat{"F Statistic", {}};
        for (const auto& col : columns) {
            obs.cells.push_back(thousands(col.fit.n));
            r2.cells.push_back(fmt(col.fit.r_squared));
            ar2.cells.push_back(fmt(col.fit.adj_r_squared));
            if (std::isnan(col.fit.residual_se)) {
                rse.cells.emplace_back("");
            } else {
                rse.cells.push_back(fmt(col.fit.residual_se) + " (df = " +
                                    thousands(col.fit.n - col.fit.k) + ")");
            }
            if (std::isnan(col.fit.f_statistic)) {
                fstat.cells.emplace_back("");
            } else {
                fstat.cells.push_back(fmt(col.fit.f_statistic, "%.1f") + " (df = " +
                                      std::to_string(col.fit.f_df1) + "; " +
                                      thousands(col.fit.f_df2) + ")");
            }
        }
        footer = {obs, r2, ar2, rse, fstat};
    }

    std::size_t label_w = 2;
    for (const auto& l : lines) label_w = std::max(label_w, l.label.size());
    for (const auto& l : footer) label_w = std::max(label_w, l.label.size());
    label_w += 3;

    std::vector<std::size_t> widths(columns.size(), 0);
    for (std::size_t c = 0; c < columns.size(); ++c) {
        widths[c] = columns[c].model_name.size();
        for (const auto& l : lines) widths[c] = std::max(widths[c], l.cells[c].size());
        for (const auto& l : footer) widths[c] = std::max(widths[c], l.cells[c].size());
    }

    std::size_t total = label_w;
    for (std::size_t c = 0; c < columns.size(); ++c) total += widths[c] + 2;
    total = std::max(total, title.size());

    std::string out;
    out.append(total, '=');
    out += '\n';
    out += title;
    out += '\n';
    out.append(total, '-');
    out += '\n';
    {
        std::vector<std::string> headers;
        for (const auto& col : columns) headers.push_back(col.model_name);
        append_row(out, "", headers, label_w, widths);
    }
    out.append(total, '-');
    out += '\n';
    for (const auto& l : lines) append_row(out, l.label, l.cells, label_w, widths);
    out.append(total, '-');
    out += '\n';
    for (const auto& l : footer) append_row(out, l.label, l.cells, label_w, widths);
    out.append(total, '-');
    out += '\n';
    out += "Note: *p<0.1; **p<0.05; ***p<0.01\n";
    bool clustered = false;
    for (const auto& col : columns) clustered |= col.covariance == CovChoice::Clustered;
    if (clustered) out += "SE are cluster-robust, clustered by anonyId\n";
    out += "F statistic uses the classical covariance\n";
    out.append(total, '=');
    out += '\n';
    return out;
}

namespace {

std::string json_num(double v) {
    if (std::isnan(v) || std::isinf(v)) return "null";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string fit_to_json(const FitResult& result) {
    const RegressionFit& fit = result.fit;
    std::string out = "{\n";
    out += "  \"model\": \"" + result.model_name + "\",\n";
    out += std::string("  \"family\": \"") +
           (fit.family == Family::Gaussian ? "gaussian"
            : fit.family == Family::Poisson ? "poisson"
                                            : "binomial") +
           "\",\n";
    out += "  \"n\": " + std::to_string(fit.n) + ",\n";
    out += "  \"k\": " + std::to_string(fit.k) + ",\n";
    out += "  \"clusters\": " + std::to_string(fit.n_clusters) + ",\n";
    out += "  \"rowsUsed\": " + std::to_string(result.rows_used) + ",\n";
    out += "  \"droppedMissingBaseline\": " + std::to_string(result.dropped_missing_baseline) + ",\n";
    out += std::string("  \"covariance\": \"") +
           (result.covariance == CovChoice::Clustered ? "clustered" : "classical") + "\",\n";
    out += "  \"rSquared\": " + json_num(fit.r_squared) + ",\n";
    out += "  \"adjRSquared\": " + json_num(fit.adj_r_squared) + ",\n";
    out += "  \"residualSe\": " + json_num(fit.residual_se) + ",\n";
    out += "  \"fStatistic\": " + json_num(fit.f_statistic) + ",\n";
    out += "  \"fDf1\": " + std::to_string(fit.f_df1) + ",\n";
    out += "  \"fDf2\": " + std::to_string(fit.f_df2) + ",\n";
    out += std::string("  \"converged\": ") + (fit.converged ? "true" : "false") + ",\n";
    out += "  \"iterations\": " + std::to_string(fit.iterations) + ",\n";
    out += std::string("  \"separationWarning\": ") + (fit.separation_warning ? "true" : "false") +
           ",\n";
    out += "  \"coefficients\": [\n";
    for (int j = 0; j < fit.k; ++j) {
        out += "    {\"name\": \"" + fit.names[static_cast<std::size_t>(j)] + "\"";
        out += ", \"estimate\": " + json_num(fit.beta(j));
        out += ", \"seClassical\": " + json_num(fit.se(j, false));
        if (fit.cluster_cov) out += ", \"seClustered\": " + json_num(fit.se(j, true));
        const auto& t = result.tests[static_cast<std::size_t>(j)];
        out += ", \"statistic\": " + json_num(t.statistic);
        out += ", \"pValue\": " + json_num(t.p_value);
        out += ", \"stars\": " + std::to_string(t.stars);
        out += j + 1 < fit.k ? "},\n" : "}\n";
    }
    out += "  ]\n}\n";
    return out;
}

std::string render_sweep_table(std::span<const SweepRow> rows) {
    std::string out;
    out += "  True.ATE   OLS.est    GLM.est    OLS.se     GLM.se     Ratio\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "  %8.4f  %9.4f  %9.4f  %8.4f   %8.4f   %6.4f\n", r.true_ate,
                      r.ols_est, r.glm_est, r.ols_se, r.glm_se, r.ratio);
        out += buf;
    }
    return out;
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
    std::string out = "trueATE,olsEst,glmEst,olsSE,glmSE,ratio\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.true_ate,
                      r.ols_est, r.glm_est, r.ols_se, r.glm_se, r.ratio);
        out += buf;
    }
    return out;
}

std::string sweep_plot_csv(std::span<const SweepRow> rows) {
    std::string out = "trueATE,olsEst,olsLower,olsUpper,glmEst,glmLower,glmUpper\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.true_ate,
                      r.ols_est, r.ols_lower, r.ols_upper, r.glm_est, r.glm_lower, r.glm_upper);
        out += buf;
    }
    return out;
}

std::string uplift_to_text(const UpliftProjection& p) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "expected daily uplift: %.1f product page views (95%% CI %.0f to %.0f; ate=%.6g, "
                  "se=%.6g, dailySessions=%.1f)\n",
                  p.expected_daily_views, p.ci_lower, p.ci_upper, p.ate, p.se, p.daily_sessions);
    return buf;
}

std::string uplift_to_json(const UpliftProjection& p) {
    std::string out = "{\n";
    out += "  \"ate\": " + json_num(p.ate) + ",\n";
    out += "  \"se\": " + json_num(p.se) + ",\n";
    out += "  \"dailySessions\": " + json_num(p.daily_sessions) + ",\n";
    out += "  \"expectedDailyViews\": " + json_num(p.expected_daily_views) + ",\n";
    out += "  \"ciLower\": " + json_num(p.ci_lower) + ",\n";
    out += "  \"ciUpper\": " + json_num(p.ci_upper) + "\n";
    out += "}\n";
    return out;
}

}  // namespace abx
