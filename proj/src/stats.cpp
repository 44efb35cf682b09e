#include "abx/stats.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "abx/error.hpp"
#include "abx/normal.hpp"

namespace abx {

void DesignMatrix::validate() const {
    if (k() < 1) throw_model("design matrix has no columns");
    if (n() < k()) throw_model("design matrix has fewer rows than columns");
    if (y.size() != n()) throw_model("response length does not match row count");
    if (static_cast<Eigen::Index>(names.size()) != k())
        throw_model("column label count does not match column count");
    if (!cluster.empty() && static_cast<Eigen::Index>(cluster.size()) != n())
        throw_model("cluster label length does not match row count");
    std::unordered_set<std::string> seen;
    for (const auto& nm : names)
        if (!seen.insert(nm).second) throw_model("duplicate column label '" + nm + "'");
    if (!X.allFinite() || !y.allFinite()) throw_model("non-finite values in design matrix");
}

double RegressionFit::se(int j, bool clustered) const {
    const Eigen::MatrixXd& cov = clustered ? cluster_cov.value() : classical_cov;
    double v = cov(j, j);
    return v > 0.0 ? std::sqrt(v) : 0.0;
}

namespace {

constexpr double kRankTolerance = 1e-10;  // relative to the largest diagonal of R

bool column_is_constant_one(const Eigen::MatrixXd& X, Eigen::Index j) {
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        if (X(i, j) != 1.0) return false;
    return true;
}

bool has_intercept_column(const DesignMatrix& d) {
    for (Eigen::Index j = 0; j < d.k(); ++j)
        if (column_is_constant_one(d.X, j)) return true;
    return false;
}

[[noreturn]] void throw_rank_error(const DesignMatrix& d,
                                   const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr) {
    const Eigen::Index rank = qr.rank();
    const auto& perm = qr.colsPermutation().indices();
    std::string cols;
    for (Eigen::Index i = rank; i < d.k(); ++i) {
        if (!cols.empty()) cols += ", ";
        cols += d.names[perm[i]];
    }
    throw_model("design matrix is rank deficient (rank " + std::to_string(rank) + " of " +
                std::to_string(d.k()) + "); dependent columns: " + cols);
}

}  // namespace

RegressionFit ols_fit(const DesignMatrix& d, const OlsOptions& opts) {
    d.validate();
    const Eigen::Index n = d.n(), k = d.k();

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < k) throw_rank_error(d, qr);

    RegressionFit fit;
    fit.family = Family::Gaussian;
    fit.names = d.names;
    fit.n = n;
    fit.k = static_cast<int>(k);
    fit.beta = qr.solve(d.y);

    const Eigen::VectorXd resid = d.y - d.X * fit.beta;
    const double rss = resid.squaredNorm();
    const double dof = static_cast<double>(n - k);
    const double sigma2 = dof > 0 ? rss / dof : 0.0;
    fit.residual_se = std::sqrt(sigma2);

    // (X'X)^-1 = P R^-1 R^-T P' from the pivoted factorization.
    Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
    Eigen::MatrixXd Rinv =
        R.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    Eigen::MatrixXd inv = Rinv * Rinv.transpose();
    const Eigen::PermutationMatrix<Eigen::Dynamic>& P = qr.colsPermutation();
    fit.xtx_inv = P * inv * P.transpose();
    fit.xtx_inv = 0.5 * (fit.xtx_inv + fit.xtx_inv.transpose()).eval();
    fit.classical_cov = sigma2 * fit.xtx_inv;

    const bool intercept = has_intercept_column(d);
    double tss;
    if (intercept) {
        const double ybar = d.y.mean();
        tss = (d.y.array() - ybar).matrix().squaredNorm();
    } else {
        tss = d.y.squaredNorm();
    }
    if (tss > 0.0) {
        fit.r_squared = 1.0 - rss / tss;
        if (fit.r_squared < 0.0 && fit.r_squared > -1e-12) fit.r_squared = 0.0;
        const double n_adj = static_cast<double>(n - (intercept ? 1 : 0));
        fit.adj_r_squared = dof > 0 ? 1.0 - (rss / dof) / (tss / n_adj) : fit.r_squared;
    } else {
        fit.r_squared = 1.0;
        fit.adj_r_squared = 1.0;
    }

    fit.f_df1 = static_cast<int>(k - 1);
    fit.f_df2 = n - k;
    if (intercept && k > 1 && dof > 0 && rss > 0.0) {
        fit.f_statistic = ((tss - rss) / fit.f_df1) / (rss / dof);
    } else {
        fit.f_statistic = std::numeric_limits<double>::quiet_NaN();
    }

    if (opts.compute_cluster_cov && d.has_clusters())
        fit.cluster_cov = cluster_robust_cov(d, fit, opts.cr1);
    return fit;
}

Eigen::MatrixXd cluster_robust_cov(const DesignMatrix& d, const RegressionFit& fit, bool cr1) {
    if (!d.has_clusters()) throw_model("cluster_robust_cov: no cluster labels");
    if (fit.family != Family::Gaussian)
        throw_model("cluster_robust_cov: implemented for least-squares fits");
    const Eigen::Index n = d.n(), k = d.k();

    // Dense cluster ids in order of first appearance keeps the accumulation
    // order deterministic.
    std::unordered_map<int32_t, int32_t> dense;
    dense.reserve(static_cast<std::size_t>(n) / 4 + 8);
    std::vector<int32_t> row_cluster(static_cast<std::size_t>(n));
    int32_t next_id = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto [it, inserted] = dense.emplace(d.cluster[i], next_id);
        if (inserted) ++next_id;
        row_cluster[i] = it->second;
    }
    const int64_t G = next_id;
    if (G < 2) throw_model("cluster_robust_cov: need at least 2 clusters");

    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(k, G);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = d.y(i) - d.X.row(i).dot(fit.beta);
        scores.col(row_cluster[i]) += d.X.row(i).transpose() * e;
    }
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    meat.selfadjointView<Eigen::Lower>().rankUpdate(scores);
    meat = meat.selfadjointView<Eigen::Lower>();

    double factor = 1.0;
    if (cr1)
        factor = (static_cast<double>(G) / (G - 1)) *
                 (static_cast<double>(n - 1) / static_cast<double>(n - k));
    Eigen::MatrixXd cov = factor * fit.xtx_inv * meat * fit.xtx_inv;
    return 0.5 * (cov + cov.transpose());
}

AteInterval poisson_ate(const RegressionFit& fit) {
    if (fit.family != Family::Poisson || fit.k != 2)
        throw_model("poisson_ate: expected a two-column (intercept, treatment) Poisson fit");
    const double a = fit.beta(0), b = fit.beta(1);
    const double se_b = fit.se(1, false);
    AteInterval out;
    out.ate = std::exp(a + b) - std::exp(a);
    out.lower = std::exp(a + b - 2.0 * se_b) - std::exp(a);
    out.upper = std::exp(a + b + 2.0 * se_b) - std::exp(a);
    return out;
}

int64_t power_required_n(const PowerSpec& spec) {
    if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) throw_model("power: alpha must lie in (0,1)");
    if (!(spec.power > 0.0 && spec.power < 1.0)) throw_model("power: power must lie in (0,1)");
    if (!(spec.outcome_sd > 0.0)) throw_model("power: outcome sd must be positive");
    const double delta = std::fabs(spec.relative_effect * spec.baseline_mean);
    if (delta == 0.0) throw_model("power: effect size is zero");

    const double z_a = normal_quantile(1.0 - spec.alpha / 2.0);
    const double z_b = normal_quantile(spec.power);
    const double zsum = z_a + z_b;
    const double n_arm = 2.0 * spec.outcome_sd * spec.outcome_sd * zsum * zsum / (delta * delta);
    return 2 * static_cast<int64_t>(std::ceil(n_arm));
}

std::vector<CoefficientTest> coefficient_tests(const RegressionFit& fit, CovChoice cov) {
    const bool clustered = cov == CovChoice::Clustered;
    if (clustered && !fit.cluster_cov.has_value())
        throw_model("coefficient_tests: no clustered covariance on this fit");

    std::vector<CoefficientTest> out;
    out.reserve(fit.names.size());
    for (int j = 0; j < fit.k; ++j) {
        CoefficientTest t;
        t.name = fit.names[j];
        t.estimate = fit.beta(j);
        t.se = fit.se(j, clustered);
        if (t.estimate == 0.0)
            t.statistic = 0.0;
        else if (t.se == 0.0)
            t.statistic = std::numeric_limits<double>::infinity();
        else
            t.statistic = t.estimate / t.se;
        t.p_value = std::isinf(t.statistic) ? 0.0 : 2.0 * normal_cdf(-std::fabs(t.statistic));
        t.stars = t.p_value < 0.01 ? 3 : t.p_value < 0.05 ? 2 : t.p_value < 0.1 ? 1 : 0;
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace abx
