#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace abx {

struct DesignMatrix {
    Eigen::MatrixXd X;                  // n x k, column-major
    Eigen::VectorXd y;                  // n
    std::vector<std::string> names;     // k column labels
    std::vector<int32_t> cluster;       // n cluster labels, empty if unclustered

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index k() const { return X.cols(); }
    bool has_clusters() const { return !cluster.empty(); }

    // n >= k >= 1, finite entries, unique labels, consistent lengths.
    void validate() const;
};

enum class Family { Gaussian, Poisson, Binomial };

struct RegressionFit {
    Family family = Family::Gaussian;
    Eigen::VectorXd beta;
    Eigen::MatrixXd classical_cov;
    Eigen::MatrixXd xtx_inv;                     // (X'X)^-1, kept for sandwiches
    std::optional<Eigen::MatrixXd> cluster_cov;
    std::vector<std::string> names;
    int64_t n = 0;
    int k = 0;
    int64_t n_clusters = 0;
    double r_squared = 0.0;
    double adj_r_squared = 0.0;
    double residual_se = 0.0;
    double f_statistic = 0.0;  // classical; NaN when undefined or non-gaussian
    int f_df1 = 0;
    int64_t f_df2 = 0;
    bool converged = true;
    int iterations = 0;
    bool separation_warning = false;
    double deviance = 0.0;  // GLM families only

    double se(int j, bool clustered) const;
};

struct OlsOptions {
    bool compute_cluster_cov = true;  // when cluster labels are present
    bool cr1 = true;                  // CR1 small-sample factor; false = CR0
};

// Least squares via rank-revealing Householder QR; rank deficiency is an
// error naming the dependent columns.
RegressionFit ols_fit(const DesignMatrix& d, const OlsOptions& opts = {});

// CR sandwich (X'X)^-1 (sum_g s_g s_g') (X'X)^-1 over clusters g, with the
// CR1 factor (G/(G-1))*((n-1)/(n-k)) by default. Gaussian fits only.
Eigen::MatrixXd cluster_robust_cov(const DesignMatrix& d, const RegressionFit& fit, bool cr1 = true);

struct GlmOptions {
    int max_iterations = 100;
    double beta_tol = 1e-10;
    double deviance_rel_tol = 1e-12;
    std::vector<double>* deviance_trace = nullptr;  // test hook
};

// IRLS with the canonical link (log / logit). Non-convergence without
// separation is an error carrying the last iterate; separation is flagged on
// the returned fit.
RegressionFit glm_fit(const DesignMatrix& d, Family family, const GlmOptions& opts = {});

struct AteInterval {
    double ate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

// exp(a+b) - exp(a) with bounds exp(a + b +- 2 SE(b)) - exp(a). Requires a
// two-column (intercept, treatment) Poisson fit.
AteInterval poisson_ate(const RegressionFit& fit);

struct PowerSpec {
    double baseline_mean = 0.0;   // clicks/session
    double outcome_sd = 0.0;      // clicks/session
    double relative_effect = 0.0; // fraction of baseline
    double alpha = 0.05;
    double power = 0.8;
};

// Two-sample two-sided z approximation; returns the total count (both arms),
// per-arm count rounded up.
int64_t power_required_n(const PowerSpec& spec);

struct CoefficientTest {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
    int stars = 0;  // p<0.1 / p<0.05 / p<0.01
};

enum class CovChoice { Classical, Clustered };

std::vector<CoefficientTest> coefficient_tests(const RegressionFit& fit, CovChoice cov);

}  // namespace abx
