#include <doctest.h>

#include <cmath>
#include <string>

#include "abx/error.hpp"
#include "abx/normal.hpp"
#include "abx/rng.hpp"
#include "abx/stats.hpp"

using namespace abx;

namespace {

DesignMatrix make_design(const std::vector<std::vector<double>>& cols,
                         const std::vector<double>& y,
                         const std::vector<std::string>& names,
                         const std::vector<int32_t>& cluster = {}) {
    DesignMatrix d;
    const Eigen::Index n = static_cast<Eigen::Index>(y.size());
    const Eigen::Index k = static_cast<Eigen::Index>(cols.size());
    d.X.resize(n, k);
    for (Eigen::Index j = 0; j < k; ++j)
        for (Eigen::Index i = 0; i < n; ++i) d.X(i, j) = cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    d.y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    d.names = names;
    d.cluster = cluster;
    return d;
}

}  // namespace

TEST_CASE("ols: intercept-only constant fit") {
    auto d = make_design({{1, 1, 1}}, {3, 3, 3}, {"(Intercept)"});
    auto fit = ols_fit(d);
    CHECK(fit.beta(0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(fit.residual_se == doctest::Approx(0.0));
}

TEST_CASE("ols: two-group coefficient equals difference of group means") {
    std::vector<double> treat = {0, 0, 0, 1, 1, 1, 1};
    std::vector<double> y = {1.0, 2.5, 0.5, 4.0, 3.0, 5.0, 2.0};
    std::vector<double> ones(y.size(), 1.0);
    auto d = make_design({ones, treat}, y, {"(Intercept)", "treat"});
    auto fit = ols_fit(d);
    const double m0 = (1.0 + 2.5 + 0.5) / 3.0;
    const double m1 = (4.0 + 3.0 + 5.0 + 2.0) / 4.0;
    CHECK(std::fabs(fit.beta(1) - (m1 - m0)) < 1e-12);
    CHECK(std::fabs(fit.beta(0) - m0) < 1e-12);
}

TEST_CASE("ols: six-point dataset against hand-solved normal equations") {
    // Oracle solved by hand in exact rationals: b0 = 8/75, b1 = 341/350,
    // rss = 359/2625, sigma2 = 359/10500.
    std::vector<double> x = {1, 2, 3, 4, 5, 6};
    std::vector<double> y = {1.1, 1.9, 3.2, 3.9, 5.2, 5.8};
    std::vector<double> ones(6, 1.0);
    auto d = make_design({ones, x}, y, {"(Intercept)", "x"});
    auto fit = ols_fit(d);
    CHECK(std::fabs(fit.beta(0) - 8.0 / 75.0) < 1e-12);
    CHECK(std::fabs(fit.beta(1) - 341.0 / 350.0) < 1e-12);
    CHECK(std::fabs(fit.residual_se - std::sqrt(359.0 / 10500.0)) < 1e-12);
    CHECK(std::fabs(fit.classical_cov(0, 0) - 0.029631746031746033) < 1e-12);
    CHECK(std::fabs(fit.classical_cov(0, 1) - (-0.006838095238095238)) < 1e-12);
    CHECK(std::fabs(fit.classical_cov(1, 1) - 0.0019537414965986395) < 1e-12);
    CHECK(fit.r_squared == doctest::Approx(0.9918342976557725).epsilon(1e-12));
    CHECK(fit.adj_r_squared == doctest::Approx(0.9897928720697156).epsilon(1e-12));
    CHECK(fit.f_statistic == doctest::Approx(485.85376044568244).epsilon(1e-10));
    CHECK(fit.f_df1 == 1);
    CHECK(fit.f_df2 == 4);
}

TEST_CASE("ols: residuals orthogonal to every column") {
    Rng rng(314);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 40, k = 5;
        DesignMatrix d;
        d.X.resize(n, k);
        d.y.resize(n);
        d.names = {"(Intercept)", "a", "b", "c", "e"};
        for (int i = 0; i < n; ++i) {
            d.X(i, 0) = 1.0;
            for (int j = 1; j < k; ++j) d.X(i, j) = rng.normal();
            d.y(i) = rng.normal(0.0, 2.0);
        }
        auto fit = ols_fit(d);
        Eigen::VectorXd resid = d.y - d.X * fit.beta;
        CHECK((d.X.transpose() * resid).cwiseAbs().maxCoeff() < 1e-8 * d.y.norm());
    }
}

TEST_CASE("ols: shifting y by a constant moves only the intercept") {
    Rng rng(2718);
    const int n = 60;
    DesignMatrix d;
    d.X.resize(n, 3);
    d.y.resize(n);
    d.names = {"(Intercept)", "a", "b"};
    for (int i = 0; i < n; ++i) {
        d.X(i, 0) = 1.0;
        d.X(i, 1) = rng.normal();
        d.X(i, 2) = rng.normal();
        d.y(i) = rng.normal();
    }
    auto fit1 = ols_fit(d);
    DesignMatrix shifted = d;
    shifted.y.array() += 7.25;
    auto fit2 = ols_fit(shifted);
    CHECK(std::fabs(fit2.beta(0) - fit1.beta(0) - 7.25) < 1e-10);
    CHECK(std::fabs(fit2.beta(1) - fit1.beta(1)) < 1e-10);
    CHECK(std::fabs(fit2.beta(2) - fit1.beta(2)) < 1e-10);
}

TEST_CASE("ols: rank deficiency names the dependent columns") {
    std::vector<double> a = {1, 2, 3, 4, 5};
    std::vector<double> twice = {2, 4, 6, 8, 10};
    std::vector<double> ones(5, 1.0);
    auto d = make_design({ones, a, twice}, {1, 2, 3, 4, 5}, {"(Intercept)", "a", "a_twice"});
    try {
        ols_fit(d);
        FAIL("expected rank error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Model);
        const std::string msg = e.what();
        CHECK(msg.find("rank deficient") != std::string::npos);
        const bool names_one = msg.find("a_twice") != std::string::npos ||
                               msg.find("a") != std::string::npos;
        CHECK(names_one);
    }
}

TEST_CASE("ols: non-finite input is a domain error") {
    auto d = make_design({{1, 1, 1}, {0, 1, 2}}, {1, 2, std::nan("")}, {"(Intercept)", "x"});
    CHECK_THROWS_AS(ols_fit(d), Error);
}

TEST_CASE("cluster covariance: singleton clusters reduce to the HC1 form") {
    Rng rng(55);
    const int n = 30;
    DesignMatrix d;
    d.X.resize(n, 2);
    d.y.resize(n);
    d.names = {"(Intercept)", "x"};
    d.cluster.resize(n);
    for (int i = 0; i < n; ++i) {
        d.X(i, 0) = 1.0;
        d.X(i, 1) = rng.normal();
        d.y(i) = 1.0 + 0.5 * d.X(i, 1) + rng.normal() * (1.0 + 0.3 * std::fabs(d.X(i, 1)));
        d.cluster[static_cast<std::size_t>(i)] = i;  // every row its own cluster
    }
    auto fit = ols_fit(d);
    REQUIRE(fit.cluster_cov.has_value());

    // HC1: (n/(n-k)) (X'X)^-1 (sum_i e_i^2 x_i x_i') (X'X)^-1 --- identical
    // formula with singleton groups up to the CR1 factor, which becomes
    // (n/(n-1)) ((n-1)/(n-k)) = n/(n-k).
    Eigen::VectorXd resid = d.y - d.X * fit.beta;
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(2, 2);
    for (int i = 0; i < n; ++i)
        meat += resid(i) * resid(i) * d.X.row(i).transpose() * d.X.row(i);
    Eigen::MatrixXd hc1 =
        (static_cast<double>(n) / (n - 2)) * fit.xtx_inv * meat * fit.xtx_inv;
    CHECK((hc1 - *fit.cluster_cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cluster covariance: 3x2 toy set against brute force") {
    // Oracle: direct evaluation of the sandwich formula, written separately.
    std::vector<double> ones(6, 1.0);
    std::vector<double> x = {0.0, 1.0, 2.0, 0.5, 1.5, 2.5};
    std::vector<double> y = {1.0, 1.4, 3.1, 0.2, 2.2, 2.9};
    std::vector<int32_t> cl = {10, 10, 20, 20, 30, 30};
    auto d = make_design({ones, x}, y, {"(Intercept)", "x"}, cl);
    auto fit = ols_fit(d);
    REQUIRE(fit.cluster_cov.has_value());

    Eigen::MatrixXd xtx = d.X.transpose() * d.X;
    Eigen::MatrixXd bread = xtx.inverse();
    Eigen::VectorXd resid = d.y - d.X * fit.beta;
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(2, 2);
    for (int32_t g : {10, 20, 30}) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
        for (int i = 0; i < 6; ++i)
            if (cl[static_cast<std::size_t>(i)] == g) s += d.X.row(i).transpose() * resid(i);
        meat += s * s.transpose();
    }
    const double n = 6, k = 2, G = 3;
    Eigen::MatrixXd expected = (G / (G - 1)) * ((n - 1) / (n - k)) * bread * meat * bread;
    CHECK((expected - *fit.cluster_cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cluster covariance: symmetric positive semidefinite") {
    Rng rng(91);
    const int n = 200;
    DesignMatrix d;
    d.X.resize(n, 3);
    d.y.resize(n);
    d.names = {"(Intercept)", "x", "z"};
    d.cluster.resize(n);
    for (int i = 0; i < n; ++i) {
        d.X(i, 0) = 1.0;
        d.X(i, 1) = rng.normal();
        d.X(i, 2) = rng.normal();
        d.y(i) = rng.normal();
        d.cluster[static_cast<std::size_t>(i)] = i / 5;
    }
    auto fit = ols_fit(d);
    const Eigen::MatrixXd& cov = *fit.cluster_cov;
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-10 * cov.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    CHECK(es.eigenvalues().minCoeff() > -1e-10 * cov.cwiseAbs().maxCoeff());
}

TEST_CASE("cluster covariance: intra-cluster correlation inflates the treat SE") {
    // Per-user random effects with many sessions per user; the clustered SE
    // should exceed the classical one in nearly every replication.
    int inflated = 0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
        Rng rng(1000 + rep);
        const int users = 120, per_user = 12, n = users * per_user;
        DesignMatrix d;
        d.X.resize(n, 2);
        d.y.resize(n);
        d.names = {"(Intercept)", "treat"};
        d.cluster.resize(static_cast<std::size_t>(n));
        int row = 0;
        for (int u = 0; u < users; ++u) {
            const int treat = rng.bernoulli(0.5) ? 1 : 0;
            const double effect = rng.normal(0.0, 0.8);  // shared within user
            for (int s = 0; s < per_user; ++s, ++row) {
                d.X(row, 0) = 1.0;
                d.X(row, 1) = treat;
                d.y(row) = 0.3 + 0.1 * treat + effect + rng.normal(0.0, 0.5);
                d.cluster[static_cast<std::size_t>(row)] = u;
            }
        }
        auto fit = ols_fit(d);
        if (fit.se(1, true) >= fit.se(1, false)) ++inflated;
    }
    CHECK(inflated >= 19);
}

TEST_CASE("cluster covariance: single cluster is degenerate") {
    auto d = make_design({{1, 1, 1}, {0, 1, 2}}, {1, 2, 3}, {"(Intercept)", "x"}, {7, 7, 7});
    CHECK_THROWS_AS(ols_fit(d), Error);
}

TEST_CASE("power: required n for the reference design") {
    PowerSpec spec;
    spec.baseline_mean = 0.32;
    spec.outcome_sd = 0.766;
    spec.relative_effect = 0.03;
    spec.alpha = 0.05;
    spec.power = 0.99;
    const int64_t total = power_required_n(spec);
    // Closed form with z_{0.975}=1.959964, z_{0.99}=2.326348: 467,890 total.
    CHECK(total == 467890);
    CHECK(total >= 460000);
    CHECK(total <= 476000);
}

TEST_CASE("power: doubling the effect divides n by four pre-rounding") {
    PowerSpec spec;
    spec.baseline_mean = 0.32;
    spec.outcome_sd = 0.766;
    spec.relative_effect = 0.03;
    spec.alpha = 0.05;
    spec.power = 0.99;
    PowerSpec twice = spec;
    twice.relative_effect = 0.06;
    const double n1 = static_cast<double>(power_required_n(spec));
    const double n4 = static_cast<double>(power_required_n(twice));
    CHECK(std::fabs(n1 / n4 - 4.0) < 1e-4);
}

TEST_CASE("power: power 0.5 collapses to the alpha term") {
    PowerSpec spec;
    spec.baseline_mean = 1.0;
    spec.outcome_sd = 1.0;
    spec.relative_effect = 0.25;
    spec.alpha = 0.05;
    spec.power = 0.5;
    const double za = normal_quantile(0.975);
    const double expected_arm = 2.0 * za * za / (0.25 * 0.25);
    CHECK(power_required_n(spec) == 2 * static_cast<int64_t>(std::ceil(expected_arm)));
}

TEST_CASE("power: zero effect is a domain error") {
    PowerSpec spec;
    spec.baseline_mean = 0.32;
    spec.outcome_sd = 0.766;
    spec.relative_effect = 0.0;
    spec.alpha = 0.05;
    spec.power = 0.99;
    CHECK_THROWS_AS(power_required_n(spec), Error);
}

TEST_CASE("coefficient tests: star conventions and p-values") {
    RegressionFit fit;
    fit.family = Family::Gaussian;
    fit.names = {"treat", "null", "edge"};
    fit.k = 3;
    fit.n = 100;
    fit.beta.resize(3);
    fit.beta << 0.011, 0.0, 1.959964 * 0.25;
    fit.classical_cov = Eigen::MatrixXd::Zero(3, 3);
    fit.classical_cov(0, 0) = 0.002 * 0.002;
    fit.classical_cov(1, 1) = 0.5 * 0.5;
    fit.classical_cov(2, 2) = 0.25 * 0.25;
    auto tests = coefficient_tests(fit, CovChoice::Classical);

    CHECK(tests[0].statistic == doctest::Approx(5.5).epsilon(1e-12));
    CHECK(tests[0].p_value < 1e-7);
    CHECK(tests[0].stars == 3);

    CHECK(tests[1].statistic == 0.0);
    CHECK(tests[1].p_value == doctest::Approx(1.0));
    CHECK(tests[1].stars == 0);

    CHECK(std::fabs(tests[2].p_value - 0.05) < 1e-6);
}
