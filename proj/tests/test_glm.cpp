#include <doctest.h>

#include <cmath>

#include "abx/error.hpp"
#include "abx/rng.hpp"
#include "abx/stats.hpp"

using namespace abx;

namespace {

DesignMatrix two_group_poisson(Rng& rng, int n_per_arm, double lam0, double lam1) {
    DesignMatrix d;
    const int n = 2 * n_per_arm;
    d.X.resize(n, 2);
    d.y.resize(n);
    d.names = {"(Intercept)", "treat"};
    for (int i = 0; i < n; ++i) {
        const int treat = i >= n_per_arm;
        d.X(i, 0) = 1.0;
        d.X(i, 1) = treat;
        d.y(i) = static_cast<double>(rng.poisson(treat ? lam1 : lam0));
    }
    return d;
}

}  // namespace

TEST_CASE("poisson glm: intercept-only MLE is log of the mean") {
    DesignMatrix d;
    d.X = Eigen::MatrixXd::Ones(8, 1);
    d.y.resize(8);
    d.y << 0, 1, 0, 2, 3, 0, 1, 1;
    d.names = {"(Intercept)"};
    auto fit = glm_fit(d, Family::Poisson);
    CHECK(fit.converged);
    CHECK(std::fabs(fit.beta(0) - std::log(1.0)) < 1e-10);
}

TEST_CASE("poisson glm: saturated two-group fit equals group means") {
    Rng rng(4242);
    auto d = two_group_poisson(rng, 400, 0.4, 0.55);
    double m0 = 0, m1 = 0;
    for (int i = 0; i < 400; ++i) m0 += d.y(i);
    for (int i = 400; i < 800; ++i) m1 += d.y(i);
    m0 /= 400;
    m1 /= 400;
    REQUIRE(m0 > 0);
    REQUIRE(m1 > 0);
    auto fit = glm_fit(d, Family::Poisson);
    CHECK(std::fabs(std::exp(fit.beta(0)) - m0) < 1e-10);
    CHECK(std::fabs(std::exp(fit.beta(0) + fit.beta(1)) - m1) < 1e-10);
}

TEST_CASE("poisson two-group ATE identity with OLS") {
    Rng rng(5151);
    auto d = two_group_poisson(rng, 600, 0.35, 0.38);
    auto ols = ols_fit(d);
    auto glm = glm_fit(d, Family::Poisson);
    auto iv = poisson_ate(glm);
    CHECK(std::fabs(iv.ate - ols.beta(1)) < 1e-10);
}

TEST_CASE("poisson_ate: null effect gives asymmetric-transform bounds around zero") {
    DesignMatrix d;
    d.X.resize(6, 2);
    d.y.resize(6);
    d.names = {"(Intercept)", "treat"};
    // identical groups: beta ~ 0 exactly
    const double ys[6] = {1, 0, 2, 1, 0, 2};
    for (int i = 0; i < 6; ++i) {
        d.X(i, 0) = 1.0;
        d.X(i, 1) = i >= 3;
        d.y(i) = ys[i];
    }
    auto glm = glm_fit(d, Family::Poisson);
    auto iv = poisson_ate(glm);
    CHECK(std::fabs(iv.ate) < 1e-10);
    const double mu = std::exp(glm.beta(0));
    const double se = glm.se(1, false);
    CHECK(iv.upper == doctest::Approx(mu * (std::exp(2 * se) - 1.0)).epsilon(1e-9));
    CHECK(iv.lower == doctest::Approx(mu * (std::exp(-2 * se) - 1.0)).epsilon(1e-9));
}

TEST_CASE("poisson_ate: wrong design shape is a contract error") {
    DesignMatrix d;
    d.X = Eigen::MatrixXd::Ones(5, 1);
    d.y.resize(5);
    d.y << 1, 2, 1, 0, 1;
    d.names = {"(Intercept)"};
    auto fit = glm_fit(d, Family::Poisson);
    CHECK_THROWS_AS(poisson_ate(fit), Error);
}

TEST_CASE("binomial glm: null regressors give calibrated z statistics") {
    int big_z = 0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
        Rng rng(900 + rep);
        const int n = 500;
        DesignMatrix d;
        d.X.resize(n, 3);
        d.y.resize(n);
        d.names = {"(Intercept)", "a", "b"};
        for (int i = 0; i < n; ++i) {
            d.X(i, 0) = 1.0;
            d.X(i, 1) = rng.normal();
            d.X(i, 2) = rng.normal();
            d.y(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        }
        auto fit = glm_fit(d, Family::Binomial);
        auto tests = coefficient_tests(fit, CovChoice::Classical);
        for (int j = 1; j < 3; ++j)
            if (std::fabs(tests[static_cast<std::size_t>(j)].statistic) >= 3.0) ++big_z;
    }
    CHECK(big_z <= 1);  // 40 null statistics, |z|>=3 has probability ~0.0027 each
}

TEST_CASE("glm: deviance is non-increasing across IRLS iterations") {
    Rng rng(777);
    for (int rep = 0; rep < 100; ++rep) {
        const bool poisson = rep % 2 == 0;
        const int n = 30 + static_cast<int>(rng.uniform_below(40));
        DesignMatrix d;
        d.X.resize(n, 3);
        d.y.resize(n);
        d.names = {"(Intercept)", "a", "b"};
        for (int i = 0; i < n; ++i) {
            d.X(i, 0) = 1.0;
            d.X(i, 1) = rng.normal();
            d.X(i, 2) = rng.normal();
            const double eta = 0.2 + 0.4 * d.X(i, 1) - 0.3 * d.X(i, 2);
            if (poisson)
                d.y(i) = static_cast<double>(rng.poisson(std::exp(std::min(3.0, eta))));
            else
                d.y(i) = rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0;
        }
        std::vector<double> trace;
        GlmOptions opts;
        opts.deviance_trace = &trace;
        RegressionFit fit;
        try {
            fit = glm_fit(d, poisson ? Family::Poisson : Family::Binomial, opts);
        } catch (const Error&) {
            continue;  // rare degenerate draw (all-zero response)
        }
        for (std::size_t i = 1; i < trace.size(); ++i)
            CHECK(trace[i] <= trace[i - 1] + 1e-9 * (trace[i - 1] + 1.0) + 1e-12);
    }
}

TEST_CASE("glm: iteration cap raises a convergence error carrying the iterate") {
    Rng rng(31337);
    auto d = two_group_poisson(rng, 100, 0.6, 0.9);
    GlmOptions opts;
    opts.max_iterations = 1;
    opts.beta_tol = 1e-16;
    opts.deviance_rel_tol = 0.0;
    try {
        glm_fit(d, Family::Poisson, opts);
        FAIL("expected a convergence error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Model);
        CHECK(std::string(e.what()).find("last iterate") != std::string::npos);
        CHECK(std::string(e.what()).find("treat") != std::string::npos);
    }
}

TEST_CASE("binomial glm: complete separation is flagged, not fatal") {
    const int n = 40;
    DesignMatrix d;
    d.X.resize(n, 2);
    d.y.resize(n);
    d.names = {"(Intercept)", "x"};
    Rng rng(12);
    for (int i = 0; i < n; ++i) {
        d.X(i, 0) = 1.0;
        d.X(i, 1) = rng.normal();
        d.y(i) = d.X(i, 1) > 0 ? 1.0 : 0.0;
    }
    auto fit = glm_fit(d, Family::Binomial);
    CHECK(fit.separation_warning);
}

TEST_CASE("glm: response domain is validated") {
    DesignMatrix d;
    d.X = Eigen::MatrixXd::Ones(4, 1);
    d.names = {"(Intercept)"};
    d.y.resize(4);
    d.y << 0, 1, 2, 0.5;
    CHECK_THROWS_AS(glm_fit(d, Family::Poisson), Error);
    d.y << 0, 1, 2, 1;
    CHECK_THROWS_AS(glm_fit(d, Family::Binomial), Error);
}
