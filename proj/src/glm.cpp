#include <cmath>
#include <limits>
#include <sstream>

#include "abx/error.hpp"
#include "abx/stats.hpp"

namespace abx {

namespace {

constexpr double kEtaClamp = 300.0;
constexpr double kMinWeight = 1e-12;

double poisson_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
    double dev = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double yi = y(i), mi = mu(i);
        dev += yi > 0.0 ? yi * std::log(yi / mi) - (yi - mi) : mi;
    }
    return 2.0 * dev;
}

double binomial_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
    double dev = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double mi = std::min(1.0 - 1e-12, std::max(1e-12, mu(i)));
        dev -= y(i) > 0.5 ? std::log(mi) : std::log(1.0 - mi);
    }
    return 2.0 * dev;
}

void check_response(const DesignMatrix& d, Family family) {
    for (Eigen::Index i = 0; i < d.y.size(); ++i) {
        const double yi = d.y(i);
        if (family == Family::Poisson) {
            if (yi < 0.0 || yi != std::floor(yi))
                throw_model("glm_fit(poisson): response must be nonnegative integers");
        } else {
            if (yi != 0.0 && yi != 1.0) throw_model("glm_fit(binomial): response must be 0/1");
        }
    }
}

std::string format_iterate(const Eigen::VectorXd& beta, const std::vector<std::string>& names) {
    std::ostringstream os;
    os.precision(6);
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        if (j) os << ", ";
        os << names[j] << "=" << beta(j);
    }
    return os.str();
}

}  // namespace

RegressionFit glm_fit(const DesignMatrix& d, Family family, const GlmOptions& opts) {
    if (family == Family::Gaussian) return ols_fit(d);
    d.validate();
    check_response(d, family);
    const Eigen::Index n = d.n(), k = d.k();

    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
        qr.setThreshold(1e-10);
        if (qr.rank() < k) {
            const auto& perm = qr.colsPermutation().indices();
            std::string cols;
            for (Eigen::Index i = qr.rank(); i < k; ++i) {
                if (!cols.empty()) cols += ", ";
                cols += d.names[perm[i]];
            }
            throw_model("glm_fit: design matrix is rank deficient; dependent columns: " + cols);
        }
    }

    const bool poisson = family == Family::Poisson;

    Eigen::VectorXd mu(n), eta(n);
    if (poisson) {
        mu = d.y.array() + 0.1;
        eta = mu.array().log();
    } else {
        mu = (d.y.array() + 0.5) / 2.0;
        eta = (mu.array() / (1.0 - mu.array())).log();
    }

    double dev = poisson ? poisson_deviance(d.y, mu) : binomial_deviance(d.y, mu);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd w(n), z(n);
    Eigen::MatrixXd fisher(k, k);
    bool have_beta = false;
    bool converged = false;
    int iter = 0;

    auto update_mu = [&](const Eigen::VectorXd& b) {
        eta = (d.X * b).cwiseMin(kEtaClamp).cwiseMax(-kEtaClamp);
        if (poisson)
            mu = eta.array().exp();
        else
            mu = 1.0 / (1.0 + (-eta.array()).exp());
    };

    while (iter < opts.max_iterations && !converged) {
        ++iter;
        if (poisson) {
            w = mu.cwiseMax(kMinWeight);
            z = eta.array() + (d.y - mu).array() / w.array();
        } else {
            w = (mu.array() * (1.0 - mu.array())).cwiseMax(kMinWeight);
            z = eta.array() + (d.y - mu).array() / w.array();
        }

        fisher = d.X.transpose() * w.asDiagonal() * d.X;
        const Eigen::VectorXd rhs = d.X.transpose() * w.cwiseProduct(z);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(fisher);
        if (ldlt.info() != Eigen::Success)
            throw_model("glm_fit: weighted normal equations are singular");
        const Eigen::VectorXd candidate = ldlt.solve(rhs);

        if (!have_beta) {
            beta = candidate;
            have_beta = true;
            update_mu(beta);
            dev = poisson ? poisson_deviance(d.y, mu) : binomial_deviance(d.y, mu);
            if (opts.deviance_trace) opts.deviance_trace->push_back(dev);
            continue;
        }

        const Eigen::VectorXd delta = candidate - beta;
        const double max_delta = delta.cwiseAbs().maxCoeff();

        // Step-halving keeps the deviance non-increasing, up to the floating-
        // point resolution of the deviance sum itself.
        const double allowance = 1e-9 * (std::fabs(dev) + 1.0);
        double step = 1.0;
        Eigen::VectorXd trial;
        double new_dev = dev;
        for (int h = 0; h < 32; ++h) {
            trial = beta + step * delta;
            update_mu(trial);
            new_dev = poisson ? poisson_deviance(d.y, mu) : binomial_deviance(d.y, mu);
            if (new_dev <= dev + allowance) break;
            step *= 0.5;
        }
        beta = trial;
        if (opts.deviance_trace) opts.deviance_trace->push_back(new_dev);

        const double rel_change = std::fabs(dev - new_dev) / (std::fabs(new_dev) + 0.1);
        dev = new_dev;
        // The deviance plateau is only trusted near the optimum; otherwise a
        // premature stop would leave the saturated-model identities short of
        // their tolerance.
        if (max_delta < opts.beta_tol ||
            (rel_change < opts.deviance_rel_tol && max_delta < 1e-8))
            converged = true;
    }

    RegressionFit fit;
    fit.family = family;
    fit.names = d.names;
    fit.n = n;
    fit.k = static_cast<int>(k);
    fit.beta = beta;
    fit.converged = converged;
    fit.iterations = iter;
    fit.deviance = dev;

    // Fisher information at the final iterate.
    update_mu(beta);
    if (poisson)
        w = mu.cwiseMax(kMinWeight);
    else
        w = (mu.array() * (1.0 - mu.array())).cwiseMax(kMinWeight);
    fisher = d.X.transpose() * w.asDiagonal() * d.X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(fisher);
    fit.xtx_inv = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    fit.xtx_inv = 0.5 * (fit.xtx_inv + fit.xtx_inv.transpose()).eval();
    fit.classical_cov = fit.xtx_inv;

    if (family == Family::Binomial) {
        for (Eigen::Index j = 0; j < k; ++j) {
            const double mean = d.X.col(j).mean();
            const double sd = std::sqrt((d.X.col(j).array() - mean).square().sum() /
                                        std::max<Eigen::Index>(1, n - 1));
            if (sd > 0.0 && std::fabs(beta(j)) * sd > 30.0) {
                fit.separation_warning = true;
                break;
            }
        }
    }

    fit.r_squared = std::numeric_limits<double>::quiet_NaN();
    fit.adj_r_squared = std::numeric_limits<double>::quiet_NaN();
    fit.residual_se = std::numeric_limits<double>::quiet_NaN();
    fit.f_statistic = std::numeric_limits<double>::quiet_NaN();

    if (!converged && !fit.separation_warning)
        throw_model("glm_fit: no convergence after " + std::to_string(iter) +
                    " iterations; last iterate: " + format_iterate(beta, d.names));
    return fit;
}

}  // namespace abx
