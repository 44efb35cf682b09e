#include "abx/rng.hpp"

#include <algorithm>
#include <cmath>

#include "abx/error.hpp"
#include "abx/normal.hpp"

namespace abx {

double Rng::normal(double mean, double sd) {
    return mean + sd * normal_quantile(next_open());
}

double Rng::lognormal(double mu_log, double sigma_log) {
    return std::exp(normal(mu_log, sigma_log));
}

uint64_t Rng::poisson(double lambda) {
    if (lambda < 0.0) throw_model("poisson: rate must be nonnegative");
    if (lambda == 0.0) return 0;
    // Knuth's product method; rates above 30 are split into additive chunks
    // so the exp() threshold never underflows.
    uint64_t total = 0;
    while (lambda > 30.0) {
        total += poisson(30.0);
        lambda -= 30.0;
    }
    const double threshold = std::exp(-lambda);
    uint64_t k = 0;
    double prod = 1.0;
    do {
        ++k;
        prod *= next_open();
    } while (prod > threshold);
    return total + k - 1;
}

std::size_t Rng::categorical(const std::vector<double>& cum) {
    const double u = next_double() * cum.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    return static_cast<std::size_t>(it - cum.begin());
}

uint64_t sample_poisson(double lambda, Rng& rng) { return rng.poisson(lambda); }

}  // namespace abx
