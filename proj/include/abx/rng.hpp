#pragma once

#include <cstdint>
#include <vector>

namespace abx {

// SplitMix64: a splittable counter-style generator. Substreams are derived by
// mixing a stream index into the seed, so per-user / per-replication streams
// can be generated in parallel and remain bit-stable regardless of scheduling.
//
// All sampling routines below are hand-rolled (no std:: distributions) so the
// draw sequence is identical across standard libraries and platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}
    Rng(uint64_t seed, uint64_t stream) : state_(mix(seed ^ mix(stream + 0x9E3779B97F4A7C15ull))) {}

    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }

    // Uniform in [0,1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0,1); never exactly 0 so it is safe under log/quantile.
    double next_open() {
        double u = next_double();
        while (u <= 0.0) u = next_double();
        return u;
    }

    bool bernoulli(double p) { return next_double() < p; }

    // Uniform integer in [0, n), n > 0. Lemire-style scaling.
    uint64_t uniform_below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    double normal(double mean = 0.0, double sd = 1.0);
    double lognormal(double mu_log, double sigma_log);

    // Draw from Poisson(lambda); lambda < 0 is a domain error.
    uint64_t poisson(double lambda);

    // Index into a categorical distribution given its cumulative weights
    // (cum.back() == total mass).
    std::size_t categorical(const std::vector<double>& cum);

private:
    uint64_t state_;
};

// Free-function form used by the simulator contract.
uint64_t sample_poisson(double lambda, Rng& rng);

}  // namespace abx
