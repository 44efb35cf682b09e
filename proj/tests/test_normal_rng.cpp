#include <doctest.h>

#include <cmath>
#include <vector>

#include "abx/error.hpp"
#include "abx/normal.hpp"
#include "abx/rng.hpp"

using namespace abx;

namespace {

// Reference values computed with mpmath at 40 digits.
struct CdfRef {
    double x;
    double p;
};
const CdfRef kCdfRefs[] = {
    {-8.0, 6.220960574271784123516e-16},
    {-6.0, 9.865876450376981407009e-10},
    {-5.0, 2.866515718791939116738e-7},
    {-4.0, 0.00003167124183311992125377},
    {-3.0, 0.001349898031630094526652},
    {-2.5, 0.006209665325776135166978},
    {-2.0, 0.02275013194817920720028},
    {-1.959964, 0.0249999990964424043025},
    {-1.5, 0.06680720126885806600449},
    {-1.0, 0.1586552539314570514148},
    {-0.5, 0.3085375387259868963623},
    {-0.1, 0.4601721627229710185346},
    {0.0, 0.5},
    {0.1, 0.5398278372770289814654},
    {0.5, 0.6914624612740131036377},
    {1.0, 0.8413447460685429485852},
    {1.5, 0.9331927987311419339955},
    {1.959964, 0.9750000009035575956975},
    {2.0, 0.9772498680518207927997},
    {2.5, 0.993790334674223864833},
    {3.0, 0.9986501019683699054733},
    {4.0, 0.9999683287581668800787},
    {5.0, 0.9999997133484281208061},
    {6.0, 0.9999999990134123549623},
    {8.0, 0.9999999999999993779039},
};

struct QuantileRef {
    double p;
    double z;
};
const QuantileRef kQuantileRefs[] = {
    {0.001, -3.09023230616781354154},
    {0.01, -2.326347874040841100886},
    {0.025, -1.959963984540054235525},
    {0.05, -1.644853626951472714864},
    {0.1, -1.281551565544600466965},
    {0.3, -0.5244005127080407840383},
    {0.5, 0.0},
    {0.7, 0.5244005127080407840383},
    {0.9, 1.281551565544600466965},
    {0.95, 1.644853626951472714864},
    {0.975, 1.959963984540054235525},
    {0.99, 2.326347874040841100886},
    {0.995, 2.575829303548900760979},
    {0.999, 3.09023230616781354154},
    {0.000001, -4.753424308822898948194},
    {0.999999, 4.753424308822898948194},
};

}  // namespace

TEST_CASE("normal cdf matches reference values to 1e-9") {
    for (const auto& ref : kCdfRefs)
        CHECK(std::fabs(normal_cdf(ref.x) - ref.p) < 1e-9);
}

TEST_CASE("normal quantile matches reference values") {
    for (const auto& ref : kQuantileRefs)
        CHECK(std::fabs(normal_quantile(ref.p) - ref.z) < 1e-9);
    CHECK_THROWS_AS(normal_quantile(0.0), Error);
    CHECK_THROWS_AS(normal_quantile(1.0), Error);
}

TEST_CASE("cdf and quantile roundtrip") {
    for (double p = 0.0005; p < 1.0; p += 0.0101)
        CHECK(std::fabs(normal_cdf(normal_quantile(p)) - p) < 1e-12);
}

TEST_CASE("poisson: degenerate rate always draws zero") {
    Rng rng(123);
    for (int i = 0; i < 100; ++i) CHECK(rng.poisson(0.0) == 0);
    CHECK_THROWS_AS(rng.poisson(-0.5), Error);
}

TEST_CASE("poisson: moments at lambda=0.35 over 1e6 draws") {
    Rng rng(20160406);
    const int n = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double k = static_cast<double>(sample_poisson(0.35, rng));
        sum += k;
        sumsq += k * k;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::fabs(mean - 0.35) < 0.002);
    CHECK(std::fabs(var - 0.35) < 0.005);
}

TEST_CASE("poisson: large rates via chunking agree with moments") {
    Rng rng(7);
    const int n = 20000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double k = static_cast<double>(rng.poisson(75.0));
        sum += k;
        sumsq += k * k;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::fabs(mean - 75.0) < 0.5);
    CHECK(std::fabs(var - 75.0) < 3.0);
}

TEST_CASE("poisson: golden sequence for a fixed seed") {
    // Frozen at first implementation; guards the determinism contract.
    Rng rng(42, 0);
    std::vector<uint64_t> draws;
    for (int i = 0; i < 10; ++i) draws.push_back(rng.poisson(1.0));
    const std::vector<uint64_t> golden = {1, 0, 0, 1, 0, 2, 1, 1, 1, 0};
    CHECK(draws == golden);
}

TEST_CASE("splitmix64 matches the published seed-0 vector") {
    Rng r(0);
    CHECK(r.next_u64() == 0xE220A8397B1DCDAFull);
    CHECK(r.next_u64() == 0x6E789E6AA1B965F4ull);
}

TEST_CASE("identical seeds give identical streams, distinct streams differ") {
    Rng a(99, 5), b(99, 5), c(99, 6);
    bool all_equal_ab = true, any_diff_ac = false;
    for (int i = 0; i < 64; ++i) {
        const uint64_t va = a.next_u64(), vb = b.next_u64(), vc = c.next_u64();
        all_equal_ab &= va == vb;
        any_diff_ac |= va != vc;
    }
    CHECK(all_equal_ab);
    CHECK(any_diff_ac);
}

TEST_CASE("uniform_below stays in range and covers it") {
    Rng rng(1);
    std::vector<int> seen(13, 0);
    for (int i = 0; i < 5000; ++i) ++seen[static_cast<std::size_t>(rng.uniform_below(13))];
    for (int count : seen) CHECK(count > 0);
}
