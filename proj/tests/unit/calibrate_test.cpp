#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracle.hpp"
#include "selfbias/calibrate.hpp"
#include "selfbias/error.hpp"

using namespace selfbias;
using calibrate::QuantileMap;

namespace {

std::vector<double> grid(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    return v;
}

}  // namespace

TEST_SUITE("calibrate") {

TEST_CASE("identity when source equals target") {
    const std::vector<double> s{0.3, -1.0, 2.5, 2.5, 7.0};
    const auto m = calibrate::fit_quantile_map(s, s);
    for (double v : s) CHECK(m.apply(v) == v);
}

TEST_CASE("two-point map") {
    const auto m = calibrate::fit_quantile_map(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, -25.0});
    CHECK(m.source_quantiles() == std::vector<double>{0.0, 1.0});
    CHECK(m.target_quantiles() == std::vector<double>{-25.0, 0.0});
    CHECK(m.apply(0.25) == doctest::Approx(-18.75).epsilon(1e-15));
    CHECK(m.apply(0.0) == -25.0);
    CHECK(m.apply(1.0) == 0.0);
    CHECK(m.apply(-3.0) == -25.0);
    CHECK(m.apply(4.0) == 0.0);
    CHECK_THROWS_AS(m.apply(std::nan("")), ValidationError);
}

TEST_CASE("uniform grids transport linearly") {
    const auto m = calibrate::fit_quantile_map(grid(0.0, 1.0, 10001), grid(-25.0, 0.0, 10001));
    CHECK(std::fabs(m.apply(0.5) + 12.5) <= 1e-6);
    CHECK(std::fabs(m.apply(0.123) - (-25.0 + 25.0 * 0.123)) <= 1e-6);
}

TEST_CASE("unequal sample sizes interpolate the shorter side") {
    const auto m = calibrate::fit_quantile_map(grid(0.0, 1.0, 5), grid(-25.0, 0.0, 101));
    CHECK(m.source_quantiles().size() == 101);
    CHECK(m.apply(0.5) == doctest::Approx(-12.5));
    const auto n = calibrate::fit_quantile_map(grid(0.0, 1.0, 101), grid(-25.0, 0.0, 3));
    CHECK(n.apply(0.75) == doctest::Approx(-6.25));
}

TEST_CASE("fit rejects bad samples") {
    CHECK_THROWS_AS(calibrate::fit_quantile_map(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), ValidationError);
    CHECK_THROWS_AS(calibrate::fit_quantile_map(std::vector<double>{1.0, INFINITY}, std::vector<double>{1.0, 2.0}),
                    ValidationError);
    CHECK_THROWS_AS(QuantileMap({1.0, 0.0}, {0.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(QuantileMap({0.0, 1.0}, {0.0}), ValidationError);
}

TEST_CASE("monotone, in range, rank preserving") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> src(0.6, 0.2);
    std::uniform_real_distribution<double> tgt(-25.0, 0.0);
    std::uniform_real_distribution<double> probe(-1.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(2 + trial * 7), b(2 + trial * 3);
        for (auto& v : a) v = src(rng);
        for (auto& v : b) v = tgt(rng);
        const auto m = calibrate::fit_quantile_map(a, b);
        const double lo = *std::min_element(b.begin(), b.end());
        const double hi = *std::max_element(b.begin(), b.end());
        std::vector<double> xs(200);
        for (auto& x : xs) x = probe(rng);
        std::sort(xs.begin(), xs.end());
        double prev = -INFINITY;
        for (double x : xs) {
            const double y = m.apply(x);
            CHECK(y >= prev);
            CHECK(y >= lo);
            CHECK(y <= hi);
            prev = y;
        }
    }
}

TEST_CASE("json round trip") {
    const QuantileMap m({0.0, 0.5, 1.0}, {-25.0, -10.0, 0.0});
    CHECK(QuantileMap::from_json(m.to_json()) == m);
    CHECK_THROWS_AS(QuantileMap::from_json("{\"source_quantiles\": [0]}"), ValidationError);
    CHECK_THROWS_AS(QuantileMap::from_json("not json"), ValidationError);
}

TEST_CASE("empirical quantile") {
    const std::vector<double> v{0.0, 10.0, 20.0};
    CHECK(calibrate::empirical_quantile(v, 0.0) == 0.0);
    CHECK(calibrate::empirical_quantile(v, 0.25) == doctest::Approx(5.0));
    CHECK(calibrate::empirical_quantile(v, 1.0) == 20.0);
}

}  // TEST_SUITE
