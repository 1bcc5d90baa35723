#include "doctest.h"

#include "crt/error.hpp"
#include "crt/rng.hpp"
#include "crt/targets.hpp"

using namespace crt;

TEST_SUITE("targets") {

TEST_CASE("cumulative time telescopes to the last arrival") {
    CHECK(cumulative_crt({3600}) == 3600);
    // 3600 + (7200-3600) + (9000-7200) = 9000
    CHECK(cumulative_crt({3600, 7200, 9000}) == 9000);
    CHECK_THROWS_WITH_AS(cumulative_crt({3600, 3000}), doctest::Contains("non-monotone"),
                         ValidationError);
    CHECK_THROWS_AS(cumulative_crt({}), ValidationError);
    CHECK_THROWS_AS(cumulative_crt({100, 100}), ValidationError);
}

TEST_CASE("scaler fit takes min at the first RP, max at the last") {
    const std::vector<std::pair<int, std::int64_t>> train = {
        {0, 28800}, {0, 30000}, {1, 45000}, {2, 72000}, {2, 73980}};
    const TargetScaler s = fit_scaler(train, 3);
    CHECK(s.min0 == 28800);
    CHECK(s.maxP == 73980);
}

TEST_CASE("single observation at each endpoint fixes the scaler") {
    const TargetScaler s = fit_scaler({{0, 30000}, {1, 64000}}, 2);
    CHECK(s.min0 == 30000);
    CHECK(s.maxP == 64000);
}

TEST_CASE("missing endpoint observations are errors") {
    CHECK_THROWS_WITH_AS(fit_scaler({{0, 30000}, {1, 64000}}, 3),
                         doctest::Contains("last"), ValidationError);
    CHECK_THROWS_WITH_AS(fit_scaler({{1, 30000}, {2, 64000}}, 3),
                         doctest::Contains("first"), ValidationError);
    CHECK_THROWS_AS(fit_scaler({}, 3), ValidationError);
    // degenerate: min0 must be strictly below maxP
    CHECK_THROWS_AS(fit_scaler({{0, 64000}, {1, 50000}}, 2), ValidationError);
}

TEST_CASE("normalization endpoints") {
    const TargetScaler s{28800, 73980};
    CHECK(s.normalize(28800) == 0.0);
    const TargetScaler zero_min{0, 73980};
    CHECK(zero_min.normalize(73980) == 1.0);
    // denominator is maxP alone, so the top of the range stays below 1
    CHECK(s.normalize(73980) == doctest::Approx((73980.0 - 28800.0) / 73980.0));
    CHECK(s.normalize(73980) < 1.0);
}

TEST_CASE("0.015 normalized MAE is roughly 18.5 minutes at maxP = 73980 s") {
    const TargetScaler s{28800, 73980};
    const double minutes = s.denormalize_error_minutes(0.015);
    CHECK(minutes == doctest::Approx(18.4950));
    CHECK(std::abs(minutes - 18.5) <= 0.1);
    // linearity: doubling the normalized error doubles the minutes
    CHECK(s.denormalize_error_minutes(0.030) == doctest::Approx(2.0 * minutes));
}

TEST_CASE("out-of-range CRTs clamp and report it") {
    const TargetScaler s{20000, 60000};
    bool clamped = false;
    CHECK(s.normalize(10000, &clamped) == 0.0);
    CHECK(clamped);
    CHECK(s.normalize(90000, &clamped) == doctest::Approx(40000.0 / 60000.0));
    CHECK(clamped);
    s.normalize(30000, &clamped);
    CHECK_FALSE(clamped);
}

TEST_CASE("property: normalize is strictly increasing and lands in [0,1]") {
    Rng rng(15);
    for (int trial = 0; trial < 200; ++trial) {
        const std::int64_t min0 = static_cast<std::int64_t>(rng.below(40000));
        const std::int64_t maxP = min0 + 1 + static_cast<std::int64_t>(rng.below(60000));
        const TargetScaler s{min0, maxP};
        const std::int64_t a = min0 + static_cast<std::int64_t>(rng.below(
                                          static_cast<std::uint64_t>(maxP - min0)));
        const std::int64_t b = a + 1 + static_cast<std::int64_t>(rng.below(1000));
        const double na = s.normalize(a);
        const double nb = s.normalize(std::min(b, maxP));
        CHECK(na >= 0.0);
        CHECK(na <= 1.0);
        if (std::min(b, maxP) > a) CHECK(nb > na);
    }
}

}  // TEST_SUITE
