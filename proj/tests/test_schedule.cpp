#include <cmath>

#include "doctest.h"
#include "gbmd/errors.hpp"
#include "gbmd/schedule.hpp"

using namespace gbmd;

TEST_CASE("linear schedule matches the level-to-step anchors") {
    NoiseSchedule s = build_linear_schedule(500, 0.0004);
    CHECK(s.eta_at(0) == 0.0);
    CHECK(s.eta_at(100) == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(s.eta_at(200) == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(s.eta_at(300) == doctest::Approx(0.12).epsilon(1e-12));
    CHECK(s.eta_at(500) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(s.eta_at(125) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("schedule construction validates arguments") {
    CHECK_THROWS_AS(build_linear_schedule(0, 0.0004), std::invalid_argument);
    CHECK_THROWS_AS(build_linear_schedule(-5, 0.0004), std::invalid_argument);
    CHECK_THROWS_AS(build_linear_schedule(500, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(build_linear_schedule(500, -1.0), std::invalid_argument);
}

TEST_CASE("eta lookup is bounds-checked") {
    NoiseSchedule s = build_linear_schedule(500, 0.0004);
    CHECK_THROWS_AS(s.eta_at(-1), std::out_of_range);
    CHECK_THROWS_AS(s.eta_at(501), std::out_of_range);
    CHECK_THROWS_AS(s.increment(0), std::out_of_range);
}

TEST_CASE("step_for_noise_level inverts the schedule") {
    NoiseSchedule s = build_linear_schedule(500, 0.0004);
    CHECK(step_for_noise_level(s, 0.08) == 200);
    CHECK(step_for_noise_level(s, 0.0) == 0);
    CHECK(step_for_noise_level(s, 0.0399) == 100);

    SUBCASE("unreachable level names the maximum") {
        try {
            step_for_noise_level(s, 0.25);
            FAIL("expected LevelUnreachableError");
        } catch (const LevelUnreachableError& e) {
            CHECK(e.max_level() == doctest::Approx(0.2));
            CHECK(std::string(e.what()).find("0.2") != std::string::npos);
        }
    }
}

TEST_CASE("schedule invariants: monotonicity, consistency, telescoping") {
    NoiseSchedule s = build_linear_schedule(500, 0.0004);
    for (int k = 1; k <= s.K; ++k) {
        CHECK(s.eta_at(k) > s.eta_at(k - 1));
        CHECK(s.increment(k) > 0.0);
    }
    for (int k = 0; k <= s.K; ++k) {
        CHECK(step_for_noise_level(s, s.eta_at(k)) == k);
    }
    double total = 0.0;
    for (int k = 1; k <= s.K; ++k) {
        total += s.increment(k);
    }
    CHECK(total == doctest::Approx(s.max_level()).epsilon(1e-12));
}
