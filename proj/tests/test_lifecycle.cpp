// SPDX-License-Identifier: Apache-2.0

#include "brv/lifecycle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"

#include "brv/errors.hpp"

using namespace brv;
using namespace brv::akl;

namespace {

// Decay oracle for whole days: repeated multiplication, no pow().
double decay_oracle(double importance, int days) {
    double v = importance;
    for (int i = 0; i < days; i++) v *= 0.995;
    return v;
}

constexpr UtcSeconds kDay = 86400;

} // namespace

TEST_CASE("decay identities and oracle agreement") {
    CHECK(decay_importance(50.0, 0.0) == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(decay_importance(50.0, 10.0) == doctest::Approx(decay_oracle(50.0, 10)).epsilon(1e-9));
    CHECK(decay_importance(50.0, 10.0) == doctest::Approx(47.556).epsilon(1e-4));

    double prev = 100.0;
    for (int d = 1; d <= 400; d += 7) {
        double cur = decay_importance(100.0, d);
        CHECK(cur <= prev);
        prev = cur;
    }

    CHECK_THROWS_AS(decay_importance(50.0, -0.001), Error);
    try {
        decay_importance(50.0, -1.0);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::negative_elapsed);
    }
}

TEST_CASE("decay composes across splits") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> imp(0.0, 100.0);
    std::uniform_real_distribution<double> days(0.0, 50.0);
    for (int i = 0; i < 2000; i++) {
        double x = imp(rng), a = days(rng), b = days(rng);
        double split = decay_importance(decay_importance(x, a), b);
        double whole = decay_importance(x, a + b);
        CHECK(std::abs(split - whole) < 1e-9);
    }
}

TEST_CASE("maturity transitions follow the hysteresis table") {
    CHECK(evaluate_maturity(Maturity::Draft, 65.0) == Maturity::Validated);
    CHECK(evaluate_maturity(Maturity::Draft, 64.999) == Maturity::Draft);
    CHECK(evaluate_maturity(Maturity::Validated, 50.0) == Maturity::Validated);
    CHECK(evaluate_maturity(Maturity::Validated, 35.0) == Maturity::Validated);
    CHECK(evaluate_maturity(Maturity::Validated, 34.999) == Maturity::Draft);
    CHECK(evaluate_maturity(Maturity::Validated, 85.0) == Maturity::Core);
    CHECK(evaluate_maturity(Maturity::Core, 60.0) == Maturity::Core);
    CHECK(evaluate_maturity(Maturity::Core, 59.9) == Maturity::Validated);
    // Never more than one tier per evaluation.
    CHECK(evaluate_maturity(Maturity::Draft, 100.0) == Maturity::Validated);
    CHECK(evaluate_maturity(Maturity::Core, 0.0) == Maturity::Validated);
}

TEST_CASE("maturity is stable inside its hysteresis bands") {
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> step(-5.0, 5.0);
    double v = 50.0;
    for (int i = 0; i < 5000; i++) {
        v = std::clamp(v + step(rng), 35.0, 64.999);
        CHECK(evaluate_maturity(Maturity::Validated, v) == Maturity::Validated);
    }
    v = 70.0;
    for (int i = 0; i < 5000; i++) {
        v = std::clamp(v + step(rng), 60.0, 84.999);
        CHECK(evaluate_maturity(Maturity::Core, v) == Maturity::Core);
    }
}

TEST_CASE("recency fixed points") {
    CHECK(recency(1000, 1000) == doctest::Approx(1.0).epsilon(1e-12));
    auto half_life = static_cast<UtcSeconds>(std::llround(30.0 * std::log(2.0) * kDay));
    CHECK(std::abs(recency(0, half_life) - 0.5) < 1e-6);
    CHECK(std::abs(recency(0, 30 * kDay) - std::exp(-1.0)) < 1e-9);
    CHECK_THROWS_AS(recency(1000, 999), Error);
}

TEST_CASE("recency strictly decreases with age") {
    double prev = 2.0;
    for (UtcSeconds t = 0; t <= 200 * kDay; t += 13 * kDay + 331) {
        double r = recency(0, t);
        CHECK(r > 0.0);
        CHECK(r <= 1.0);
        CHECK(r < prev);
        prev = r;
    }
}

TEST_CASE("compound score arithmetic") {
    CHECK(compound_score(0.42, 77.0, 0.3, {1.0, 0.0, 0.0}) == doctest::Approx(0.42));
    CHECK(compound_score(0.8, 82.0, 0.91, {0.7, 0.2, 0.1}) ==
          doctest::Approx(0.815).epsilon(1e-12));
    CHECK(compound_score(0.0, 0.0, 0.0, {0.7, 0.2, 0.1}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(compound_score(0.5, 50.0, 0.5, {0.5, 0.5, 0.5}), Error);

    // Nondecreasing in each signal.
    double base = compound_score(0.5, 50.0, 0.5, {});
    CHECK(compound_score(0.6, 50.0, 0.5, {}) >= base);
    CHECK(compound_score(0.5, 60.0, 0.5, {}) >= base);
    CHECK(compound_score(0.5, 50.0, 0.6, {}) >= base);
}

TEST_CASE("events add their bonuses") {
    LifecycleState s = initial_state(0);
    s.importance = 0.0;

    LifecycleState after = apply_event(s, {EventKind::Access, 0}, 0);
    CHECK(after.importance == doctest::Approx(3.0));
    CHECK(after.access_count == 1);
    CHECK(after.update_count == 0);
    CHECK(after.updated_at == 0);

    s.importance = 98.0;
    after = apply_event(s, {EventKind::Update, 10}, 10);
    CHECK(after.importance == doctest::Approx(100.0)); // clamped
    CHECK(after.update_count == 1);
    CHECK(after.updated_at == 10);
    CHECK(after.recency == doctest::Approx(1.0));
}

TEST_CASE("events decay from the last touch before adding the bonus") {
    LifecycleState s = initial_state(0);
    s.importance = 82.0;
    LifecycleState after = apply_event(s, {EventKind::Access, 30 * kDay}, 30 * kDay);
    CHECK(after.importance == doctest::Approx(decay_oracle(82.0, 30) + 3.0).epsilon(1e-9));
    CHECK(after.importance == doctest::Approx(73.58).epsilon(1e-3));
    // Access does not advance updated_at, so recency reflects 30 idle days.
    CHECK(after.recency == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
    CHECK(after.last_touch == 30 * kDay);
}

TEST_CASE("event ordering errors") {
    LifecycleState s = initial_state(1000);
    try {
        apply_event(s, {EventKind::Access, 500}, 2000);
        FAIL("expected event_before_creation");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::event_before_creation);
    }
    try {
        apply_event(s, {EventKind::Access, 3000}, 2000);
        FAIL("expected negative_elapsed");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::negative_elapsed);
    }
}

TEST_CASE("importance never escapes its bounds under random event storms") {
    std::mt19937 rng(20260814);
    std::uniform_int_distribution<int> gap_days(0, 90);
    std::uniform_int_distribution<int> kind(0, 1);
    for (int run = 0; run < 200; run++) {
        LifecycleState s = initial_state(0);
        UtcSeconds clock = 0;
        for (int i = 0; i < 50; i++) {
            clock += static_cast<UtcSeconds>(gap_days(rng)) * kDay + (i * 7919) % 86400;
            s = apply_event(
                s, {kind(rng) ? EventKind::Update : EventKind::Access, clock}, clock);
            CHECK(s.importance >= 0.0);
            CHECK(s.importance <= 100.0);
            CHECK(s.recency > 0.0);
            CHECK(s.recency <= 1.0);
        }
        CHECK(s.access_count + s.update_count == 50);
    }
}

TEST_CASE("fresh entries start mid-band as drafts") {
    LifecycleState s = initial_state(12345);
    CHECK(s.importance == 50.0);
    CHECK(s.maturity == Maturity::Draft);
    CHECK(s.recency == 1.0);
    CHECK(s.created_at == 12345);
    CHECK(s.updated_at == 12345);
}
