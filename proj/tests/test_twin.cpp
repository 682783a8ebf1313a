#include <doctest.h>

#include "hydrotwin/errors.hpp"
#include "hydrotwin/twin.hpp"

#include <cmath>
#include <random>

using namespace hydrotwin;

namespace {

Plant one_reactor(double rate) {
    Plant p;
    p.reactors.push_back({1, rate, 0, 0});
    return p;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace

TEST_CASE("step_dynamics applies inflow and throughput") {
    const Plant plant = one_reactor(8.0);
    auto state = initial_state(plant, 70.0);
    const auto res = step_dynamics(plant, state, 5.0, {true});
    CHECK(res.next_state.tank.level_pct == doctest::Approx(67.0).epsilon(1e-12));
    CHECK_FALSE(res.overflow);
    CHECK_FALSE(res.underflow);
    CHECK(res.next_state.t_index == 1);
    CHECK(res.next_state.reactors[0] == ReactorStatus{true, 1});
}

TEST_CASE("step_dynamics fixed point with everything off") {
    const Plant plant = Plant::default_plant();
    auto state = initial_state(plant, 60.0);
    const auto res = step_dynamics(plant, state, 0.0, {false, false, false});
    CHECK(res.next_state.tank.level_pct == 60.0);
    CHECK(res.next_state.reactors[0].steps_in_state == 1);
}

TEST_CASE("step_dynamics clamps and flags") {
    const Plant plant = one_reactor(8.0);
    auto low = step_dynamics(plant, initial_state(plant, 3.0), 0.0, {true});
    CHECK(low.next_state.tank.level_pct == 0.0);
    CHECK(low.underflow);
    CHECK_FALSE(low.overflow);

    auto high = step_dynamics(plant, initial_state(plant, 98.0), 5.0, {false});
    CHECK(high.next_state.tank.level_pct == 100.0);
    CHECK(high.overflow);
}

TEST_CASE("step_dynamics rejects a wrong-length decision vector") {
    const Plant plant = Plant::default_plant();
    auto state = initial_state(plant, 50.0);
    try {
        step_dynamics(plant, state, 1.0, {true});
        FAIL("expected dimension error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::dimension);
    }
}

TEST_CASE("true_energy formula values") {
    CHECK(true_energy({165, 0.16, 30}) == doctest::Approx(44.5).epsilon(1e-12));
    // Lower corner: every linear delta is zero but the interaction term,
    // centred at (165, 0.16), still contributes 4 * (-15) * (-0.04) = 2.4.
    CHECK(true_energy({150, 0.12, 20}) == doctest::Approx(37.4).epsilon(1e-12));
    CHECK(true_energy({180, 0.20, 40}) == doctest::Approx(56.4).epsilon(1e-12));
    CHECK_THROWS_AS(true_energy({181, 0.16, 30}), Error);
}

TEST_CASE("true_quality formula values") {
    CHECK(true_quality({160, 0.14, 25}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(true_quality({172, 0.18, 35}) == doctest::Approx(sigmoid(4.0)).epsilon(1e-12));
    CHECK(true_quality({172, 0.18, 35}) == doctest::Approx(0.9820).epsilon(1e-4));
    CHECK(true_quality({150, 0.12, 20}) == doctest::Approx(0.0474).epsilon(1e-3));
    CHECK_THROWS_AS(true_quality({160, 0.25, 25}), Error);
}

TEST_CASE("true_energy has zero curvature along temperature") {
    const double h = 1.0;
    for (double ds : {0.12, 0.15, 0.2}) {
        const double f0 = true_energy({160, ds, 30});
        const double fp = true_energy({160 + h, ds, 30});
        const double fm = true_energy({160 - h, ds, 30});
        CHECK(std::fabs(fp - 2 * f0 + fm) / (h * h) < 1e-6);
    }
}

TEST_CASE("true_quality strictly increasing in temperature and cycle on a grid") {
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            const double T = 150.0 + 6.0 * i;
            const double c = 20.0 + 4.0 * j;
            const double q = true_quality({T, 0.16, c});
            if (i + 1 < 5) CHECK(true_quality({T + 6.0, 0.16, c}) > q);
            if (j + 1 < 5) CHECK(true_quality({T, 0.16, c + 4.0}) > q);
        }
}

TEST_CASE("sample_observation noise contract") {
    std::mt19937_64 rng(7);
    const OperatingPoint op{170, 0.15, 32};
    const auto exact = sample_observation(op, GroundTruthParams::noiseless(), rng);
    CHECK(exact.energy == true_energy(op));
    CHECK(exact.quality == true_quality(op));

    GroundTruthParams noisy;
    std::mt19937_64 a(11), b(11);
    for (int i = 0; i < 20; ++i) {
        const auto x = sample_observation(op, noisy, a);
        const auto y = sample_observation(op, noisy, b);
        CHECK(x.energy == y.energy);
        CHECK(x.quality == y.quality);
    }

    GroundTruthParams wide;
    wide.noise_sigma_quality = 0.5;
    wide.b_temp = 2.0;   // pushes q very close to 1 at 180 C
    std::mt19937_64 rng2(3);
    for (int i = 0; i < 500; ++i) {
        const auto o = sample_observation({180, 0.16, 40}, wide, rng2);
        CHECK(o.quality <= 1.0);
        CHECK(o.quality >= 0.0);
    }
}

TEST_CASE("simulate_episode identity and balance cases") {
    const Plant plant = Plant::default_plant();
    const int T = 10;
    std::vector<std::optional<OperatingPoint>> ops(T);
    {
        std::vector<double> inflow(T, 0.0);
        const auto ep = simulate_episode(plant, initial_state(plant, 55.0), inflow, Schedule(3, T), ops);
        for (double l : ep.levels()) CHECK(l == 55.0);
        CHECK(ep.total_energy() == 0.0);
    }
    {
        Plant p8 = one_reactor(8.0);
        std::vector<double> inflow(T, 8.0);
        const auto ep = simulate_episode(p8, initial_state(p8, 40.0), inflow, Schedule(1, T, true), ops);
        for (double l : ep.levels()) CHECK(l == 40.0);
        // 8 % of 500 m3 per step at the default point
        CHECK(ep.energy_kwh[0] == doctest::Approx(40.0 * true_energy({})).epsilon(1e-12));
    }
    std::vector<double> short_inflow(T - 1, 0.0);
    CHECK_THROWS_AS(simulate_episode(plant, initial_state(plant, 50.0), short_inflow, Schedule(3, T), ops), Error);
}

TEST_CASE("level conservation without clamping") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> inflow_d(0.0, 6.0);
    std::bernoulli_distribution coin(0.4);
    const Plant plant = Plant::default_plant();
    for (int trial = 0; trial < 50; ++trial) {
        const int T = 20;
        std::vector<double> inflow(T);
        Schedule s(3, T);
        double expected = 50.0;
        for (int t = 0; t < T; ++t) {
            inflow[static_cast<std::size_t>(t)] = inflow_d(rng);
            expected += inflow[static_cast<std::size_t>(t)];
            for (int r = 0; r < 3; ++r) {
                s.set(r, t, coin(rng));
                if (s.on(r, t)) expected -= 4.0;
            }
        }
        std::vector<std::optional<OperatingPoint>> ops(T);
        const auto ep = simulate_episode(plant, initial_state(plant, 50.0), inflow, s, ops);
        bool clamped = false;
        for (const auto& st : ep.steps) clamped = clamped || st.overflow || st.underflow;
        if (!clamped) CHECK(std::fabs(ep.levels().back() - expected) < 1e-9);
    }
}

TEST_CASE("clamp monotonicity: more inflow never lowers later levels") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> inflow_d(0.0, 15.0);
    std::bernoulli_distribution coin(0.5);
    const Plant plant = Plant::default_plant();
    for (int trial = 0; trial < 100; ++trial) {
        const int T = 15;
        std::vector<double> inflow(T);
        Schedule s(3, T);
        for (int t = 0; t < T; ++t) {
            inflow[static_cast<std::size_t>(t)] = inflow_d(rng);
            for (int r = 0; r < 3; ++r) s.set(r, t, coin(rng));
        }
        std::vector<std::optional<OperatingPoint>> ops(T);
        const auto base = simulate_episode(plant, initial_state(plant, 50.0), inflow, s, ops).levels();
        auto bumped = inflow;
        bumped[static_cast<std::size_t>(trial % T)] += 7.5;
        const auto more = simulate_episode(plant, initial_state(plant, 50.0), bumped, s, ops).levels();
        for (int t = 0; t < T; ++t) CHECK(more[static_cast<std::size_t>(t)] >= base[static_cast<std::size_t>(t)]);
    }
}

TEST_CASE("simulate_episode is deterministic") {
    const Plant plant = Plant::default_plant();
    std::vector<double> inflow{3, 9, 2, 7, 7, 1};
    Schedule s(3, 6);
    s.set(0, 1, true);
    s.set(1, 3, true);
    s.set(2, 4, true);
    std::vector<std::optional<OperatingPoint>> ops(6, OperatingPoint{170, 0.18, 35});
    const auto a = simulate_episode(plant, initial_state(plant, 50.0), inflow, s, ops);
    const auto b = simulate_episode(plant, initial_state(plant, 50.0), inflow, s, ops);
    CHECK(a.levels() == b.levels());
    CHECK(a.energy_kwh == b.energy_kwh);
}
