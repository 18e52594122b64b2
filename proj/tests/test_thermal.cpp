#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dhwflex/rng.hpp"
#include "dhwflex/thermal.hpp"
#include "support/oracles.hpp"

using namespace dhwflex;

namespace {

DeviceParams default_params() {
    DeviceParams p;
    p.validate();
    return p;
}

StepInputs quiet_minute(double g = 0.0) {
    StepInputs in;
    in.heat_power_W = g;
    return in;
}

} // namespace

TEST_CASE("derived parameters are exact products/quotients") {
    DeviceParams p = default_params();
    REQUIRE(p.thermal_capacity() == p.water_mass_kg * p.specific_heat_J_per_kgK);
    REQUIRE(p.loss_coeff() == p.surface_area_m2 / p.tank_resistance_Km2_per_W);
}

TEST_CASE("zeta collapses to ambient when there is no draw") {
    DeviceParams p = default_params();
    StepInputs in = quiet_minute();
    in.ambient_C = 20.0;
    auto c = step_coefficients(p, in);
    REQUIRE(c.zeta == Catch::Approx(20.0).margin(1e-12));
}

TEST_CASE("a + a_bar = 1 and a in (0,1) for random valid inputs") {
    Rng rng(42);
    DeviceParams p = default_params();
    for (int i = 0; i < 200; ++i) {
        StepInputs in;
        in.draw_rate_kg_s = rng.uniform(0.0, 0.2);
        in.ambient_C = rng.uniform(-5.0, 35.0);
        in.inlet_C = rng.uniform(5.0, 25.0);
        in.step_len_s = rng.uniform(1.0, 900.0);
        auto c = step_coefficients(p, in);
        REQUIRE(c.a + c.a_bar == 1.0);
        REQUIRE(c.a > 0.0);
        REQUIRE(c.a < 1.0);
    }
}

TEST_CASE("a-coefficient matches the frozen micro-step oracle value") {
    // 80 L tank per the published figure (C_th = 334800 J/K as stated),
    // G = 2 W/K, no draw, one minute.
    DeviceParams p = default_params();
    p.water_mass_kg = 334800.0 / p.specific_heat_J_per_kgK;  // C_th exactly 334800
    StepInputs in = quiet_minute();
    auto c = step_coefficients(p, in);
    REQUIRE(c.a == Catch::Approx(0.99964164128675996).epsilon(1e-12));

    // Independent check: decay factor recovered from an Euler integration of
    // dT/dt = -(G/C)(T - Ta) at dt = 0.01 s.
    const double T0 = 50.0, Ta = 20.0;
    const double T_euler = oracles::euler_tank(T0, 334800.0, 2.0, 0.0, Ta, 15.0, 0.98, 0.0, 60.0, 0.01);
    const double a_euler = (T_euler - Ta) / (T0 - Ta);
    REQUIRE(std::abs(c.a - a_euler) / a_euler <= 1e-6);
}

TEST_CASE("step: ambient equilibrium is a fixed point") {
    DeviceParams p = default_params();
    StepInputs in = quiet_minute();
    in.ambient_C = 20.0;
    DeviceState s{20.0, 0};
    auto s2 = step(s, p, in);
    REQUIRE(s2.temperature_C == Catch::Approx(20.0).margin(1e-12));
    REQUIRE(s2.minute_index == 1);
}

TEST_CASE("step: free cooling lands strictly between ambient and start") {
    DeviceParams p = default_params();
    StepInputs in = quiet_minute();
    DeviceState s{55.0, 0};
    auto s2 = step(s, p, in);
    REQUIRE(s2.temperature_C > in.ambient_C);
    REQUIRE(s2.temperature_C < s.temperature_C);
}

TEST_CASE("heated step matches the closed form and the Euler oracle") {
    DeviceParams p = default_params();  // C_th = 334880 J/K, G = 2 W/K
    StepInputs in = quiet_minute(2500.0);
    DeviceState s{50.0, 0};
    auto s2 = step(s, p, in);
    REQUIRE(s2.temperature_C == Catch::Approx(50.428136378055256).epsilon(1e-12));

    const double T_euler = oracles::euler_tank(50.0, p.thermal_capacity(), 2.0, 0.0, 20.0, 15.0,
                                               0.98, 2500.0, 60.0, 0.01);
    REQUIRE(std::abs(s2.temperature_C - T_euler) <= 1e-5);
}

TEST_CASE("contraction toward ambient with no input") {
    DeviceParams p = default_params();
    StepInputs in = quiet_minute();
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const double T = rng.uniform(-10.0, 95.0);
        if (std::abs(T - in.ambient_C) < 1e-9) continue;
        auto s2 = step({T, 0}, p, in);
        REQUIRE(std::abs(s2.temperature_C - in.ambient_C) < std::abs(T - in.ambient_C));
    }
}

TEST_CASE("step is affine in heating power with positive slope") {
    DeviceParams p = default_params();
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        StepInputs in;
        in.draw_rate_kg_s = rng.uniform(0.0, 0.1);
        const double T = rng.uniform(20.0, 85.0);
        auto at = [&](double g) {
            StepInputs j = in;
            j.heat_power_W = g;
            return step({T, 0}, p, j).temperature_C;
        };
        const double f0 = at(0.0), f1 = at(1000.0), f2 = at(2000.0);
        REQUIRE(f1 - f0 == Catch::Approx(f2 - f1).epsilon(1e-9));
        REQUIRE(f1 > f0);
    }
}

TEST_CASE("micro-step equivalence: sixty 1 s steps equal one 60 s step") {
    DeviceParams p = default_params();
    Rng rng(13);
    for (int i = 0; i < 50; ++i) {
        StepInputs in;
        in.draw_rate_kg_s = rng.uniform(0.0, 0.15);
        in.heat_power_W = rng.uniform(0.0, 2500.0);
        in.ambient_C = rng.uniform(10.0, 30.0);
        DeviceState fine{rng.uniform(20.0, 85.0), 0};
        DeviceState coarse = fine;

        StepInputs micro = in;
        micro.step_len_s = 1.0;
        for (int k = 0; k < 60; ++k) fine = step(fine, p, micro);

        StepInputs macro = in;
        macro.step_len_s = 60.0;
        coarse = step(coarse, p, macro);

        REQUIRE(std::abs(fine.temperature_C - coarse.temperature_C) /
                    std::max(1.0, std::abs(coarse.temperature_C)) <=
                1e-9);
    }
}

TEST_CASE("backup truth table is exhaustive over the three bands") {
    ComfortBounds b{50.0, 85.0, 45.0};
    for (int u : {0, 1}) {
        REQUIRE(backup(30.0, u, b) == 1);   // below lower: forced on
        REQUIRE(backup(50.0, u, b) == 1);   // exactly lower: forced on
        REQUIRE(backup(60.0, u, b) == u);   // inside band: pass-through
        REQUIRE(backup(85.0, u, b) == u);   // exactly upper: still allowed
        REQUIRE(backup(85.5, u, b) == 0);   // above upper: forced off
    }
    // The three published branch examples.
    ComfortBounds b2{40.0, 60.0, 35.0};
    REQUIRE(backup(30.0, 0, b2) == 1);
    REQUIRE(backup(50.0, 1, b2) == 1);
    REQUIRE(backup(65.0, 1, b2) == 0);
}

TEST_CASE("step cost arithmetic") {
    DeviceParams p = default_params();
    ComfortBounds b{50.0, 85.0, 45.0};
    const double lambda = 2e-8;

    REQUIRE(step_cost(0, 45.0, p, b, lambda, 0.001, 60.0) == 0.0);
    REQUIRE(step_cost(1, 45.0, p, b, lambda, 0.0, 60.0) == Catch::Approx(0.003));
    REQUIRE(step_cost(0, 55.0, p, b, lambda, 0.001, 60.0) == Catch::Approx(-0.001));
    // Both terms together.
    REQUIRE(step_cost(1, 55.0, p, b, lambda, 0.001, 60.0) == Catch::Approx(0.002));
}

TEST_CASE("invalid inputs are rejected") {
    DeviceParams p = default_params();
    StepInputs in;
    in.draw_rate_kg_s = -1.0;
    REQUIRE_THROWS_AS(step_coefficients(p, in), std::invalid_argument);
    StepInputs in2;
    in2.step_len_s = 0.0;
    REQUIRE_THROWS_AS(step_coefficients(p, in2), std::invalid_argument);
    DeviceParams bad = p;
    bad.efficiency = 1.5;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}
