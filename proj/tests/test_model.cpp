#include <doctest.h>

#include "qfb/model.hpp"

using namespace qfb;

TEST_CASE("bloch_from_angles maps the poles and the +y equator point") {
    const auto e = bloch_from_angles({0.0, 0.0});
    CHECK(e.x == doctest::Approx(0.0));
    CHECK(e.z == doctest::Approx(1.0));

    const auto g = bloch_from_angles({kPi, 0.0});
    CHECK(g.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(g.z == doctest::Approx(-1.0));

    const auto y = bloch_from_angles({kPi / 2, kPi / 2});
    CHECK(std::abs(y.x) < 1e-15);
    CHECK(y.y == doctest::Approx(1.0));
    CHECK(std::abs(y.z) < 1e-15);
}

TEST_CASE("bloch_from_angles rejects out-of-range angles") {
    CHECK_THROWS_AS(bloch_from_angles({-0.1, 0.0}), ConfigError);
    CHECK_THROWS_AS(bloch_from_angles({kPi + 1e-9, 0.0}), ConfigError);
    CHECK_THROWS_AS(bloch_from_angles({1.0, kTwoPi}), ConfigError);
    CHECK_THROWS_AS(bloch_from_angles({1.0, -1e-12}), ConfigError);
    CHECK_THROWS_AS(bloch_from_angles({std::nan(""), 0.0}), ConfigError);
}

TEST_CASE("bloch_from_angles is a unit vector on a dense grid") {
    for (int i = 0; i <= 40; ++i) {
        for (int j = 0; j < 40; ++j) {
            const TargetState t{kPi * i / 40.0, kTwoPi * j / 40.0};
            CHECK(std::abs(bloch_from_angles(t).norm() - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("fidelity examples") {
    CHECK(fidelity({0, 0, 1}, {0.0, 0.0}) == doctest::Approx(1.0));
    CHECK(fidelity({0, 0, 0}, {1.2, 3.4}) == doctest::Approx(0.5));
    CHECK(fidelity({0, 0.22, 0}, {kPi / 2, kPi / 2}) == doctest::Approx(0.61));
    CHECK(fidelity({0, 0, -1}, {0.0, 0.0}) == doctest::Approx(0.0));
}

TEST_CASE("fidelity is monotone in r.n and equals 1 only at the target") {
    const TargetState t{1.1, 0.4};
    const auto n = bloch_from_angles(t);
    double prev = -1.0;
    for (int k = -10; k <= 10; ++k) {
        const double f = fidelity((k / 10.0) * n, t);
        CHECK(f > prev);
        prev = f;
    }
    CHECK(prev == doctest::Approx(1.0));
    const BlochVector off = bloch_from_angles({1.2, 0.4});
    CHECK(fidelity(off, t) < 1.0);
}

TEST_CASE("physical parameter validation") {
    PhysicalParams p;
    CHECK_NOTHROW(p.validate());
    p.eta = 1.5;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.gamma1 = -1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.fm_bandwidth = 4e6;  // above B
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.thermal_z0 = -1.5;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.delay = -1e-9;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("device and ideal parameter sets") {
    const auto p = PhysicalParams::experiment();
    CHECK(p.gamma1 == doctest::Approx(1.0 / 4.7e-6));
    CHECK(p.gamma_phi == doctest::Approx(1.0 / 22e-6));
    CHECK(p.eta == 0.35);
    CHECK(p.bandwidth == 3.3e6);
    CHECK(p.fm_bandwidth == 2.0e6);
    CHECK(p.delay == doctest::Approx(0.12e-6));
    CHECK(p.gamma_m == doctest::Approx(1.0 / 84e-6));
    CHECK(p.f_q_ghz == 6.27);
    CHECK(p.f_c_ghz == 7.86);
    CHECK(p.detuning_ghz == 0.1);
    CHECK(p.thermal_z0 == -1.0);

    const auto i = PhysicalParams::ideal();
    CHECK(i.eta == 1.0);
    CHECK(i.gamma_phi == 0.0);
    CHECK(i.gamma_m == 0.0);
    CHECK(i.record_amplitude() == doctest::Approx(std::sqrt(i.gamma1 / 2.0)));
}
