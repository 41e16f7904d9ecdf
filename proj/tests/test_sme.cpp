#include <doctest.h>

#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "qfb/sme.hpp"

using namespace qfb;

namespace {

const PhysicalParams kDevice = PhysicalParams::experiment();

BlochVector random_state(std::mt19937_64& rng, bool pure) {
    std::normal_distribution<double> n;
    BlochVector r{n(rng), n(rng), n(rng)};
    r = (1.0 / r.norm()) * r;
    if (!pure) r = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * r;
    return r;
}

// Rotation by exp(K t), K the cross-product matrix of Omega = 2 (u, v, w).
BlochVector rotate_by_expm(const BlochVector& r, const ControlVector& c, double dt) {
    Eigen::Matrix3d K;
    const double ox = 2 * c.u, oy = 2 * c.v, oz = 2 * c.w;
    K << 0, -oz, oy, oz, 0, -ox, -oy, ox, 0;
    const Eigen::Vector3d out = (K * dt).exp() * Eigen::Vector3d(r.x, r.y, r.z);
    return {out(0), out(1), out(2)};
}

}  // namespace

TEST_CASE("ground state is dark under both update schemes") {
    for (auto scheme : {UpdateScheme::kraus, UpdateScheme::euler}) {
        const MeasurementModel m(kDevice, 0.0, 2e-9, scheme);
        for (double s : {-3.0, 0.0, 0.7, 5.0}) {
            const auto [r, rec] = m.apply({0, 0, -1}, s * 4e-5, -s * 3e-5);
            CHECK(r.x == 0.0);
            CHECK(r.y == 0.0);
            CHECK(r.z == -1.0);
            CHECK(rec.yI == s * 4e-5);
            CHECK(rec.yQ == -s * 3e-5);
        }
    }
}

TEST_CASE("excited state update, Ito form") {
    const double dt = 1e-9, s = 1.3;
    const double kappa = kDevice.record_amplitude();
    const auto [r, rec] = measurement_update({0, 0, 1}, s * std::sqrt(dt), 0.0, kDevice, 0.0, dt);
    CHECK(r.x == doctest::Approx(2 * kappa * s * std::sqrt(dt)));
    CHECK(r.y == 0.0);
    CHECK(r.z - 1.0 == doctest::Approx(-2 * kDevice.gamma1 * dt));
    CHECK(rec.yI == doctest::Approx(s * std::sqrt(dt)));
}

TEST_CASE("Kraus and Ito updates agree to first order") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    const double dt = 1e-10;
    for (int k = 0; k < 200; ++k) {
        const auto r0 = random_state(rng, k % 2 == 0);
        const double a = std::sqrt(dt) * n(rng), b = std::sqrt(dt) * n(rng);
        const auto ito = measurement_update(r0, a, b, kDevice, 1e4, dt).state;
        const auto kr = measurement_update_kraus(r0, a, b, kDevice, 1e4, dt).state;
        // both step by O(sqrt(dt)); they differ at O(dt)
        CHECK((ito - kr).norm() < 20.0 * kDevice.gamma1 * dt);
    }
}

TEST_CASE("Kraus update stays in the unit ball and keeps pure states pure at unit efficiency") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n;
    const auto ideal = PhysicalParams::ideal();
    const double dt = 2e-9;
    for (int k = 0; k < 1000; ++k) {
        const auto r0 = random_state(rng, true);
        // deliberately large increments
        const double a = 5 * std::sqrt(dt) * n(rng), b = 5 * std::sqrt(dt) * n(rng);
        CHECK(measurement_update_kraus(r0, a, b, kDevice, 0.0, dt).state.norm() <= 1.0 + 1e-12);
        CHECK(measurement_update_kraus(r0, a, b, ideal, 0.0, dt).state.norm() ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("Ito update changes purity by O(dt) per step at unit efficiency") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n;
    const auto ideal = PhysicalParams::ideal();
    for (double dt : {1e-9, 1e-10}) {
        double worst = 0.0;
        for (int k = 0; k < 2000; ++k) {
            const auto r0 = random_state(rng, true);
            const auto r = measurement_update(r0, std::sqrt(dt) * n(rng), std::sqrt(dt) * n(rng), ideal, 0.0, dt);
            worst = std::max(worst, std::abs(r.state.norm() - 1.0));
        }
        CHECK(worst < 50.0 * ideal.gamma1 * dt);
    }
}

TEST_CASE("control rotation examples") {
    const BlochVector r{0.3, -0.2, 0.5};
    CHECK(control_rotation(r, {0, 0, 0}, 1e-6) == r);

    const double w = 1e6, dt = 3e-7;
    const auto out = control_rotation({1, 0, 0.4}, {0, 0, w}, dt);
    CHECK(out.x == doctest::Approx(std::cos(2 * w * dt)));
    CHECK(out.y == doctest::Approx(std::sin(2 * w * dt)));
    CHECK(out.z == doctest::Approx(0.4));
}

TEST_CASE("control rotation matches the generator exponential") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n;
    for (int k = 0; k < 300; ++k) {
        const auto r = random_state(rng, false);
        const ControlVector c{n(rng) * 1e5, n(rng) * 1e5, n(rng) * 1e5};
        const double mag = 2 * std::sqrt(c.u * c.u + c.v * c.v + c.w * c.w);
        // small-angle regime
        const double dt_small = 5e-4 / mag;
        CHECK((control_rotation(r, c, dt_small) - rotate_by_expm(r, c, dt_small)).norm() < 1e-12);
        // and a large angle
        const double dt_big = 2.5 / mag;
        CHECK((control_rotation(r, c, dt_big) - rotate_by_expm(r, c, dt_big)).norm() < 1e-12);
        CHECK(control_rotation(r, c, dt_big).norm() == doctest::Approx(r.norm()).epsilon(1e-12));
    }
}

TEST_CASE("stepper with all boxes off keeps the ground state") {
    Stepper s(ControllerConfig{}, kDevice, {});
    Rng rng(9);
    BlochVector r{0, 0, -1};
    for (int i = 0; i < 5000; ++i) r = s.step(r, rng);
    CHECK(r == BlochVector{0, 0, -1});
    CHECK(s.diagnostics().clips == 0);
}

TEST_CASE("feedback acts one step after the record that drives it") {
    ControllerConfig c;
    c.gain_rabi = 100.0;
    c.alpha = 0.0;
    c.u_bar = 5.0;
    SimSettings settings;
    settings.markovian = true;
    Stepper s(c, kDevice, settings);
    s.step({0, 0, -1}, 1e-5, 0.0);
    CHECK(s.last_controls().u == 5.0);
    s.step({0, 0, -1}, 0.0, 0.0);
    CHECK(s.last_controls().u == doctest::Approx(5.0 + 100.0 * 1e-5 / settings.dt));
}

TEST_CASE("stepper flags a broken update") {
    SimSettings settings;
    settings.scheme = UpdateScheme::euler;
    Stepper s(ControllerConfig{}, PhysicalParams::ideal(), settings);
    CHECK_THROWS_AS(s.step({0.6, 0.0, 0.8}, 0.5, 0.0), NumericalError);

    Stepper coarse(ControllerConfig{}, PhysicalParams::ideal(), settings);
    auto r = coarse.step({0.6, 0.0, 0.8}, 1e-4, 0.0);
    CHECK(r.norm() <= 1.0);
    CHECK(coarse.diagnostics().clips == 1);
    CHECK(coarse.diagnostics().dt_too_coarse());
}

TEST_CASE("ideal zero-delay law pins the excited state") {
    const auto ideal = PhysicalParams::ideal();
    SimSettings settings;
    settings.markovian = true;
    TrajectoryOptions opt;
    opt.duration = 80e-6;
    int pinned = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto t = simulate_trajectory({0, 0, -1}, feedback_law({0.0, 0.0}, ideal), ideal, settings, opt, seed);
        if (t.states.back().z > 0.99) ++pinned;
    }
    CHECK(pinned == 10);
}

TEST_CASE("trajectories are reproducible and seeds decorrelate") {
    const auto cfg = feedback_law({0.0, 0.0}, kDevice);
    TrajectoryOptions opt;
    opt.duration = 60e-6;
    opt.stride = 25;
    const auto a = simulate_trajectory({0, 0, -1}, cfg, kDevice, {}, opt, 42);
    const auto b = simulate_trajectory({0, 0, -1}, cfg, kDevice, {}, opt, 42);
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t i = 0; i < a.states.size(); ++i) CHECK(a.states[i] == b.states[i]);

    const double t0 = 5.0 / kDevice.gamma1;
    double corr_sum = 0.0;
    const int pairs = 8;
    for (int p = 0; p < pairs; ++p) {
        const auto u = simulate_trajectory({0, 0, -1}, cfg, kDevice, {}, opt, 100 + 2 * p);
        const auto v = simulate_trajectory({0, 0, -1}, cfg, kDevice, {}, opt, 101 + 2 * p);
        double mu = 0, mv = 0, n = 0;
        for (std::size_t i = 0; i < u.times.size(); ++i) {
            if (u.times[i] < t0) continue;
            mu += u.states[i].z;
            mv += v.states[i].z;
            n += 1;
        }
        mu /= n;
        mv /= n;
        double suv = 0, suu = 0, svv = 0;
        for (std::size_t i = 0; i < u.times.size(); ++i) {
            if (u.times[i] < t0) continue;
            const double du = u.states[i].z - mu, dv = v.states[i].z - mv;
            suv += du * dv;
            suu += du * du;
            svv += dv * dv;
        }
        corr_sum += suv / std::sqrt(suu * svv);
    }
    CHECK(std::abs(corr_sum / pairs) < 0.2);
}

TEST_CASE("trajectory records are kept on request") {
    TrajectoryOptions opt;
    opt.duration = 1e-6;
    opt.stride = 100;
    opt.keep_records = true;
    const auto t = simulate_trajectory({0, 0, 1}, {}, kDevice, {}, opt, 3);
    CHECK(t.records.size() == 500);
    CHECK(t.times.size() == 6);
    CHECK(t.times.back() == doctest::Approx(1e-6));
}

TEST_CASE("sample schedule and step count") {
    CHECK(step_count(30e-6, 2e-9) == 15000);
    CHECK_THROWS_AS(step_count(0.0, 2e-9), ConfigError);
    CHECK_THROWS_AS(step_count(1e-10, 2e-9), ConfigError);
    const auto s = sample_steps(10, 4);
    CHECK(s == std::vector<std::size_t>{0, 4, 8, 10});
    CHECK(sample_steps(8, 4) == std::vector<std::size_t>{0, 4, 8});
}

TEST_CASE("measurement-induced dephasing only with the FM box on") {
    ControllerConfig c;
    CHECK(extra_dephasing(c, kDevice) == 0.0);
    c.fm_mode = FmMode::linear;
    CHECK(extra_dephasing(c, kDevice) == kDevice.gamma_m);
}

TEST_CASE("update scheme names") {
    CHECK(parse_update_scheme("euler") == UpdateScheme::euler);
    CHECK(to_string(UpdateScheme::kraus) == "kraus");
    CHECK_THROWS_AS(parse_update_scheme("milstein"), ConfigError);
}
