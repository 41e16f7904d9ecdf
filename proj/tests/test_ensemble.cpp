#include <doctest.h>

#include <random>

#include "qfb/ensemble.hpp"

using namespace qfb;

namespace {

const PhysicalParams kDevice = PhysicalParams::experiment();

EnsembleOptions options(BlochVector init, std::size_t n, double duration, std::size_t stride = 50) {
    EnsembleOptions o;
    o.init = init;
    o.n_trajectories = n;
    o.duration = duration;
    o.stride = stride;
    return o;
}

}  // namespace

TEST_CASE("controls off from the ground state stays exactly there") {
    const auto s = run_ensemble({}, kDevice, {}, options({0, 0, -1}, 64, 5e-6));
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s.mean_z[i] == -1.0);
        CHECK(s.sem_z[i] == 0.0);
        CHECK(s.mean_x[i] == 0.0);
    }
    CHECK(s.clip_fraction == 0.0);
}

TEST_CASE("free decay of the excited population") {
    const double t1 = 1.0 / kDevice.gamma1;
    const auto s = run_ensemble({}, kDevice, {}, options({0, 0, 1}, 2000, t1, 47));
    const auto m = s.final_mean();
    CHECK(s.times.back() == doctest::Approx(t1).epsilon(1e-3));
    CHECK(std::abs(m.z - (2.0 * std::exp(-kDevice.gamma1 * s.times.back()) - 1.0)) <= 3 * s.final_sem().z);
    CHECK(std::abs(m.z - (2.0 / std::exp(1.0) - 1.0)) < 0.03);
}

TEST_CASE("free decay of a coherence") {
    const double gamma2 = kDevice.gamma1 / 2 + kDevice.gamma_phi;
    const auto s = run_ensemble({}, kDevice, {}, options({1, 0, 0}, 2000, 8e-6, 1000));
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double t = s.times[i];
        CHECK(std::abs(s.mean_x[i] - std::exp(-gamma2 * t)) <= 3 * s.sem_x[i]);
        CHECK(std::abs(s.mean_y[i]) <= 3 * s.sem_y[i] + 1e-15);
        CHECK(std::abs(1 + s.mean_z[i] - std::exp(-kDevice.gamma1 * t)) <= 3 * s.sem_z[i]);
    }
}

TEST_CASE("results are bit-identical for any worker count") {
    const auto cfg = feedback_law({kPi / 2, kPi / 2}, kDevice);
    auto o = options({0, 0, -1}, 70, 3e-6, 10);
    o.workers = 1;
    const auto a = run_ensemble(cfg, kDevice, {}, o);
    for (unsigned w : {2u, 3u, 8u}) {
        o.workers = w;
        const auto b = run_ensemble(cfg, kDevice, {}, o);
        CHECK(a.mean_x == b.mean_x);
        CHECK(a.mean_y == b.mean_y);
        CHECK(a.mean_z == b.mean_z);
        CHECK(a.sem_z == b.sem_z);
        CHECK(a.diagnostics.steps == b.diagnostics.steps);
    }
}

TEST_CASE("standard error scales as 1 / sqrt(n)") {
    const auto cfg = feedback_law({0.0, 0.0}, kDevice);
    const auto small = run_ensemble(cfg, kDevice, {}, options({0, 0, -1}, 400, 8e-6));
    auto big_opt = options({0, 0, -1}, 1600, 8e-6);
    big_opt.master_seed = 99;
    const auto big = run_ensemble(cfg, kDevice, {}, big_opt);
    const double ratio = small.final_sem().z / big.final_sem().z;
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("ensemble needs two trajectories") {
    CHECK_THROWS_AS(run_ensemble({}, kDevice, {}, options({0, 0, -1}, 1, 1e-6)), ConfigError);
}

TEST_CASE("trajectory seeds follow the SplitMix64 sequence") {
    // Published first outputs of SplitMix64 seeded with 0.
    CHECK(trajectory_seed(0, 0) == 0xE220A8397B1DCDAFULL);
    CHECK(trajectory_seed(0, 1) == 0x6E789E6AA1B965F4ULL);
    CHECK(trajectory_seed(0, 2) == 0x06C45D188009454FULL);
    CHECK(trajectory_seed(1, 0) != trajectory_seed(2, 0));
}

TEST_CASE("exponential fit recovers a synthetic rate") {
    const double g1 = kDevice.gamma1;
    std::mt19937_64 rng(12);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<double> t, y;
    for (int i = 0; i <= 300; ++i) {
        t.push_back(i * 1e-7);
        y.push_back(0.2 - 1.2 * std::exp(-4 * g1 * t.back()) + noise(rng));
    }
    const auto fit = fit_exponential(t, y);
    CHECK(fit.converged);
    CHECK(fit.rate == doctest::Approx(4 * g1).epsilon(0.05));
    CHECK(fit.asymptote == doctest::Approx(0.2).epsilon(0.05));
    CHECK(fit.amplitude == doctest::Approx(1.2).epsilon(0.05));
    CHECK(fit.residual == doctest::Approx(0.01).epsilon(0.2));
}

TEST_CASE("exponential fit reports inadequate data") {
    std::vector<double> t{0, 1, 2}, y{0, 1, 2};
    CHECK_FALSE(fit_exponential(t, y).converged);
    std::vector<double> t2(20), y2(20);
    for (int i = 0; i < 20; ++i) {
        t2[i] = i * 1e-7;
        y2[i] = 1.0 - std::exp(-1e3 * t2[i]);  // far slower than the window
    }
    const auto slow = fit_exponential(t2, y2);
    CHECK_FALSE(slow.converged);
    CHECK_FALSE(slow.message.empty());
    std::vector<double> bad(5);
    CHECK_THROWS_AS(fit_exponential(t2, bad), ConfigError);
}
