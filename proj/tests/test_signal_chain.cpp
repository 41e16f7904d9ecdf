#include <doctest.h>

#include <random>

#include "qfb/signal_chain.hpp"

using namespace qfb;

TEST_CASE("filter step response follows 1 - exp(-2 pi B t)") {
    const double B = 3.3e6, dt = 2e-9;
    OnePoleFilter f(B, dt);
    for (int n = 1; n <= 2000; ++n) {
        const double h = f.step({2.0, -1.0}).i;
        const double expect = 2.0 * (1.0 - std::exp(-kTwoPi * B * n * dt));
        CHECK(std::abs(h - expect) <= 0.01 * 2.0);
    }
}

TEST_CASE("filter step response refits to the bandwidth") {
    // Estimate the rate from log(1 - h/c) by least squares.
    const double B = 2e6, dt = 1e-9;
    OnePoleFilter f(B, dt);
    double sxy = 0, sxx = 0;
    for (int n = 1; n <= 400; ++n) {
        const double h = f.step({1.0, 1.0}).q;
        const double t = n * dt;
        sxy += t * std::log(1.0 - h);
        sxx += t * t;
    }
    CHECK(-sxy / sxx == doctest::Approx(kTwoPi * B).epsilon(0.01));
}

TEST_CASE("bypass filter passes input through") {
    auto f = OnePoleFilter::bypass();
    CHECK(f.bypassed());
    const auto out = f.step({3.5, -8.25});
    CHECK(out.i == 3.5);
    CHECK(out.q == -8.25);
}

TEST_CASE("filter rejects unstable coefficients") {
    CHECK_THROWS_AS(OnePoleFilter(1e8, 2e-9), ConfigError);
    CHECK_THROWS_AS(OnePoleFilter(0.0, 2e-9), ConfigError);
    CHECK_NOTHROW(OnePoleFilter(3.3e6, 2e-9));
}

TEST_CASE("white-noise output variance matches the equivalent noise bandwidth") {
    // Input with one-sided PSD 1: white samples of variance 1 / (2 dt).
    const double B = 3.3e6, dt = 2e-9;
    OnePoleFilter f(B, dt);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    const double sd = std::sqrt(1.0 / (2.0 * dt));
    for (int i = 0; i < 5000; ++i) f.step({sd * normal(rng), sd * normal(rng)});
    double s2 = 0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        const auto h = f.step({sd * normal(rng), sd * normal(rng)});
        s2 += h.i * h.i + h.q * h.q;
    }
    const double var = s2 / (2.0 * n);
    CHECK(var == doctest::Approx(kPi * B / 2).epsilon(0.05));
    // exact discrete stationary variance a sigma^2 / (2 - a)
    const double a = f.coefficient();
    CHECK(var == doctest::Approx(a / (2.0 * dt) / (2.0 - a)).epsilon(0.02));
}

TEST_CASE("delay length floor and rounding") {
    CHECK(DelayLine::length_for(0.0, 2e-9) == 1);
    CHECK(DelayLine::length_for(0.12e-6, 2e-9) == 60);
    CHECK(DelayLine::length_for(0.5e-9, 2e-9) == 1);
    CHECK(DelayLine::length_for(3.1e-9, 1e-9) == 3);
}

TEST_CASE("delay passes a constant after warm-up") {
    DelayLine d(7);
    for (int i = 0; i < 7; ++i) CHECK(d.step({4.0, 5.0}).i == 0.0);
    for (int i = 0; i < 20; ++i) {
        const auto o = d.step({4.0, 5.0});
        CHECK(o.i == 4.0);
        CHECK(o.q == 5.0);
    }
}

TEST_CASE("impulse emerges after the delay length") {
    DelayLine d(DelayLine::length_for(0.12e-6, 2e-9));
    for (int n = 0; n < 200; ++n) {
        const auto o = d.step({n == 0 ? 1.0 : 0.0, 0.0});
        CHECK(o.i == (n == 60 ? 1.0 : 0.0));
    }
}

TEST_CASE("markovian chain is a one-step delay with no filtering") {
    auto chain = SignalChainState::make(PhysicalParams::experiment(), 2e-9, true);
    CHECK(chain.delay.length() == 1);
    CHECK(chain.rabi_filter.bypassed());
    CHECK(chain.fm_filter.bypassed());
    auto first = chain.step({3.0, 1.0});
    CHECK(first.rabi.i == 0.0);
    auto second = chain.step({0.0, 0.0});
    CHECK(second.rabi.i == 3.0);
    CHECK(second.fm.q == 1.0);
}

TEST_CASE("device chain filters the two paths at their own bandwidths") {
    const auto p = PhysicalParams::experiment();
    auto chain = SignalChainState::make(p, 2e-9, false);
    CHECK(chain.delay.length() == 60);
    CHECK(chain.rabi_filter.coefficient() == doctest::Approx(kTwoPi * p.bandwidth * 2e-9));
    CHECK(chain.fm_filter.coefficient() == doctest::Approx(kTwoPi * p.fm_bandwidth * 2e-9));
    SignalChainState::Output out;
    for (int i = 0; i < 61; ++i) out = chain.step({1.0, 0.0});
    // first non-zero sample after the delay
    CHECK(out.rabi.i == doctest::Approx(chain.rabi_filter.coefficient()));
    CHECK(out.fm.i == doctest::Approx(chain.fm_filter.coefficient()));
}
