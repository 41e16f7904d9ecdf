#include "qfb/signal_chain.hpp"

#include <cmath>
#include <string>

namespace qfb {

OnePoleFilter::OnePoleFilter(double bandwidth_hz, double dt) : bypassed_(false) {
    if (!(bandwidth_hz > 0.0) || !(dt > 0.0)) {
        throw ConfigError("filter bandwidth and dt must be positive");
    }
    a_ = kTwoPi * bandwidth_hz * dt;
    if (!(a_ < 1.0)) {
        throw ConfigError("one-pole filter unstable: 2 pi B dt = " + std::to_string(a_) +
                          " must be < 1 (reduce dt)");
    }
}

Quadratures OnePoleFilter::step(Quadratures in) {
    if (bypassed_) return in;
    h_.i += a_ * (in.i - h_.i);
    h_.q += a_ * (in.q - h_.q);
    return h_;
}

DelayLine::DelayLine(std::size_t length) : buffer_(length == 0 ? 1 : length) {}

std::size_t DelayLine::length_for(double delay, double dt) {
    const auto n = static_cast<long long>(std::llround(delay / dt));
    return n < 1 ? 1 : static_cast<std::size_t>(n);
}

Quadratures DelayLine::step(Quadratures in) {
    const Quadratures out = buffer_[head_];
    buffer_[head_] = in;
    if (++head_ == buffer_.size()) head_ = 0;
    return out;
}

SignalChainState SignalChainState::make(const PhysicalParams& params, double dt, bool markovian) {
    if (markovian) return {DelayLine(1), OnePoleFilter::bypass(), OnePoleFilter::bypass()};
    return {DelayLine(DelayLine::length_for(params.delay, dt)), OnePoleFilter(params.bandwidth, dt),
            OnePoleFilter(params.fm_bandwidth, dt)};
}

SignalChainState::Output SignalChainState::step(Quadratures record_value) {
    const Quadratures delayed = delay.step(record_value);
    return {rabi_filter.step(delayed), fm_filter.step(delayed)};
}

}  // namespace qfb
