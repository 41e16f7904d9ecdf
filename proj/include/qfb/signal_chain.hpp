#pragma once

#include <cstddef>
#include <vector>

#include "qfb/controller.hpp"

namespace qfb {

/// One-pole low-pass on both record quadratures:
///   h <- h + 2 pi B (in - h) dt.
/// A bypassed filter passes its input through unchanged.
class OnePoleFilter {
public:
    /// Bypass filter.
    OnePoleFilter() = default;
    /// Throws ConfigError unless 0 < 2 pi B dt < 1.
    OnePoleFilter(double bandwidth_hz, double dt);

    static OnePoleFilter bypass() { return {}; }

    Quadratures step(Quadratures in);

    bool bypassed() const { return bypassed_; }
    double coefficient() const { return a_; }
    Quadratures state() const { return h_; }

private:
    bool bypassed_ = true;
    double a_ = 1.0;
    Quadratures h_;
};

/// Fixed-length ring buffer; step() returns the input pushed `length` steps
/// earlier (zeros until the buffer has filled).
class DelayLine {
public:
    explicit DelayLine(std::size_t length = 1);

    /// max(1, round(delay / dt)). The one-step floor keeps feedback strictly
    /// after the measurement that produced it.
    static std::size_t length_for(double delay, double dt);

    Quadratures step(Quadratures in);

    std::size_t length() const { return buffer_.size(); }

private:
    std::vector<Quadratures> buffer_;
    std::size_t head_ = 0;
};

/// Detection chain between the measured record and the controller.
struct SignalChainState {
    DelayLine delay;
    OnePoleFilter rabi_filter;
    OnePoleFilter fm_filter;

    struct Output {
        Quadratures rabi;
        Quadratures fm;
    };

    /// Detection chain for the given physics. In the Markovian limit both
    /// filters are bypassed and the delay is a single step.
    static SignalChainState make(const PhysicalParams& params, double dt, bool markovian);

    /// Feeds one record value (increment / dt) through delay, then filters.
    Output step(Quadratures record_value);
};

}  // namespace qfb
