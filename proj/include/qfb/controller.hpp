#pragma once

#include "qfb/model.hpp"

namespace qfb {

enum class FmMode { off, linear, exact };

FmMode parse_fm_mode(const std::string& name);
std::string to_string(FmMode mode);

/// AC-Stark mixing parameters of the FM box. The detuning produced by the
/// carrier eps0 e^{i beta} plus the amplified record G (hI + i hQ) is
/// k |eps0 e^{i beta} + G (hI + i hQ)|^2. The static part k eps0^2 only
/// renormalizes the qubit frequency and is removed. Consistency with the
/// linear gain requires 2 k G eps0 = G_FM.
struct FmNonlinearity {
    double k = 0.0;     // rad/s per squared amplitude
    double eps0 = 1.0;  // carrier amplitude
    double G = 0.0;     // record amplitude gain, s^{1/2}

    /// Parameters with G / eps0 = ratio that reproduce the given linear gain.
    static FmNonlinearity from_ratio(double gain_fm, double ratio, double eps0 = 1.0);

    double ratio() const { return G / eps0; }
    /// Static frequency offset k eps0^2 in rad/s.
    double static_offset() const { return k * eps0 * eps0; }
};

/// Settings of the Rabi, FM and Drift boxes.
struct ControllerConfig {
    double gain_rabi = 0.0;   // G_R, s^{-1/2}
    double alpha = kPi / 2;   // Rabi rotation phase, rad
    double gain_fm = 0.0;     // G_FM, s^{-1/2}
    double beta = 0.0;        // FM quadrature phase, rad
    double u_bar = 0.0;       // rad/s
    double v_bar = 0.0;       // rad/s
    FmMode fm_mode = FmMode::off;
    FmNonlinearity fm_nl;

    bool fm_active() const { return fm_mode != FmMode::off; }

    /// Throws ConfigError on negative gains, non-finite values, or an exact
    /// FM mode whose mixing parameters violate 2 k G eps0 = G_FM.
    void validate() const;

    /// Switches to exact FM mode with mixing parameters of the given G/eps0.
    void set_fm_nonlinearity(double ratio, double eps0 = 1.0);
};

/// Optimal excited-state Rabi gain sqrt(gamma1 / (2 eta)).
double optimal_rabi_gain(const PhysicalParams& params);

/// Controller settings that stabilize the target exactly at unit efficiency.
/// The FM box is enabled (linear mode) whenever sin(theta) is non-zero.
ControllerConfig feedback_law(const TargetState& target, const PhysicalParams& params);

/// Baseband record values (instantaneous, s^{-1/2}).
struct Quadratures {
    double i = 0.0;
    double q = 0.0;
};

struct RabiDrive {
    double du = 0.0;
    double dv = 0.0;
};

/// G_R times the record quadratures rotated clockwise by alpha:
/// du = G_R (cos a hI + sin a hQ), dv = G_R (-sin a hI + cos a hQ).
/// The clockwise sense pairs with the physical rotation sense of
/// control_rotation; together they make the feedback law stabilizing.
RabiDrive rabi_box(Quadratures h, const ControllerConfig& cfg);

/// Qubit detuning from the FM box (rad/s); zero when the box is off.
double fm_box(Quadratures h, const ControllerConfig& cfg);

ControlVector total_controls(const RabiDrive& rabi, double fm_out, const ControllerConfig& cfg);

/// Controller with the box phases pre-evaluated, for per-step use.
class ControllerKernel {
public:
    explicit ControllerKernel(const ControllerConfig& cfg);

    RabiDrive rabi(Quadratures h) const;
    double fm(Quadratures h) const;
    ControlVector controls(Quadratures rabi_in, Quadratures fm_in) const;

    const ControllerConfig& config() const { return cfg_; }

private:
    ControllerConfig cfg_;
    double cos_alpha_, sin_alpha_;
    double cos_beta_, sin_beta_;
};

}  // namespace qfb
