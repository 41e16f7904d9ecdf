#include "qfb/controller.hpp"

#include <algorithm>

namespace qfb {

namespace {

// sin(pi) and cos(pi/2) are not exactly zero in floating point; the feedback
// law has to switch boxes off exactly at the poles and on the axes.
double snap(double v) { return std::abs(v) < 1e-12 ? 0.0 : v; }

}  // namespace

FmMode parse_fm_mode(const std::string& name) {
    if (name == "off") return FmMode::off;
    if (name == "linear") return FmMode::linear;
    if (name == "exact") return FmMode::exact;
    throw ConfigError("controller.fm_mode must be one of off, linear, exact (got '" + name + "')");
}

std::string to_string(FmMode mode) {
    switch (mode) {
        case FmMode::off: return "off";
        case FmMode::linear: return "linear";
        case FmMode::exact: return "exact";
    }
    return "off";
}

FmNonlinearity FmNonlinearity::from_ratio(double gain_fm, double ratio, double eps0) {
    if (eps0 == 0.0) throw ConfigError("controller.fm_nl.eps0 must be non-zero");
    if (ratio == 0.0) throw ConfigError("controller.fm_nl.ratio must be non-zero in exact FM mode");
    FmNonlinearity nl;
    nl.eps0 = eps0;
    nl.G = ratio * eps0;
    nl.k = gain_fm / (2.0 * nl.G * eps0);
    return nl;
}

void ControllerConfig::validate() const {
    for (double v : {gain_rabi, alpha, gain_fm, beta, u_bar, v_bar}) {
        if (!std::isfinite(v)) throw ConfigError("controller values must be finite");
    }
    if (gain_rabi < 0.0) throw ConfigError("controller.G_R must be >= 0");
    if (gain_fm < 0.0) throw ConfigError("controller.G_FM must be >= 0");
    if (fm_mode == FmMode::exact) {
        if (fm_nl.eps0 == 0.0) {
            throw ConfigError("exact FM mode needs eps0 != 0 to satisfy 2 k G eps0 = G_FM");
        }
        const double implied = 2.0 * fm_nl.k * fm_nl.G * fm_nl.eps0;
        if (std::abs(implied - gain_fm) > 1e-9 * std::max(1.0, std::abs(gain_fm))) {
            throw ConfigError("exact FM mode violates 2 k G eps0 = G_FM");
        }
    }
}

void ControllerConfig::set_fm_nonlinearity(double ratio, double eps0) {
    fm_mode = FmMode::exact;
    fm_nl = FmNonlinearity::from_ratio(gain_fm, ratio, eps0);
}

double optimal_rabi_gain(const PhysicalParams& params) {
    if (!(params.eta > 0.0)) throw ConfigError("feedback law needs eta > 0");
    return std::sqrt(params.gamma1 / (2.0 * params.eta));
}

ControllerConfig feedback_law(const TargetState& target, const PhysicalParams& params) {
    if (!(params.eta > 0.0)) throw ConfigError("feedback law needs eta > 0");
    bloch_from_angles(target);  // range check

    const double cos_t = snap(std::cos(target.theta));
    const double sin_t = snap(std::sin(target.theta));
    const double sin_p = snap(std::sin(target.phi));
    const double cos_p = snap(std::cos(target.phi));
    const double scale = std::sqrt(params.gamma1 / (8.0 * params.eta));
    const double drift = params.gamma1 / (8.0 * params.eta) * (cos_t - params.eta) * sin_t;

    ControllerConfig cfg;
    cfg.gain_rabi = scale * (1.0 + cos_t);
    cfg.alpha = kPi / 2;
    cfg.gain_fm = scale * sin_t;
    cfg.beta = target.phi - kPi / 2;
    // -u_bar / sin(phi) = v_bar / cos(phi) = drift; on the axes only one of
    // the two equalities is defined and the other drive is zero.
    cfg.u_bar = -sin_p * drift;
    cfg.v_bar = cos_p * drift;
    cfg.fm_mode = sin_t != 0.0 ? FmMode::linear : FmMode::off;
    return cfg;
}

ControllerKernel::ControllerKernel(const ControllerConfig& cfg)
    : cfg_(cfg),
      cos_alpha_(std::cos(cfg.alpha)),
      sin_alpha_(std::sin(cfg.alpha)),
      cos_beta_(std::cos(cfg.beta)),
      sin_beta_(std::sin(cfg.beta)) {}

RabiDrive ControllerKernel::rabi(Quadratures h) const {
    return {cfg_.gain_rabi * (cos_alpha_ * h.i + sin_alpha_ * h.q),
            cfg_.gain_rabi * (-sin_alpha_ * h.i + cos_alpha_ * h.q)};
}

double ControllerKernel::fm(Quadratures h) const {
    const double v_beta = h.i * cos_beta_ + h.q * sin_beta_;
    switch (cfg_.fm_mode) {
        case FmMode::off:
            return 0.0;
        case FmMode::linear:
            return cfg_.gain_fm * v_beta;
        case FmMode::exact: {
            const auto& nl = cfg_.fm_nl;
            return nl.k * (2.0 * nl.G * nl.eps0 * v_beta + nl.G * nl.G * (h.i * h.i + h.q * h.q));
        }
    }
    return 0.0;
}

ControlVector ControllerKernel::controls(Quadratures rabi_in, Quadratures fm_in) const {
    return total_controls(rabi(rabi_in), fm(fm_in), cfg_);
}

RabiDrive rabi_box(Quadratures h, const ControllerConfig& cfg) { return ControllerKernel(cfg).rabi(h); }

double fm_box(Quadratures h, const ControllerConfig& cfg) { return ControllerKernel(cfg).fm(h); }

ControlVector total_controls(const RabiDrive& rabi, double fm_out, const ControllerConfig& cfg) {
    return {cfg.u_bar + rabi.du, cfg.v_bar + rabi.dv, cfg.fm_active() ? fm_out : 0.0};
}

}  // namespace qfb
