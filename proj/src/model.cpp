#include "qfb/model.hpp"

#include <cstdio>

namespace qfb {

void PhysicalParams::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    require(std::isfinite(gamma1) && gamma1 >= 0.0, "physical.gamma1 must be a finite rate >= 0");
    require(std::isfinite(gamma_phi) && gamma_phi >= 0.0, "physical.gamma_phi must be >= 0");
    require(std::isfinite(gamma_m) && gamma_m >= 0.0, "physical.gamma_m must be >= 0");
    require(eta >= 0.0 && eta <= 1.0, "physical.eta must lie in [0, 1]");
    require(std::isfinite(bandwidth) && bandwidth > 0.0, "physical.B must be > 0");
    require(std::isfinite(fm_bandwidth) && fm_bandwidth > 0.0, "physical.B_f must be > 0");
    require(fm_bandwidth <= bandwidth, "physical.B_f must not exceed physical.B");
    require(std::isfinite(delay) && delay >= 0.0, "physical.T_d must be >= 0");
    require(thermal_z0 >= -1.0 && thermal_z0 <= 1.0, "physical.thermal_z0 must lie in [-1, 1]");
}

PhysicalParams PhysicalParams::ideal() {
    PhysicalParams p;
    p.eta = 1.0;
    p.gamma_phi = 0.0;
    p.gamma_m = 0.0;
    p.delay = 0.0;
    return p;
}

BlochVector bloch_from_angles(const TargetState& target) {
    if (!(target.theta >= 0.0 && target.theta <= kPi)) {
        throw ConfigError("target.theta must lie in [0, pi]");
    }
    if (!(target.phi >= 0.0 && target.phi < kTwoPi)) {
        throw ConfigError("target.phi must lie in [0, 2 pi)");
    }
    const double s = std::sin(target.theta);
    return {s * std::cos(target.phi), s * std::sin(target.phi), std::cos(target.theta)};
}

double fidelity(const BlochVector& r, const TargetState& target) {
    return 0.5 * (1.0 + r.dot(bloch_from_angles(target)));
}

std::string to_string(const BlochVector& r) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "(%.6f, %.6f, %.6f)", r.x, r.y, r.z);
    return buf;
}

}  // namespace qfb
