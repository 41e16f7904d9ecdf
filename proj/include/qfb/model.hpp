#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qfb {

/// Raised for invalid physical or controller settings (CLI exit code 1).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an integration or fit cannot produce a trustworthy number
/// (CLI exit code 2).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Qubit state as Pauli expectation values. z = +1 is the excited state |e>.
struct BlochVector {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm2() const { return x * x + y * y + z * z; }
    double norm() const { return std::sqrt(norm2()); }
    double dot(const BlochVector& o) const { return x * o.x + y * o.y + z * o.z; }
    double coherence() const { return std::hypot(x, y); }

    friend BlochVector operator+(const BlochVector& a, const BlochVector& b) {
        return {a.x + b.x, a.y + b.y, a.z + b.z};
    }
    friend BlochVector operator-(const BlochVector& a, const BlochVector& b) {
        return {a.x - b.x, a.y - b.y, a.z - b.z};
    }
    friend BlochVector operator*(double s, const BlochVector& a) {
        return {s * a.x, s * a.y, s * a.z};
    }
    friend bool operator==(const BlochVector&, const BlochVector&) = default;
};

/// Target |psi> = cos(theta/2)|e> + sin(theta/2) e^{i phi}|g>.
struct TargetState {
    double theta = 0.0;
    double phi = 0.0;
};

/// Measured device rates and efficiencies. Rates are in s^-1, bandwidths in Hz,
/// the delay in seconds. The carrier frequencies are kept for bookkeeping only;
/// dynamics run in the qubit rotating frame.
struct PhysicalParams {
    double gamma1 = 1.0 / 4.7e-6;
    double gamma_phi = 1.0 / 22e-6;
    double eta = 0.35;
    double bandwidth = 3.3e6;
    double fm_bandwidth = 2.0e6;
    double delay = 0.12e-6;
    double gamma_m = 1.0 / 84e-6;
    double f_q_ghz = 6.27;
    double f_c_ghz = 7.86;
    double detuning_ghz = 0.1;
    double thermal_z0 = -1.0;

    /// Throws ConfigError when a rate is negative, eta is outside [0, 1],
    /// B_f exceeds B, or thermal_z0 is outside [-1, 1].
    void validate() const;

    /// sqrt(eta * gamma1 / 2): signal amplitude per quadrature.
    double record_amplitude() const { return std::sqrt(eta * gamma1 / 2.0); }

    /// Device values of the transmon experiment.
    static PhysicalParams experiment() { return {}; }

    /// Unit efficiency, no dephasing, no delay: the regime in which the
    /// feedback law is exact.
    static PhysicalParams ideal();
};

/// Angular rates (rad/s) multiplying sigma_x, sigma_y, sigma_z in H_c / hbar.
struct ControlVector {
    double u = 0.0;
    double v = 0.0;
    double w = 0.0;
};

/// Unit Bloch vector of the target. Throws ConfigError for theta outside
/// [0, pi] or phi outside [0, 2 pi).
BlochVector bloch_from_angles(const TargetState& target);

/// (1 + r.n) / 2 for the target direction n.
double fidelity(const BlochVector& r, const TargetState& target);

std::string to_string(const BlochVector& r);

}  // namespace qfb
