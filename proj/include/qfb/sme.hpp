#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <vector>

#include "qfb/controller.hpp"
#include "qfb/signal_chain.hpp"

namespace qfb {

using Rng = std::mt19937_64;

/// How the conditioned state absorbs one record increment.
///  - kraus: r <- M r M^dag / tr with M = 1 - gamma1/2 sigma+sigma- dt
///    + sqrt(eta gamma1/2) (yI + i yQ) sigma-, plus the unread emission and an
///    exact dephasing channel. Positive, and purity-preserving at eta = 1.
///  - euler: the Ito Bloch-form update, one Euler-Maruyama step.
/// Both share the same Ito limit.
enum class UpdateScheme { kraus, euler };

UpdateScheme parse_update_scheme(const std::string& name);
std::string to_string(UpdateScheme scheme);

/// Integrated record increments V_I dt, V_Q dt (units s^{1/2}).
struct MeasurementRecord {
    double yI = 0.0;
    double yQ = 0.0;
};

struct MeasurementResult {
    BlochVector state;
    MeasurementRecord record;
};

/// Measurement back-action plus relaxation for a fixed physics and time step.
class MeasurementModel {
public:
    MeasurementModel(const PhysicalParams& params, double extra_dephasing, double dt,
                     UpdateScheme scheme = UpdateScheme::kraus);

    MeasurementResult apply(const BlochVector& r, double dW_I, double dW_Q) const;

    double dt() const { return dt_; }
    double kappa() const { return kappa_; }

private:
    UpdateScheme scheme_;
    double dt_;
    double gamma1_;
    double eta_;
    double kappa_;
    double gamma2_;      // gamma1/2 + gamma_phi + extra
    double dephase_;     // exp(-(gamma_phi + extra) dt)
};

/// Ito Euler update with Gamma2 = gamma1/2 + gamma_phi + dephasing_extra and
/// kappa = sqrt(eta gamma1 / 2):
///   dx = -Gamma2 x dt + kappa[(1 + z - x^2) dW_I - x y dW_Q]
///   dy = -Gamma2 y dt + kappa[-x y dW_I + (1 + z - y^2) dW_Q]
///   dz = -gamma1 (1 + z) dt - kappa (1 + z)(x dW_I + y dW_Q)
/// Records: yI = kappa x dt + dW_I, yQ = kappa y dt + dW_Q.
MeasurementResult measurement_update(const BlochVector& r, double dW_I, double dW_Q,
                                     const PhysicalParams& params, double dephasing_extra,
                                     double dt);

/// Same records, Kraus-form state update.
MeasurementResult measurement_update_kraus(const BlochVector& r, double dW_I, double dW_Q,
                                           const PhysicalParams& params, double dephasing_extra,
                                           double dt);

/// Exact rotation of r by |Omega| dt about Omega = 2 (u, v, w), i.e. the
/// evolution dr/dt = Omega x r generated by H_c = hbar (u sx + v sy + w sz).
BlochVector control_rotation(const BlochVector& r, const ControlVector& c, double dt);

struct SimSettings {
    double dt = 2e-9;
    /// Bypass both filters and use the one-step minimum delay.
    bool markovian = false;
    UpdateScheme scheme = UpdateScheme::kraus;

    void validate() const;
};

/// Clip rate above which a run is flagged as integrated with too coarse a dt.
inline constexpr double kClipWarnFraction = 1e-3;
/// A norm overshoot above this is counted as a clip.
inline constexpr double kClipCountTolerance = 1e-12;
/// A norm overshoot above this means the update has broken down.
inline constexpr double kNormFailureThreshold = 0.1;

struct StepDiagnostics {
    std::uint64_t steps = 0;
    std::uint64_t clips = 0;
    double max_overshoot = 0.0;

    double clip_fraction() const { return steps ? double(clips) / double(steps) : 0.0; }
    bool dt_too_coarse() const { return clip_fraction() > kClipWarnFraction; }
    void merge(const StepDiagnostics& o);
};

/// One trajectory's integrator: owns the detection chain and the controller.
/// Per step: measurement update, record through delay then filters, controls,
/// rotation, norm clip.
class Stepper {
public:
    Stepper(const ControllerConfig& cfg, const PhysicalParams& params, const SimSettings& settings);

    /// Advances with given Wiener increments (each of variance dt).
    BlochVector step(const BlochVector& r, double dW_I, double dW_Q);
    /// Advances with increments drawn from rng.
    BlochVector step(const BlochVector& r, Rng& rng);

    const MeasurementRecord& last_record() const { return last_record_; }
    const ControlVector& last_controls() const { return last_controls_; }
    const StepDiagnostics& diagnostics() const { return diag_; }
    const SignalChainState& chain() const { return chain_; }
    double dt() const { return settings_.dt; }

private:
    SimSettings settings_;
    ControllerKernel kernel_;
    MeasurementModel measurement_;
    SignalChainState chain_;
    double sqrt_dt_;
    boost::random::normal_distribution<double> normal_;
    MeasurementRecord last_record_;
    ControlVector last_controls_;
    StepDiagnostics diag_;
};

/// Zero-delay, unfiltered feedback step: measurement update followed by the
/// rotation driven by that same record. No clipping. This is the map whose
/// ensemble mean defines the Markovian feedback generator.
BlochVector markov_step(const BlochVector& r, double dW_I, double dW_Q,
                        const MeasurementModel& measurement, const ControllerKernel& kernel);

/// Measurement-induced dephasing applies whenever the FM box is on.
double extra_dephasing(const ControllerConfig& cfg, const PhysicalParams& params);

std::size_t step_count(double duration, double dt);

struct TrajectoryOptions {
    double duration = 30e-6;
    /// Store every `stride` steps (plus the final step).
    std::size_t stride = 50;
    bool keep_records = false;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<BlochVector> states;
    std::vector<MeasurementRecord> records;  // per step, when requested
    StepDiagnostics diagnostics;
};

/// Sample schedule shared by trajectories and ensembles: step indices
/// 0, stride, 2 stride, ... and the last step.
std::vector<std::size_t> sample_steps(std::size_t n_steps, std::size_t stride);

Trajectory simulate_trajectory(const BlochVector& init, const ControllerConfig& cfg,
                               const PhysicalParams& params, const SimSettings& settings,
                               const TrajectoryOptions& options, std::uint64_t seed);

}  // namespace qfb
