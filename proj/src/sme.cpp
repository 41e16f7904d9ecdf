#include "qfb/sme.hpp"

#include <algorithm>
#include <cmath>

namespace qfb {

UpdateScheme parse_update_scheme(const std::string& name) {
    if (name == "kraus") return UpdateScheme::kraus;
    if (name == "euler") return UpdateScheme::euler;
    throw ConfigError("sim.scheme must be kraus or euler (got '" + name + "')");
}

std::string to_string(UpdateScheme scheme) {
    return scheme == UpdateScheme::kraus ? "kraus" : "euler";
}

MeasurementModel::MeasurementModel(const PhysicalParams& params, double extra_dephasing, double dt,
                                   UpdateScheme scheme)
    : scheme_(scheme),
      dt_(dt),
      gamma1_(params.gamma1),
      eta_(params.eta),
      kappa_(params.record_amplitude()),
      gamma2_(params.gamma1 / 2.0 + params.gamma_phi + extra_dephasing),
      dephase_(std::exp(-(params.gamma_phi + extra_dephasing) * dt)) {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
}

MeasurementResult MeasurementModel::apply(const BlochVector& r, double dW_I, double dW_Q) const {
    const double x = r.x, y = r.y, z = r.z;
    const MeasurementRecord rec{kappa_ * x * dt_ + dW_I, kappa_ * y * dt_ + dW_Q};

    if (scheme_ == UpdateScheme::euler) {
        const double up = 1.0 + z;
        BlochVector out;
        out.x = x - gamma2_ * x * dt_ + kappa_ * ((up - x * x) * dW_I - x * y * dW_Q);
        out.y = y - gamma2_ * y * dt_ + kappa_ * (-x * y * dW_I + (up - y * y) * dW_Q);
        out.z = z - gamma1_ * up * dt_ - kappa_ * up * (x * dW_I + y * dW_Q);
        return {out, rec};
    }

    // rho = (1 + r.sigma)/2 in the (e, g) basis; M = [[m, 0], [q, 1]] with
    // m = 1 - gamma1 dt / 2 and q = kappa (yI + i yQ).
    const double m = 1.0 - 0.5 * gamma1_ * dt_;
    const double pe = 0.5 * (1.0 + z);
    const double pg = 0.5 * (1.0 - z);
    const double ee = m * m * pe;
    const double gg = kappa_ * kappa_ * (rec.yI * rec.yI + rec.yQ * rec.yQ) * pe +
                      kappa_ * (x * rec.yI + y * rec.yQ) + pg +
                      (1.0 - eta_) * gamma1_ * dt_ * pe;
    const double trace = ee + gg;
    const double inv_trace = 1.0 / trace;
    const double scale = dephase_ * m * inv_trace;
    BlochVector out;
    out.x = scale * (x + kappa_ * rec.yI * (1.0 + z));
    out.y = scale * (y + kappa_ * rec.yQ * (1.0 + z));
    out.z = (ee - gg) * inv_trace;
    return {out, rec};
}

MeasurementResult measurement_update(const BlochVector& r, double dW_I, double dW_Q,
                                     const PhysicalParams& params, double dephasing_extra,
                                     double dt) {
    return MeasurementModel(params, dephasing_extra, dt, UpdateScheme::euler).apply(r, dW_I, dW_Q);
}

MeasurementResult measurement_update_kraus(const BlochVector& r, double dW_I, double dW_Q,
                                           const PhysicalParams& params, double dephasing_extra,
                                           double dt) {
    return MeasurementModel(params, dephasing_extra, dt, UpdateScheme::kraus).apply(r, dW_I, dW_Q);
}

BlochVector control_rotation(const BlochVector& r, const ControlVector& c, double dt) {
    const double ox = 2.0 * c.u * dt;
    const double oy = 2.0 * c.v * dt;
    const double oz = 2.0 * c.w * dt;
    const double angle = std::sqrt(ox * ox + oy * oy + oz * oz);
    if (angle == 0.0) return r;
    const double kx = ox / angle, ky = oy / angle, kz = oz / angle;
    const double sh = std::sin(0.5 * angle);
    const double ch = std::cos(0.5 * angle);
    const double s = 2.0 * sh * ch;
    const double one_minus_c = 2.0 * sh * sh;
    const double c0 = 1.0 - one_minus_c;
    const double kr = kx * r.x + ky * r.y + kz * r.z;
    return {r.x * c0 + (ky * r.z - kz * r.y) * s + kx * kr * one_minus_c,
            r.y * c0 + (kz * r.x - kx * r.z) * s + ky * kr * one_minus_c,
            r.z * c0 + (kx * r.y - ky * r.x) * s + kz * kr * one_minus_c};
}

void SimSettings::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("sim.dt must be a positive number");
}

void StepDiagnostics::merge(const StepDiagnostics& o) {
    steps += o.steps;
    clips += o.clips;
    max_overshoot = std::max(max_overshoot, o.max_overshoot);
}

double extra_dephasing(const ControllerConfig& cfg, const PhysicalParams& params) {
    return cfg.fm_active() ? params.gamma_m : 0.0;
}

Stepper::Stepper(const ControllerConfig& cfg, const PhysicalParams& params, const SimSettings& settings)
    : settings_(settings),
      kernel_(cfg),
      measurement_(params, extra_dephasing(cfg, params), settings.dt, settings.scheme),
      chain_(SignalChainState::make(params, settings.dt, settings.markovian)),
      sqrt_dt_(std::sqrt(settings.dt)) {
    settings.validate();
}

BlochVector Stepper::step(const BlochVector& r, double dW_I, double dW_Q) {
    const double dt = settings_.dt;
    const auto [mid, rec] = measurement_.apply(r, dW_I, dW_Q);
    last_record_ = rec;
    const double inv_dt = 1.0 / dt;
    const auto filtered = chain_.step({rec.yI * inv_dt, rec.yQ * inv_dt});
    last_controls_ = kernel_.controls(filtered.rabi, filtered.fm);
    BlochVector next = control_rotation(mid, last_controls_, dt);

    ++diag_.steps;
    const double n2 = next.norm2();
    if (n2 > 1.0) {
        const double n = std::sqrt(n2);
        const double over = n - 1.0;
        if (!(over <= kNormFailureThreshold)) {
            throw NumericalError("Bloch vector left the unit ball (|r| = " + std::to_string(n) +
                                 "); reduce dt");
        }
        if (over > kClipCountTolerance) {
            ++diag_.clips;
            diag_.max_overshoot = std::max(diag_.max_overshoot, over);
        }
        next = (1.0 / n) * next;
    }
    return next;
}

BlochVector Stepper::step(const BlochVector& r, Rng& rng) {
    const double dW_I = sqrt_dt_ * normal_(rng);
    const double dW_Q = sqrt_dt_ * normal_(rng);
    return step(r, dW_I, dW_Q);
}

BlochVector markov_step(const BlochVector& r, double dW_I, double dW_Q,
                        const MeasurementModel& measurement, const ControllerKernel& kernel) {
    const double dt = measurement.dt();
    const auto [mid, rec] = measurement.apply(r, dW_I, dW_Q);
    const Quadratures h{rec.yI / dt, rec.yQ / dt};
    return control_rotation(mid, kernel.controls(h, h), dt);
}

std::size_t step_count(double duration, double dt) {
    if (!(duration > 0.0) || !(dt > 0.0)) throw ConfigError("duration and dt must be positive");
    const auto n = std::llround(duration / dt);
    if (n < 1) throw ConfigError("duration must be at least one time step");
    return static_cast<std::size_t>(n);
}

std::vector<std::size_t> sample_steps(std::size_t n_steps, std::size_t stride) {
    if (stride == 0) stride = 1;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i <= n_steps; i += stride) out.push_back(i);
    if (out.back() != n_steps) out.push_back(n_steps);
    return out;
}

Trajectory simulate_trajectory(const BlochVector& init, const ControllerConfig& cfg,
                               const PhysicalParams& params, const SimSettings& settings,
                               const TrajectoryOptions& options, std::uint64_t seed) {
    params.validate();
    cfg.validate();
    const std::size_t n_steps = step_count(options.duration, settings.dt);
    const auto schedule = sample_steps(n_steps, options.stride);

    Stepper stepper(cfg, params, settings);
    Rng rng(seed);
    Trajectory traj;
    traj.times.reserve(schedule.size());
    traj.states.reserve(schedule.size());
    if (options.keep_records) traj.records.reserve(n_steps);

    BlochVector r = init;
    std::size_t next_sample = 0;
    for (std::size_t i = 0;; ++i) {
        if (next_sample < schedule.size() && schedule[next_sample] == i) {
            traj.times.push_back(double(i) * settings.dt);
            traj.states.push_back(r);
            ++next_sample;
        }
        if (i == n_steps) break;
        r = stepper.step(r, rng);
        if (options.keep_records) traj.records.push_back(stepper.last_record());
    }
    traj.diagnostics = stepper.diagnostics();
    return traj;
}

}  // namespace qfb
