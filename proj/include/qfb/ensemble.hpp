#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qfb/sme.hpp"

namespace qfb {

/// Bloch-component means over trajectories with standard errors
/// (sample std / sqrt(n)) on a shared time grid.
struct EnsembleStats {
    std::vector<double> times;
    std::vector<double> mean_x, mean_y, mean_z;
    std::vector<double> sem_x, sem_y, sem_z;
    std::size_t n_trajectories = 0;
    double clip_fraction = 0.0;
    StepDiagnostics diagnostics;

    std::size_t size() const { return times.size(); }
    BlochVector mean(std::size_t i) const { return {mean_x[i], mean_y[i], mean_z[i]}; }
    BlochVector sem(std::size_t i) const { return {sem_x[i], sem_y[i], sem_z[i]}; }
    BlochVector final_mean() const { return mean(size() - 1); }
    BlochVector final_sem() const { return sem(size() - 1); }
    bool dt_too_coarse() const { return clip_fraction > kClipWarnFraction; }
};

struct EnsembleOptions {
    BlochVector init{0.0, 0.0, -1.0};
    std::size_t n_trajectories = 4000;
    double duration = 30e-6;
    std::size_t stride = 50;
    std::uint64_t master_seed = 1;
    /// 0 selects std::thread::hardware_concurrency().
    unsigned workers = 0;
};

/// Seed of trajectory `index` in an ensemble: a SplitMix64 hash of
/// master_seed + (index + 1) * 0x9E3779B97F4A7C15. Part of the stable
/// interface; changing it changes every published number.
std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index);

/// Runs n independent trajectories. Trajectories are grouped in fixed blocks
/// reduced in index order, so results are bit-identical for any worker count.
/// Throws ConfigError for n < 2.
EnsembleStats run_ensemble(const ControllerConfig& cfg, const PhysicalParams& params,
                           const SimSettings& settings, const EnsembleOptions& options);

struct ExponentialFit {
    double rate = 0.0;       // Gamma
    double asymptote = 0.0;  // a
    double amplitude = 0.0;  // b
    double residual = 0.0;   // rms
    bool converged = false;
    std::string message;
};

/// Least-squares fit of f(t) = a - b exp(-Gamma t). The rate is found by a
/// log-spaced scan refined with golden-section search; a and b are solved
/// exactly for each trial rate. Reports converged = false when the optimum
/// sits on the scan boundary, fewer than 10 points are given, or the data
/// span less than 2 / Gamma.
ExponentialFit fit_exponential(std::span<const double> times, std::span<const double> series);

}  // namespace qfb
