#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "qfb/sme.hpp"

namespace qfb {

/// Ensemble-mean Bloch dynamics dr/dt = A r + b of a Markovian feedback loop.
struct AffineGenerator {
    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    /// rms misfit of the affine model over all probe drifts (s^-1)
    double fit_residual = 0.0;
    /// rms misfit expected from sampling noise alone (s^-1)
    double residual_floor = 0.0;
    /// independent fits on disjoint batches of the noise draws, for error bars
    std::vector<std::pair<Eigen::Matrix3d, Eigen::Vector3d>> batches;

    /// False when the misfit exceeds 5x the sampling floor: the dynamics are
    /// not affine (non-Markovian config) or the stepper is broken.
    bool consistent() const { return fit_residual <= 5.0 * residual_floor; }

    std::vector<std::complex<double>> eigenvalues() const;
};

struct OracleOptions {
    double dt = 1e-10;
    /// noise draws per probe; each draw is evaluated at all four sign flips
    std::size_t n_probe = 100000;
    std::uint64_t seed = 7;
    UpdateScheme scheme = UpdateScheme::kraus;
    std::size_t n_batches = 8;
};

/// Six axis poles plus (0.1, 0.1, 0.1).
std::vector<BlochVector> probe_states();

/// Estimates E[dr]/dt of the zero-delay feedback step at every probe state
/// and least-squares fits the affine map. Filters and delay never enter; the
/// caller's config is taken in its Markovian limit. Requires gamma1 dt < 1e-3.
AffineGenerator extract_generator(const ControllerConfig& cfg, const PhysicalParams& params,
                                  const OracleOptions& options = {});

/// r* = -A^{-1} b. Throws NumericalError if A is singular or |r*| exceeds
/// 1 + 0.05 (unphysical fixed point).
BlochVector steady_state(const AffineGenerator& g);

/// Batch standard error of steady_state, per component.
BlochVector steady_state_sem(const AffineGenerator& g);

/// Mean Bloch vector at time t starting from r0: r* + exp(A t)(r0 - r*).
BlochVector propagate(const AffineGenerator& g, const BlochVector& r0, double t);

/// Batch standard error of propagate(), per component.
BlochVector propagate_sem(const AffineGenerator& g, const BlochVector& r0, double t);

/// |steady state - target| for the feedback law at unit efficiency with no
/// dephasing.
double ideal_fixed_point_check(const TargetState& target, const OracleOptions& options = {});

}  // namespace qfb
