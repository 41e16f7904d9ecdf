#include "qfb/oracle.hpp"

#include <cmath>
#include <thread>

#include <unsupported/Eigen/MatrixFunctions>

#include "qfb/ensemble.hpp"

namespace qfb {

namespace {

using Vec3 = Eigen::Vector3d;

Vec3 to_eigen(const BlochVector& r) { return {r.x, r.y, r.z}; }
BlochVector from_eigen(const Vec3& v) { return {v(0), v(1), v(2)}; }

// Mean drift at one probe, overall and per batch.
struct ProbeDrift {
    Vec3 mean = Vec3::Zero();
    Vec3 sem = Vec3::Zero();
    std::vector<Vec3> batch_means;
};

ProbeDrift sample_probe(const BlochVector& r, const MeasurementModel& model,
                        const ControllerKernel& kernel, const OracleOptions& opt,
                        std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal;
    const double sd = std::sqrt(opt.dt);
    const std::size_t per_batch = opt.n_probe / opt.n_batches;
    ProbeDrift out;
    Vec3 sum = Vec3::Zero(), sum2 = Vec3::Zero();
    std::size_t count = 0;
    for (std::size_t b = 0; b < opt.n_batches; ++b) {
        Vec3 batch_sum = Vec3::Zero();
        for (std::size_t i = 0; i < per_batch; ++i) {
            const double a = sd * normal(rng);
            const double c = sd * normal(rng);
            // The four sign flips cancel every term odd in either increment.
            BlochVector acc{};
            acc = acc + markov_step(r, a, c, model, kernel);
            acc = acc + markov_step(r, -a, c, model, kernel);
            acc = acc + markov_step(r, a, -c, model, kernel);
            acc = acc + markov_step(r, -a, -c, model, kernel);
            const Vec3 drift = (to_eigen(0.25 * acc) - to_eigen(r)) / opt.dt;
            batch_sum += drift;
            sum += drift;
            sum2 += drift.cwiseProduct(drift);
            ++count;
        }
        out.batch_means.push_back(batch_sum / double(per_batch));
    }
    const double n = double(count);
    out.mean = sum / n;
    const Vec3 var = (sum2 / n - out.mean.cwiseProduct(out.mean)) * (n / (n - 1.0));
    out.sem = (var.cwiseMax(0.0) / n).cwiseSqrt();
    return out;
}

// Least squares d_k = A r_k + b over the probes, one component row at a time.
std::pair<Eigen::Matrix3d, Vec3> fit_affine(const std::vector<BlochVector>& probes,
                                            const std::vector<Vec3>& drifts) {
    const Eigen::Index n = static_cast<Eigen::Index>(probes.size());
    Eigen::MatrixXd design(n, 4);
    for (Eigen::Index k = 0; k < n; ++k) {
        design.row(k) << probes[k].x, probes[k].y, probes[k].z, 1.0;
    }
    const auto qr = design.colPivHouseholderQr();
    Eigen::Matrix3d A;
    Vec3 b;
    for (int c = 0; c < 3; ++c) {
        Eigen::VectorXd rhs(n);
        for (Eigen::Index k = 0; k < n; ++k) rhs(k) = drifts[k](c);
        const Eigen::Vector4d sol = qr.solve(rhs);
        A.row(c) = sol.head<3>().transpose();
        b(c) = sol(3);
    }
    return {A, b};
}

Vec3 solve_steady(const Eigen::Matrix3d& A, const Vec3& b) {
    const auto lu = A.fullPivLu();
    if (!lu.isInvertible()) throw NumericalError("generator matrix is singular (marginally stable config)");
    return -lu.solve(b);
}

Vec3 propagate_raw(const Eigen::Matrix3d& A, const Vec3& b, const Vec3& r0, double t) {
    const Vec3 rs = solve_steady(A, b);
    const Eigen::Matrix3d e = (A * t).exp();
    return rs + e * (r0 - rs);
}

template <class F>
BlochVector batch_sem(const AffineGenerator& g, F&& estimate) {
    const double nb = double(g.batches.size());
    if (nb < 2) return {};
    Vec3 s = Vec3::Zero(), s2 = Vec3::Zero();
    for (const auto& [A, b] : g.batches) {
        const Vec3 v = estimate(A, b);
        s += v;
        s2 += v.cwiseProduct(v);
    }
    const Vec3 mean = s / nb;
    const Vec3 var = (s2 / nb - mean.cwiseProduct(mean)) * (nb / (nb - 1.0));
    return from_eigen((var.cwiseMax(0.0) / nb).cwiseSqrt());
}

}  // namespace

std::vector<std::complex<double>> AffineGenerator::eigenvalues() const {
    const Eigen::EigenSolver<Eigen::Matrix3d> es(A, false);
    const auto ev = es.eigenvalues();
    return {ev(0), ev(1), ev(2)};
}

std::vector<BlochVector> probe_states() {
    return {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}, {0.1, 0.1, 0.1}};
}

AffineGenerator extract_generator(const ControllerConfig& cfg, const PhysicalParams& params,
                                  const OracleOptions& options) {
    params.validate();
    cfg.validate();
    if (!(options.dt > 0.0) || !(params.gamma1 * options.dt < 1e-3)) {
        throw ConfigError("oracle needs a small step: gamma1 dt < 1e-3");
    }
    if (options.n_batches < 2 || options.n_probe < 2 * options.n_batches) {
        throw ConfigError("oracle needs n_probe >= 2 n_batches and n_batches >= 2");
    }
    const MeasurementModel model(params, extra_dephasing(cfg, params), options.dt, options.scheme);
    const ControllerKernel kernel(cfg);
    const auto probes = probe_states();

    std::vector<ProbeDrift> drifts(probes.size());
    {
        std::vector<std::jthread> workers;
        for (std::size_t k = 0; k < probes.size(); ++k) {
            workers.emplace_back([&, k] {
                drifts[k] = sample_probe(probes[k], model, kernel, options,
                                         trajectory_seed(options.seed, k));
            });
        }
    }

    std::vector<Vec3> means;
    for (const auto& d : drifts) means.push_back(d.mean);
    AffineGenerator g;
    std::tie(g.A, g.b) = fit_affine(probes, means);

    double sse = 0.0, noise = 0.0;
    for (std::size_t k = 0; k < probes.size(); ++k) {
        const Vec3 res = means[k] - (g.A * to_eigen(probes[k]) + g.b);
        sse += res.squaredNorm();
        noise += drifts[k].sem.squaredNorm();
    }
    const double n_eq = 3.0 * double(probes.size());
    const double dof = n_eq - 12.0;
    g.fit_residual = std::sqrt(sse / n_eq);
    g.residual_floor = std::sqrt(noise / n_eq * dof / n_eq);

    for (std::size_t b = 0; b < options.n_batches; ++b) {
        std::vector<Vec3> batch;
        for (const auto& d : drifts) batch.push_back(d.batch_means[b]);
        g.batches.push_back(fit_affine(probes, batch));
    }
    return g;
}

BlochVector steady_state(const AffineGenerator& g) {
    const Vec3 r = solve_steady(g.A, g.b);
    if (r.norm() > 1.05) {
        throw NumericalError("unphysical steady state |r*| = " + std::to_string(r.norm()));
    }
    return from_eigen(r);
}

BlochVector steady_state_sem(const AffineGenerator& g) {
    return batch_sem(g, [](const Eigen::Matrix3d& A, const Vec3& b) { return solve_steady(A, b); });
}

BlochVector propagate(const AffineGenerator& g, const BlochVector& r0, double t) {
    return from_eigen(propagate_raw(g.A, g.b, to_eigen(r0), t));
}

BlochVector propagate_sem(const AffineGenerator& g, const BlochVector& r0, double t) {
    return batch_sem(g, [&](const Eigen::Matrix3d& A, const Vec3& b) {
        return propagate_raw(A, b, to_eigen(r0), t);
    });
}

double ideal_fixed_point_check(const TargetState& target, const OracleOptions& options) {
    const PhysicalParams ideal = PhysicalParams::ideal();
    const auto g = extract_generator(feedback_law(target, ideal), ideal, options);
    return (steady_state(g) - bloch_from_angles(target)).norm();
}

}  // namespace qfb
