#include "qfb/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace qfb {

namespace {

constexpr std::size_t kBlockSize = 16;

std::uint64_t splitmix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Running mean / M2 for one scalar (Welford); merged with Chan's formula.
struct Moments {
    double n = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double v) {
        n += 1.0;
        const double d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }

    void merge(const Moments& o) {
        if (o.n == 0.0) return;
        if (n == 0.0) {
            *this = o;
            return;
        }
        const double total = n + o.n;
        const double d = o.mean - mean;
        mean += d * (o.n / total);
        m2 += o.m2 + d * d * (n * o.n / total);
        n = total;
    }

    double sem() const { return n > 1.0 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0; }
};

struct BlockResult {
    std::vector<Moments> x, y, z;
    StepDiagnostics diagnostics;
};

}  // namespace

std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index) {
    return splitmix64(master_seed + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

EnsembleStats run_ensemble(const ControllerConfig& cfg, const PhysicalParams& params,
                           const SimSettings& settings, const EnsembleOptions& options) {
    if (options.n_trajectories < 2) throw ConfigError("ensemble needs at least 2 trajectories");
    params.validate();
    cfg.validate();
    settings.validate();
    const std::size_t n_steps = step_count(options.duration, settings.dt);
    const auto schedule = sample_steps(n_steps, options.stride);
    const std::size_t n_samples = schedule.size();
    // Construct once up front so configuration errors surface on this thread.
    Stepper(cfg, params, settings);

    const std::size_t n = options.n_trajectories;
    const std::size_t n_blocks = (n + kBlockSize - 1) / kBlockSize;
    std::vector<BlockResult> blocks(n_blocks);

    auto run_block = [&](std::size_t b) {
        BlockResult res;
        res.x.resize(n_samples);
        res.y.resize(n_samples);
        res.z.resize(n_samples);
        const std::size_t first = b * kBlockSize;
        const std::size_t last = std::min(n, first + kBlockSize);
        for (std::size_t k = first; k < last; ++k) {
            Stepper stepper(cfg, params, settings);
            Rng rng(trajectory_seed(options.master_seed, k));
            BlochVector r = options.init;
            std::size_t s = 0;
            for (std::size_t i = 0;; ++i) {
                if (schedule[s] == i) {
                    res.x[s].add(r.x);
                    res.y[s].add(r.y);
                    res.z[s].add(r.z);
                    if (++s == n_samples) break;
                }
                r = stepper.step(r, rng);
            }
            res.diagnostics.merge(stepper.diagnostics());
        }
        blocks[b] = std::move(res);
    };

    unsigned workers = options.workers ? options.workers : std::thread::hardware_concurrency();
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_blocks)));
    if (workers == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t b = next++; b < n_blocks; b = next++) {
                    try {
                        run_block(b);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next = n_blocks;
                    }
                }
            });
        }
        pool.clear();
        if (failure) std::rethrow_exception(failure);
    }

    std::vector<Moments> mx(n_samples), my(n_samples), mz(n_samples);
    StepDiagnostics diag;
    for (const auto& b : blocks) {
        for (std::size_t s = 0; s < n_samples; ++s) {
            mx[s].merge(b.x[s]);
            my[s].merge(b.y[s]);
            mz[s].merge(b.z[s]);
        }
        diag.merge(b.diagnostics);
    }

    EnsembleStats out;
    out.n_trajectories = n;
    out.diagnostics = diag;
    out.clip_fraction = diag.clip_fraction();
    for (std::size_t s = 0; s < n_samples; ++s) {
        out.times.push_back(double(schedule[s]) * settings.dt);
        out.mean_x.push_back(mx[s].mean);
        out.mean_y.push_back(my[s].mean);
        out.mean_z.push_back(mz[s].mean);
        out.sem_x.push_back(mx[s].sem());
        out.sem_y.push_back(my[s].sem());
        out.sem_z.push_back(mz[s].sem());
    }
    return out;
}

namespace {

struct LinearPart {
    double a = 0.0, b = 0.0, sse = std::numeric_limits<double>::infinity();
};

// For fixed rate, f = a - b e, e = exp(-rate t): ordinary least squares in (a, b).
LinearPart solve_linear(std::span<const double> t, std::span<const double> y, double rate) {
    double n = 0, se = 0, see = 0, sy = 0, sey = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double e = std::exp(-rate * t[i]);
        n += 1;
        se += e;
        see += e * e;
        sy += y[i];
        sey += e * y[i];
    }
    const double det = n * see - se * se;
    LinearPart out;
    if (!(std::abs(det) > 1e-300)) return out;
    const double a = (see * sy - se * sey) / det;
    const double c = (n * sey - se * sy) / det;  // coefficient of e
    out.a = a;
    out.b = -c;
    double sse = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double r = y[i] - (a + c * std::exp(-rate * t[i]));
        sse += r * r;
    }
    out.sse = sse;
    return out;
}

}  // namespace

ExponentialFit fit_exponential(std::span<const double> times, std::span<const double> series) {
    ExponentialFit fit;
    if (times.size() != series.size()) throw ConfigError("fit_exponential: size mismatch");
    if (times.size() < 10) {
        fit.message = "need at least 10 points";
        return fit;
    }
    const double t0 = times.front();
    const double span = times.back() - t0;
    if (!(span > 0.0)) {
        fit.message = "time span must be positive";
        return fit;
    }
    double min_spacing = span;
    for (std::size_t i = 1; i < times.size(); ++i) {
        min_spacing = std::min(min_spacing, times[i] - times[i - 1]);
    }
    std::vector<double> t(times.begin(), times.end());
    for (auto& v : t) v -= t0;

    const double lo = std::log(0.05 / span);
    const double hi = std::log(std::max(50.0 / span, 2.0 / min_spacing));
    constexpr int kScan = 400;
    int best = 0;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= kScan; ++k) {
        const double lr = lo + (hi - lo) * k / kScan;
        const double sse = solve_linear(t, series, std::exp(lr)).sse;
        if (sse < best_sse) {
            best_sse = sse;
            best = k;
        }
    }
    const double step = (hi - lo) / kScan;
    double a = lo + step * std::max(best - 1, 0);
    double b = lo + step * std::min(best + 1, kScan);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = solve_linear(t, series, std::exp(c)).sse;
    double fd = solve_linear(t, series, std::exp(d)).sse;
    for (int it = 0; it < 80; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = solve_linear(t, series, std::exp(c)).sse;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = solve_linear(t, series, std::exp(d)).sse;
        }
    }
    const double rate = std::exp(0.5 * (a + b));
    const auto lin = solve_linear(t, series, rate);
    fit.rate = rate;
    // Report the amplitude relative to the first sample time.
    fit.asymptote = lin.a;
    fit.amplitude = lin.b;
    fit.residual = std::sqrt(lin.sse / double(t.size()));
    if (best == 0 || best == kScan) {
        fit.message = "rate optimum on the scan boundary";
    } else if (span * rate < 2.0) {
        fit.message = "data span shorter than 2 / rate";
    } else {
        fit.converged = true;
    }
    return fit;
}

}  // namespace qfb
