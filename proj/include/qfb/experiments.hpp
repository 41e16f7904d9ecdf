#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qfb/config.hpp"
#include "qfb/ensemble.hpp"

namespace qfb {

/// Outcome of one pass/fail criterion evaluated on a result table.
struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Numeric result table with named, unit-tagged columns.
class Table {
public:
    struct Column {
        std::string name;
        std::string unit;  // "1" for dimensionless
    };

    Table() = default;
    explicit Table(std::vector<Column> columns);

    void add_row(std::vector<double> row);
    std::size_t rows() const { return data_.size(); }
    const std::vector<Column>& columns() const { return columns_; }
    const std::vector<double>& row(std::size_t i) const { return data_[i]; }
    std::size_t index(const std::string& column) const;
    double at(std::size_t row, const std::string& column) const;
    std::vector<double> column(const std::string& name) const;

    /// "#" comment block (title, notes, units) then a header row and data.
    void write_csv(std::ostream& out, const std::string& title) const;

    bool all_passed() const;

    std::vector<std::string> notes;
    std::vector<Check> checks;

private:
    std::vector<Column> columns_;
    std::vector<std::vector<double>> data_;
};

/// Ensemble from thermal_z0 (on the z axis) with the config's sim settings.
EnsembleStats run_point(const RunConfig& cfg, const ControllerConfig& controller,
                        const PhysicalParams& params);

/// Time series of the ensemble means and fidelity to the target.
Table simulate(const RunConfig& cfg);

/// Steady means vs G_R / G_R^opt for each efficiency in sim.eta_values.
Table sweep_gain(const RunConfig& cfg);
/// Steady means vs alpha for each ratio in sim.gain_ratios.
Table sweep_alpha(const RunConfig& cfg);
/// Steady means vs beta for the configured controller.
Table sweep_beta(const RunConfig& cfg);
/// Steady means vs theta at the target's phi, with G_FM = G_FM^opt sin(theta)
/// and beta held at the configured value.
Table sweep_theta(const RunConfig& cfg);
/// Means vs time from thermal_z0, with exponential fits per component.
Table transient(const RunConfig& cfg);

struct GfmOptimum {
    double gain_fm = 0.0;
    double coherence = 0.0;           // sqrt(x^2 + y^2) at the optimum
    double baseline_coherence = 0.0;  // at G_FM = 0
    int evaluations = 0;              // search evaluations, baseline excluded
    double bracket = 0.0;             // final bracket width / initial width
    Table table;
};

/// Golden-section search of G_FM maximizing the steady coherence, every
/// candidate run with the same trajectory seeds.
GfmOptimum optimize_gfm(const RunConfig& cfg);

/// A labelled Markovian-limit case of the oracle cross-check.
struct OracleCase {
    std::string label;
    ControllerConfig controller;
    PhysicalParams params;
};

/// Ten cases spanning controls off, the ideal law at several targets,
/// device parameters and a manual controller.
std::vector<OracleCase> oracle_matrix();

/// Monte Carlo means at sim.duration (Markovian chain) against the oracle's
/// propagated mean, per case.
Table oracle_compare(const RunConfig& cfg, std::span<const OracleCase> cases);

// Analysis helpers shared with the acceptance checks.

/// Vertex of a least-squares parabola through the five samples around the
/// maximum of ys. period > 0 treats the grid as periodic. Returns {x, y}.
std::pair<double, double> peak_location(std::span<const double> xs, std::span<const double> ys,
                                        double period = 0.0);

struct TailFit {
    double start = 0.0;      // time of the largest excursion from the final value
    double excursion = 0.0;  // |value there - final value|
    ExponentialFit fit;
};

/// Exponential fit of the part of a relaxation curve after its largest
/// excursion from the final value. Overshooting components (a transient bump)
/// are only exponential after the bump.
TailFit fit_from_excursion(std::span<const double> times, std::span<const double> series);

/// Linear interpolation of ys at x (xs ascending).
double interpolate(std::span<const double> xs, std::span<const double> ys, double x);

/// max over lag = +-quarter period of the Pearson correlation between
/// a(x) and b(x + lag), on a uniform periodic grid.
double quadrature_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace qfb
