#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfb/sme.hpp"

namespace qfb {

/// G / eps0 of the FM mixer (s^{1/2}) that puts the maximum of <sigma_y> at
/// beta = -10 deg for the equator target with device parameters.
inline constexpr double kDefaultFmRatio = 2.2e-5;

/// Controller section: a base law plus explicit overrides.
struct ControllerSpec {
    /// "feedback": settings from the target; "manual": everything off.
    std::string law = "feedback";
    std::optional<double> gain_rabi, alpha, gain_fm, beta, u_bar, v_bar;
    std::optional<FmMode> fm_mode;
    double fm_ratio = kDefaultFmRatio;
    double fm_eps0 = 1.0;
    /// explicit mixer parameters; when both are given they replace fm_ratio
    std::optional<double> fm_k, fm_gain;

    /// Resolves the law at the target and applies the overrides.
    ControllerConfig resolve(const TargetState& target, const PhysicalParams& params) const;
};

struct SimSpec {
    double dt = 2e-9;
    double duration = 30e-6;
    std::size_t n = 4000;
    std::uint64_t seed = 1;
    std::size_t stride = 50;
    bool markovian = false;
    UpdateScheme scheme = UpdateScheme::kraus;
    unsigned workers = 0;
    /// swept values of the subcommand (ratios, angles); empty = default grid
    std::vector<double> grid;
    /// sweep-alpha: gain ratios; empty = 0.35, 1, 11.4
    std::vector<double> gain_ratios;
    /// sweep-gain: efficiencies to run; empty = the physical one
    std::vector<double> eta_values;

    SimSettings settings() const { return {dt, markovian, scheme}; }
};

struct RunConfig {
    PhysicalParams physical;
    ControllerSpec controller;
    TargetState target;
    SimSpec sim;

    ControllerConfig controller_config() const { return controller.resolve(target, physical); }
    /// Full validation of every section; throws ConfigError.
    void validate() const;
};

/// Parses a config document. Unknown sections or keys throw ConfigError.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

/// Applies "section.key=value" (dotted path, value parsed as JSON when it
/// parses, otherwise taken as a string).
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Config echo with every default filled in; parse_config reads it back to
/// the same RunConfig.
nlohmann::json to_json(const RunConfig& cfg);

/// Controller settings after the law and overrides are applied.
nlohmann::json to_json(const ControllerConfig& cfg);

}  // namespace qfb
