// qfbsim: command-line harness for the feedback simulator.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "qfb/experiments.hpp"
#include "qfb/oracle.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kNumericalError = 2, kCheckFailed = 3 };

struct Options {
    std::string config;
    std::string out;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n;
    std::optional<double> dt;
    bool check = false;
};

qfb::RunConfig resolve_config(const Options& o) {
    std::ifstream in(o.config);
    if (!in) throw qfb::ConfigError("cannot open config file '" + o.config + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw qfb::ConfigError("config file '" + o.config + "' is not valid JSON: " + e.what());
    }
    for (const auto& s : o.overrides) qfb::apply_override(doc, s);
    if (o.seed) doc["sim"]["seed"] = *o.seed;
    if (o.n) doc["sim"]["n"] = *o.n;
    if (o.dt) doc["sim"]["dt"] = *o.dt;
    auto cfg = qfb::parse_config(doc);
    cfg.validate();
    return cfg;
}

int run(const std::string& command, const Options& o, const std::string& command_line) {
    const auto start = std::chrono::steady_clock::now();
    const qfb::RunConfig cfg = resolve_config(o);

    qfb::Table table;
    nlohmann::json result = nlohmann::json::object();
    if (command == "simulate") {
        table = qfb::simulate(cfg);
    } else if (command == "sweep-gain") {
        table = qfb::sweep_gain(cfg);
    } else if (command == "sweep-alpha") {
        table = qfb::sweep_alpha(cfg);
    } else if (command == "sweep-beta") {
        table = qfb::sweep_beta(cfg);
    } else if (command == "sweep-theta") {
        table = qfb::sweep_theta(cfg);
    } else if (command == "transient") {
        table = qfb::transient(cfg);
    } else if (command == "optimize-gfm") {
        auto opt = qfb::optimize_gfm(cfg);
        result = {{"G_FM", opt.gain_fm},
                  {"coherence", opt.coherence},
                  {"baseline_coherence", opt.baseline_coherence},
                  {"evaluations", opt.evaluations}};
        table = std::move(opt.table);
    } else if (command == "oracle-compare") {
        const auto cases = qfb::oracle_matrix();
        table = qfb::oracle_compare(cfg, cases);
    }

    {
        std::ofstream out(o.out);
        if (!out) throw qfb::ConfigError("cannot write output file '" + o.out + "'");
        table.write_csv(out, "qfbsim " + command);
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : table.checks) {
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    }
    const nlohmann::json meta = {
        {"subcommand", command},
        {"command_line", command_line},
        {"config", qfb::to_json(cfg)},
        {"controller_resolved", qfb::to_json(cfg.controller_config())},
        {"seed", cfg.sim.seed},
        {"n_trajectories", cfg.sim.n},
        {"dt", cfg.sim.dt},
        {"code_version", QFB_VERSION},
        {"wall_time_s", wall},
        {"result", result},
        {"notes", table.notes},
        {"checks", checks},
    };
    {
        std::ofstream out(o.out + ".meta.json");
        if (!out) throw qfb::ConfigError("cannot write '" + o.out + ".meta.json'");
        out << meta.dump(2) << '\n';
    }

    for (const auto& n : table.notes) {
        if (n.rfind("warning", 0) == 0) std::cerr << n << '\n';
    }
    if (!o.check) return kOk;
    for (const auto& c : table.checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    }
    return table.all_passed() ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo simulator of a heterodyne-monitored qubit under Markovian feedback"};
    app.require_subcommand(1);
    Options o;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"simulate", "ensemble means vs time"},
        {"sweep-gain", "steady means vs Rabi gain"},
        {"sweep-alpha", "steady means vs Rabi rotation phase"},
        {"sweep-beta", "steady means vs FM quadrature phase"},
        {"sweep-theta", "steady means vs target polar angle"},
        {"transient", "means vs time with exponential fits"},
        {"optimize-gfm", "golden-section search of the FM gain"},
        {"oracle-compare", "Monte Carlo vs Markovian-limit oracle"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", o.config, "JSON config")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output CSV path")->required();
        sub->add_option("--set", o.overrides, "override, section.key=value");
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--n", o.n, "trajectories per ensemble");
        sub->add_option("--dt", o.dt, "time step (s)");
        sub->add_flag("--check", o.check, "evaluate the subcommand's criteria; exit 3 on failure");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    std::string command_line;
    for (int i = 0; i < argc; ++i) command_line += (i ? " " : "") + std::string(argv[i]);
    try {
        return run(app.get_subcommands().front()->get_name(), o, command_line);
    } catch (const qfb::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const qfb::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    }
}
