#include "qfb/config.hpp"

#include <fstream>
#include <set>

namespace qfb {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& known) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        if (!known.contains(key)) throw ConfigError("unknown key '" + where + "." + key + "'");
    }
}

template <class T>
void read(const json& obj, const std::string& where, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

template <class T>
void read(const json& obj, const std::string& where, const char* key, std::optional<T>& out) {
    if (!obj.contains(key)) return;
    T v{};
    read(obj, where, key, v);
    out = v;
}

// Negative integers would wrap silently through get<size_t>.
void read_count(const json& obj, const std::string& where, const char* key, std::size_t& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError(where + "." + key + " must be a non-negative integer");
    }
    out = v.get<std::size_t>();
}

void parse_physical(const json& s, PhysicalParams& p) {
    const std::string w = "physical";
    reject_unknown(s, w, {"gamma1", "gamma_phi", "eta", "B", "B_f", "T_d", "gamma_m", "f_q", "f_c",
                          "Delta", "thermal_z0"});
    read(s, w, "gamma1", p.gamma1);
    read(s, w, "gamma_phi", p.gamma_phi);
    read(s, w, "eta", p.eta);
    read(s, w, "B", p.bandwidth);
    read(s, w, "B_f", p.fm_bandwidth);
    read(s, w, "T_d", p.delay);
    read(s, w, "gamma_m", p.gamma_m);
    read(s, w, "f_q", p.f_q_ghz);
    read(s, w, "f_c", p.f_c_ghz);
    read(s, w, "Delta", p.detuning_ghz);
    read(s, w, "thermal_z0", p.thermal_z0);
}

void parse_controller(const json& s, ControllerSpec& c) {
    const std::string w = "controller";
    reject_unknown(s, w, {"law", "G_R", "alpha", "G_FM", "beta", "u_bar", "v_bar", "fm_mode", "fm_nl"});
    read(s, w, "law", c.law);
    if (c.law != "feedback" && c.law != "manual") {
        throw ConfigError("controller.law must be feedback or manual");
    }
    read(s, w, "G_R", c.gain_rabi);
    read(s, w, "alpha", c.alpha);
    read(s, w, "G_FM", c.gain_fm);
    read(s, w, "beta", c.beta);
    read(s, w, "u_bar", c.u_bar);
    read(s, w, "v_bar", c.v_bar);
    if (s.contains("fm_mode")) {
        std::string mode;
        read(s, w, "fm_mode", mode);
        c.fm_mode = parse_fm_mode(mode);
    }
    if (s.contains("fm_nl")) {
        const auto& nl = s.at("fm_nl");
        const std::string wn = "controller.fm_nl";
        reject_unknown(nl, wn, {"ratio", "eps0", "k", "G"});
        read(nl, wn, "ratio", c.fm_ratio);
        read(nl, wn, "eps0", c.fm_eps0);
        read(nl, wn, "k", c.fm_k);
        read(nl, wn, "G", c.fm_gain);
        if (c.fm_k.has_value() != c.fm_gain.has_value()) {
            throw ConfigError("controller.fm_nl.k and controller.fm_nl.G must be given together");
        }
    }
}

void parse_target(const json& s, TargetState& t) {
    reject_unknown(s, "target", {"theta", "phi"});
    read(s, "target", "theta", t.theta);
    read(s, "target", "phi", t.phi);
}

void parse_sim(const json& s, SimSpec& m) {
    const std::string w = "sim";
    reject_unknown(s, w, {"dt", "duration", "n", "seed", "stride", "markovian", "scheme", "workers",
                          "grid", "gain_ratios", "eta_values"});
    read(s, w, "dt", m.dt);
    read(s, w, "duration", m.duration);
    read_count(s, w, "n", m.n);
    if (s.contains("seed")) {
        std::size_t seed = 0;
        read_count(s, w, "seed", seed);
        m.seed = seed;
    }
    read_count(s, w, "stride", m.stride);
    read(s, w, "markovian", m.markovian);
    if (s.contains("scheme")) {
        std::string scheme;
        read(s, w, "scheme", scheme);
        m.scheme = parse_update_scheme(scheme);
    }
    if (s.contains("workers")) {
        std::size_t workers = 0;
        read_count(s, w, "workers", workers);
        m.workers = static_cast<unsigned>(workers);
    }
    read(s, w, "grid", m.grid);
    read(s, w, "gain_ratios", m.gain_ratios);
    read(s, w, "eta_values", m.eta_values);
}

json parse_scalar(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return text;
    }
}

}  // namespace

ControllerConfig ControllerSpec::resolve(const TargetState& target, const PhysicalParams& params) const {
    ControllerConfig cfg;
    if (law == "feedback") {
        cfg = feedback_law(target, params);
    } else if (law != "manual") {
        throw ConfigError("controller.law must be feedback or manual");
    }
    if (gain_rabi) cfg.gain_rabi = *gain_rabi;
    if (alpha) cfg.alpha = *alpha;
    if (gain_fm) cfg.gain_fm = *gain_fm;
    if (beta) cfg.beta = *beta;
    if (u_bar) cfg.u_bar = *u_bar;
    if (v_bar) cfg.v_bar = *v_bar;
    if (fm_mode) cfg.fm_mode = *fm_mode;
    if (cfg.fm_mode == FmMode::exact) {
        if (fm_k && fm_gain) {
            cfg.fm_nl = {*fm_k, fm_eps0, *fm_gain};
        } else {
            cfg.set_fm_nonlinearity(fm_ratio, fm_eps0);
        }
    }
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    physical.validate();
    bloch_from_angles(target);
    controller_config();
    sim.settings().validate();
    if (!(sim.duration >= sim.dt)) throw ConfigError("sim.duration must be at least sim.dt");
    if (sim.n < 2) throw ConfigError("sim.n must be at least 2");
    if (sim.stride == 0) throw ConfigError("sim.stride must be positive");
    for (double e : sim.eta_values) {
        if (!(e > 0.0 && e <= 1.0)) throw ConfigError("sim.eta_values must lie in (0, 1]");
    }
    // Filter stability is checked when the signal chain is built.
    SignalChainState::make(physical, sim.dt, sim.markovian);
}

RunConfig parse_config(const nlohmann::json& doc) {
    reject_unknown(doc, "config", {"physical", "controller", "target", "sim"});
    RunConfig cfg;
    if (doc.contains("physical")) parse_physical(doc.at("physical"), cfg.physical);
    if (doc.contains("controller")) parse_controller(doc.at("controller"), cfg.controller);
    if (doc.contains("target")) parse_target(doc.at("target"), cfg.target);
    if (doc.contains("sim")) parse_sim(doc.at("sim"), cfg.sim);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    }
    const std::string path = assignment.substr(0, eq);
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
        if (node->is_null()) *node = json::object();
        if (!node->is_object()) throw ConfigError("override '" + assignment + "' descends into a value");
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = parse_scalar(assignment.substr(eq + 1));
}

nlohmann::json to_json(const RunConfig& cfg) {
    const auto& p = cfg.physical;
    const auto& s = cfg.sim;
    const auto& c = cfg.controller;
    json controller = {{"law", c.law}};
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) controller[key] = *v;
    };
    put("G_R", c.gain_rabi);
    put("alpha", c.alpha);
    put("G_FM", c.gain_fm);
    put("beta", c.beta);
    put("u_bar", c.u_bar);
    put("v_bar", c.v_bar);
    if (c.fm_mode) controller["fm_mode"] = to_string(*c.fm_mode);
    controller["fm_nl"] = {{"ratio", c.fm_ratio}, {"eps0", c.fm_eps0}};
    if (c.fm_k && c.fm_gain) {
        controller["fm_nl"]["k"] = *c.fm_k;
        controller["fm_nl"]["G"] = *c.fm_gain;
    }
    return {
        {"physical",
         {{"gamma1", p.gamma1}, {"gamma_phi", p.gamma_phi}, {"eta", p.eta}, {"B", p.bandwidth},
          {"B_f", p.fm_bandwidth}, {"T_d", p.delay}, {"gamma_m", p.gamma_m}, {"f_q", p.f_q_ghz},
          {"f_c", p.f_c_ghz}, {"Delta", p.detuning_ghz}, {"thermal_z0", p.thermal_z0}}},
        {"controller", controller},
        {"target", {{"theta", cfg.target.theta}, {"phi", cfg.target.phi}}},
        {"sim",
         {{"dt", s.dt}, {"duration", s.duration}, {"n", s.n}, {"seed", s.seed}, {"stride", s.stride},
          {"markovian", s.markovian}, {"scheme", to_string(s.scheme)}, {"workers", s.workers},
          {"grid", s.grid}, {"gain_ratios", s.gain_ratios}, {"eta_values", s.eta_values}}},
    };
}

nlohmann::json to_json(const ControllerConfig& c) {
    json out = {{"G_R", c.gain_rabi}, {"alpha", c.alpha},   {"G_FM", c.gain_fm},
                {"beta", c.beta},     {"u_bar", c.u_bar},   {"v_bar", c.v_bar},
                {"fm_mode", to_string(c.fm_mode)}};
    if (c.fm_mode == FmMode::exact) {
        out["fm_nl"] = {{"eps0", c.fm_nl.eps0}, {"k", c.fm_nl.k}, {"G", c.fm_nl.G}};
    }
    return out;
}

}  // namespace qfb
