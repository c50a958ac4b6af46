#pragma once

// JSON configuration: parameters, fault, scenario settings and analysis
// grids. Every field is optional and falls back to the struct defaults.
//
// Gain resolution: a missing pll_kp / pll_ki is derived from
// pll_bandwidth_hz (kp = f, ki = 2 f^2); a missing pq_ki is derived from
// pq_bandwidth_hz and pq_kp (ki = 2 pi f (1 + U_s kp) / U_s). Explicit gains
// always win. The fault is given either as "z_f": [re, im] or as a
// retained voltage "k_f" / "phi_f".

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vscstab/common.hpp"
#include "vscstab/eap.hpp"
#include "vscstab/params.hpp"
#include "vscstab/pcl.hpp"
#include "vscstab/pll.hpp"
#include "vscstab/scenario.hpp"

namespace vscstab {

using Json = nlohmann::ordered_json;

struct PortraitSettings {
    std::size_t n = 41;
    double lo = -6.0;  // current-coordinate window [lo, hi]^2
    double hi = 6.0;
    std::size_t random_samples = 0;  // > 0: uniform samples from --seed instead of the grid
    BasinOptions basin;

    bool operator==(const PortraitSettings& o) const {
        return n == o.n && lo == o.lo && hi == o.hi && random_samples == o.random_samples &&
               basin.horizon == o.basin.horizon && basin.dt == o.basin.dt && basin.tol == o.basin.tol &&
               basin.diverge_norm == o.basin.diverge_norm;
    }
};

enum class PortraitCurve { PreFault, Fault };

struct PllPortraitSettings {
    std::size_t n_d_omega = 21;
    std::size_t n_delta = 21;
    double d_omega_lo = -0.2, d_omega_hi = 0.2;
    double delta_lo = -std::numbers::pi, delta_hi = 2.0 * std::numbers::pi;
    DampingMode damping = DampingMode::AngleDependent;
    std::optional<double> d0;  // CONSTANT mode; defaults to D(delta_A)
    PortraitCurve curve = PortraitCurve::PreFault;
    std::size_t random_samples = 0;
    PllPortraitOptions options;

    bool operator==(const PllPortraitSettings& o) const {
        return n_d_omega == o.n_d_omega && n_delta == o.n_delta && d_omega_lo == o.d_omega_lo &&
               d_omega_hi == o.d_omega_hi && delta_lo == o.delta_lo && delta_hi == o.delta_hi &&
               damping == o.damping && d0 == o.d0 && curve == o.curve && random_samples == o.random_samples &&
               options.horizon == o.options.horizon && options.dt == o.options.dt && options.tol == o.options.tol &&
               options.diverge_d_omega == o.options.diverge_d_omega;
    }
};

struct SweepSettings {
    std::vector<double> bandwidths_hz{5.0, 10.0, 15.0, 20.0, 25.0};
    std::vector<double> dips{0.0, 0.1, 0.2, 0.3};

    bool operator==(const SweepSettings&) const = default;
};

inline bool same_oracle(const OracleOptions& a, const OracleOptions& b) {
    return a.t_lo == b.t_lo && a.t_hi == b.t_hi && a.t_max == b.t_max && a.tol == b.tol && a.dt == b.dt &&
           a.settle == b.settle && a.freq_clamp == b.freq_clamp;
}

struct AnalysisSettings {
    PortraitSettings portrait;
    PllPortraitSettings pll_portrait;
    SweepSettings sweep;
    std::vector<double> clearing_times;  // first-swing checks reported by `cca`
    OracleOptions oracle;

    bool operator==(const AnalysisSettings& o) const {
        return portrait == o.portrait && pll_portrait == o.pll_portrait && sweep == o.sweep &&
               clearing_times == o.clearing_times && same_oracle(oracle, o.oracle);
    }
};

struct Config {
    std::string name;
    Scenario scenario;  // scenario.params holds the system parameters
    bool has_fault = false;
    AnalysisSettings analysis;

    const SystemParams& params() const { return scenario.params; }
    SystemParams& params() { return scenario.params; }

    bool operator==(const Config&) const = default;
};

namespace detail {

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

/// Reads fields of one JSON object and remembers which keys were consumed so
/// unknown (misspelled) keys can be reported.
class ObjectReader {
public:
    ObjectReader(const Json& obj, std::string path, std::vector<std::string>& errors)
        : obj_(obj), path_(std::move(path)), errors_(errors) {
        if (!obj_.is_object()) errors_.push_back(path_ + ": expected an object");
    }

    ~ObjectReader() {
        if (!obj_.is_object()) return;
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.count(it.key())) errors_.push_back(path_ + "." + it.key() + ": unknown key");
    }

    bool has(const std::string& key) const { return obj_.is_object() && obj_.contains(key); }

    const Json* child(const std::string& key) {
        if (!has(key)) return nullptr;
        seen_.insert(key);
        return &obj_.at(key);
    }

    void number(const std::string& key, double& out) {
        if (const Json* v = child(key)) {
            if (v->is_number())
                out = v->get<double>();
            else
                errors_.push_back(where(key) + ": expected a number");
        }
    }

    void number(const std::string& key, std::optional<double>& out) {
        if (const Json* v = child(key)) {
            if (v->is_number())
                out = v->get<double>();
            else if (!v->is_null())
                errors_.push_back(where(key) + ": expected a number");
        }
    }

    void count(const std::string& key, std::size_t& out) {
        if (const Json* v = child(key)) {
            if (v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0))
                out = v->get<std::size_t>();
            else
                errors_.push_back(where(key) + ": expected a non-negative integer");
        }
    }

    void boolean(const std::string& key, bool& out) {
        if (const Json* v = child(key)) {
            if (v->is_boolean())
                out = v->get<bool>();
            else
                errors_.push_back(where(key) + ": expected true or false");
        }
    }

    void text(const std::string& key, std::string& out) {
        if (const Json* v = child(key)) {
            if (v->is_string())
                out = v->get<std::string>();
            else
                errors_.push_back(where(key) + ": expected a string");
        }
    }

    void complex(const std::string& key, Complex& out) {
        if (const Json* v = child(key)) {
            if (v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number())
                out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
            else if (v->is_number())
                out = {v->get<double>(), 0.0};
            else
                errors_.push_back(where(key) + ": expected [re, im]");
        }
    }

    void numbers(const std::string& key, std::vector<double>& out) {
        if (const Json* v = child(key)) {
            if (!v->is_array()) {
                errors_.push_back(where(key) + ": expected an array of numbers");
                return;
            }
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number()) {
                    errors_.push_back(where(key) + ": expected an array of numbers");
                    return;
                }
                out.push_back(e.get<double>());
            }
        }
    }

    std::string where(const std::string& key) const { return path_ + "." + key; }
    std::vector<std::string>& errors() { return errors_; }

private:
    const Json& obj_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

inline ScenarioMode parse_mode(const std::string& s, std::vector<std::string>& errors) {
    const auto l = lower(s);
    if (l == "const_current_refs") return ScenarioMode::ConstCurrentRefs;
    if (l == "pq_outer_loop") return ScenarioMode::PqOuterLoop;
    if (l == "q_ref_zero") return ScenarioMode::QRefZero;
    errors.push_back("scenario.mode: expected const_current_refs, pq_outer_loop or q_ref_zero, got '" + s + "'");
    return ScenarioMode::ConstCurrentRefs;
}

inline LimiterPriority parse_priority(const std::string& s, std::vector<std::string>& errors) {
    const auto l = lower(s);
    if (l == "d_axis") return LimiterPriority::DAxis;
    if (l == "proportional") return LimiterPriority::Proportional;
    errors.push_back("scenario.limiter_priority: expected d_axis or proportional, got '" + s + "'");
    return LimiterPriority::DAxis;
}

inline std::string line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

}  // namespace detail

/// Builds a resolved Config from a parsed JSON document. Collects every
/// problem before throwing a single validation Error listing them.
inline Config config_from_json(const Json& doc) {
    using detail::ObjectReader;
    std::vector<std::string> errors;
    Config cfg;
    auto& p = cfg.scenario.params;
    {
        ObjectReader root(doc, "config", errors);
        root.text("name", cfg.name);
        if (const Json* j = root.child("base")) {
            ObjectReader r(*j, "base", errors);
            r.number("s_base", p.base.s_base);
            r.number("u_base", p.base.u_base);
            r.number("f_base", p.base.f_base);
        }
        if (const Json* j = root.child("hardware")) {
            ObjectReader r(*j, "hardware", errors);
            r.number("v_dc", p.hardware.v_dc);
            r.number("f_sw", p.hardware.f_sw);
            r.number("l_f", p.hardware.l_f);
            r.number("l_t", p.hardware.l_t);
        }
        if (const Json* j = root.child("grid")) {
            ObjectReader r(*j, "grid", errors);
            r.number("scr", p.grid.scr);
            r.number("l_sigma_t", p.grid.l_sigma_t);
            r.number("r_sigma_t", p.grid.r_sigma_t);
            r.complex("z_s", p.grid.z_s);
            r.number("u_s", p.grid.u_s);
            r.number("omega_s", p.grid.omega_s);
        }
        if (const Json* j = root.child("operating_point")) {
            ObjectReader r(*j, "operating_point", errors);
            r.number("p_ref", p.op.p_ref);
            r.number("q_ref", p.op.q_ref);
            r.number("i_cd_ref", p.op.i_cd_ref);
            r.number("i_cq_ref", p.op.i_cq_ref);
            r.number("i_max", p.op.i_max);
            r.number("freq_limit", p.op.freq_limit);
        }
        if (const Json* j = root.child("controller")) {
            ObjectReader r(*j, "controller", errors);
            auto& c = p.ctrl;
            r.number("pll_bandwidth_hz", c.pll_bandwidth_hz);
            r.number("pq_bandwidth_hz", c.pq_bandwidth_hz);
            r.number("pq_kp", c.pq_kp);
            if (c.pll_bandwidth_hz) std::tie(c.pll_kp, c.pll_ki) = pll_gains_from_bandwidth(*c.pll_bandwidth_hz);
            if (c.pq_bandwidth_hz && p.grid.u_s > 0.0)
                c.pq_ki = pq_ki_from_bandwidth(*c.pq_bandwidth_hz, c.pq_kp, p.grid.u_s);
            r.number("pll_kp", c.pll_kp);
            r.number("pll_ki", c.pll_ki);
            r.number("pq_ki", c.pq_ki);
        }
        if (const Json* j = root.child("fault")) {
            ObjectReader r(*j, "fault", errors);
            auto& f = cfg.scenario.fault;
            cfg.has_fault = true;
            r.number("t_apply", f.t_apply);
            r.number("t_clear", f.t_clear);
            if (r.has("z_f") && (r.has("k_f") || r.has("phi_f"))) {
                errors.emplace_back("fault: give either z_f or k_f/phi_f, not both");
            } else if (r.has("z_f")) {
                Complex z_f;
                r.complex("z_f", z_f);
                try {
                    f = FaultSpec::from_impedance(z_f, p.grid.z_s, f.t_apply, f.t_clear);
                } catch (const Error& e) {
                    errors.push_back(std::string("fault: ") + e.what());
                }
            } else {
                r.number("k_f", f.k_f_mag);
                r.number("phi_f", f.phi_f);
            }
        }
        if (const Json* j = root.child("scenario")) {
            ObjectReader r(*j, "scenario", errors);
            auto& sc = cfg.scenario;
            std::string mode, priority;
            r.text("mode", mode);
            if (!mode.empty()) sc.mode = detail::parse_mode(mode, errors);
            r.text("limiter_priority", priority);
            if (!priority.empty()) sc.limiter.priority = detail::parse_priority(priority, errors);
            r.number("t_end", sc.t_end);
            r.number("dt", sc.dt);
            r.count("record_every", sc.record_every);
            r.boolean("pll_frozen", sc.pll_frozen);
        }
        if (const Json* j = root.child("analysis")) {
            ObjectReader r(*j, "analysis", errors);
            auto& a = cfg.analysis;
            r.numbers("clearing_times", a.clearing_times);
            if (const Json* k = r.child("portrait")) {
                ObjectReader q(*k, "analysis.portrait", errors);
                q.count("n", a.portrait.n);
                q.number("lo", a.portrait.lo);
                q.number("hi", a.portrait.hi);
                q.count("random_samples", a.portrait.random_samples);
                q.number("horizon", a.portrait.basin.horizon);
                q.number("dt", a.portrait.basin.dt);
                q.number("tol", a.portrait.basin.tol);
                q.number("diverge_norm", a.portrait.basin.diverge_norm);
            }
            if (const Json* k = r.child("pll_portrait")) {
                ObjectReader q(*k, "analysis.pll_portrait", errors);
                auto& s = a.pll_portrait;
                q.count("n_d_omega", s.n_d_omega);
                q.count("n_delta", s.n_delta);
                q.number("d_omega_lo", s.d_omega_lo);
                q.number("d_omega_hi", s.d_omega_hi);
                q.number("delta_lo", s.delta_lo);
                q.number("delta_hi", s.delta_hi);
                std::string damping, curve;
                q.text("damping", damping);
                if (!damping.empty()) {
                    const auto l = detail::lower(damping);
                    if (l == "constant")
                        s.damping = DampingMode::Constant;
                    else if (l == "angle_dependent")
                        s.damping = DampingMode::AngleDependent;
                    else
                        errors.push_back("analysis.pll_portrait.damping: expected constant or angle_dependent");
                }
                q.number("d0", s.d0);
                q.text("curve", curve);
                if (!curve.empty()) {
                    const auto l = detail::lower(curve);
                    if (l == "pre_fault")
                        s.curve = PortraitCurve::PreFault;
                    else if (l == "fault")
                        s.curve = PortraitCurve::Fault;
                    else
                        errors.push_back("analysis.pll_portrait.curve: expected pre_fault or fault");
                }
                q.count("random_samples", s.random_samples);
                q.number("horizon", s.options.horizon);
                q.number("dt", s.options.dt);
                q.number("tol", s.options.tol);
                q.number("diverge_d_omega", s.options.diverge_d_omega);
            }
            if (const Json* k = r.child("sweep")) {
                ObjectReader q(*k, "analysis.sweep", errors);
                q.numbers("bandwidths_hz", a.sweep.bandwidths_hz);
                q.numbers("dips", a.sweep.dips);
            }
            if (const Json* k = r.child("oracle")) {
                ObjectReader q(*k, "analysis.oracle", errors);
                auto& o = a.oracle;
                q.number("t_lo", o.t_lo);
                q.number("t_hi", o.t_hi);
                q.number("t_max", o.t_max);
                q.number("tol", o.tol);
                q.number("dt", o.dt);
                q.number("settle", o.settle);
                q.boolean("freq_clamp", o.freq_clamp);
            }
        }
    }

    // The limiter and the frequency clamp follow the operating point.
    cfg.scenario.limiter.i_max = p.op.i_max;
    cfg.scenario.limiter.freq_clamp = p.op.freq_limit;

    if (errors.empty()) {
        for (auto& v : validate_params(p).violations) errors.push_back("invalid parameter: " + v);
        if (cfg.has_fault)
            for (auto& v : validate_fault(cfg.scenario.fault).violations) errors.push_back("invalid fault: " + v);
        if (!(cfg.scenario.dt > 0.0)) errors.emplace_back("invalid scenario: dt > 0");
        if (cfg.scenario.record_every < 1) errors.emplace_back("invalid scenario: record_every >= 1");
        if (!(cfg.analysis.portrait.n >= 1)) errors.emplace_back("invalid analysis: portrait.n >= 1");
        if (!(cfg.analysis.portrait.hi > cfg.analysis.portrait.lo)) errors.emplace_back("invalid analysis: portrait.hi > portrait.lo");
    }
    if (!errors.empty()) {
        std::string msg = "configuration rejected:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw validation_error(msg);
    }
    return cfg;
}

/// Parses JSON text; syntax errors report line:column.
inline Config parse_config(const std::string& text, const std::string& origin = "<string>") {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw validation_error(origin + ":" + detail::line_column(text, e.byte) + ": parse error: " + e.what());
    }
    return config_from_json(doc);
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

namespace detail {

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

}  // namespace detail

/// Fully resolved snapshot: reloading it reproduces the same Config.
inline Json to_json(const Config& cfg) {
    const auto& p = cfg.scenario.params;
    Json j;
    j["name"] = cfg.name;
    j["base"] = {{"s_base", p.base.s_base}, {"u_base", p.base.u_base}, {"f_base", p.base.f_base}};
    j["hardware"] = {{"v_dc", p.hardware.v_dc}, {"f_sw", p.hardware.f_sw}, {"l_f", p.hardware.l_f}, {"l_t", p.hardware.l_t}};
    j["grid"] = {{"scr", p.grid.scr},
                 {"l_sigma_t", p.grid.l_sigma_t},
                 {"r_sigma_t", p.grid.r_sigma_t},
                 {"z_s", detail::complex_json(p.grid.z_s)},
                 {"u_s", p.grid.u_s},
                 {"omega_s", p.grid.omega_s}};
    Json ctrl = {{"pll_kp", p.ctrl.pll_kp}, {"pll_ki", p.ctrl.pll_ki}, {"pq_kp", p.ctrl.pq_kp}, {"pq_ki", p.ctrl.pq_ki}};
    if (p.ctrl.pll_bandwidth_hz) ctrl["pll_bandwidth_hz"] = *p.ctrl.pll_bandwidth_hz;
    if (p.ctrl.pq_bandwidth_hz) ctrl["pq_bandwidth_hz"] = *p.ctrl.pq_bandwidth_hz;
    j["controller"] = ctrl;
    j["operating_point"] = {{"p_ref", p.op.p_ref},       {"q_ref", p.op.q_ref}, {"i_cd_ref", p.op.i_cd_ref},
                            {"i_cq_ref", p.op.i_cq_ref}, {"i_max", p.op.i_max}, {"freq_limit", p.op.freq_limit}};
    if (cfg.has_fault) {
        const auto& f = cfg.scenario.fault;
        Json fj;
        if (f.z_f) {
            fj["z_f"] = detail::complex_json(*f.z_f);
        } else {
            fj["k_f"] = f.k_f_mag;
            fj["phi_f"] = f.phi_f;
        }
        fj["t_apply"] = f.t_apply;
        fj["t_clear"] = f.t_clear;
        j["fault"] = fj;
    }
    const auto& sc = cfg.scenario;
    j["scenario"] = {{"mode", std::string(to_string(sc.mode))},
                     {"limiter_priority", std::string(to_string(sc.limiter.priority))},
                     {"t_end", sc.t_end},
                     {"dt", sc.dt},
                     {"record_every", sc.record_every},
                     {"pll_frozen", sc.pll_frozen}};
    const auto& a = cfg.analysis;
    Json pp = {{"n_d_omega", a.pll_portrait.n_d_omega},
               {"n_delta", a.pll_portrait.n_delta},
               {"d_omega_lo", a.pll_portrait.d_omega_lo},
               {"d_omega_hi", a.pll_portrait.d_omega_hi},
               {"delta_lo", a.pll_portrait.delta_lo},
               {"delta_hi", a.pll_portrait.delta_hi},
               {"damping", a.pll_portrait.damping == DampingMode::Constant ? "constant" : "angle_dependent"},
               {"curve", a.pll_portrait.curve == PortraitCurve::Fault ? "fault" : "pre_fault"},
               {"random_samples", a.pll_portrait.random_samples},
               {"horizon", a.pll_portrait.options.horizon},
               {"dt", a.pll_portrait.options.dt},
               {"tol", a.pll_portrait.options.tol},
               {"diverge_d_omega", a.pll_portrait.options.diverge_d_omega}};
    if (a.pll_portrait.d0) pp["d0"] = *a.pll_portrait.d0;
    j["analysis"] = {{"clearing_times", a.clearing_times},
                     {"portrait",
                      {{"n", a.portrait.n},
                       {"lo", a.portrait.lo},
                       {"hi", a.portrait.hi},
                       {"random_samples", a.portrait.random_samples},
                       {"horizon", a.portrait.basin.horizon},
                       {"dt", a.portrait.basin.dt},
                       {"tol", a.portrait.basin.tol},
                       {"diverge_norm", a.portrait.basin.diverge_norm}}},
                     {"pll_portrait", pp},
                     {"sweep", {{"bandwidths_hz", a.sweep.bandwidths_hz}, {"dips", a.sweep.dips}}},
                     {"oracle",
                      {{"t_lo", a.oracle.t_lo},
                       {"t_hi", a.oracle.t_hi},
                       {"t_max", a.oracle.t_max},
                       {"tol", a.oracle.tol},
                       {"dt", a.oracle.dt},
                       {"settle", a.oracle.settle},
                       {"freq_clamp", a.oracle.freq_clamp}}}};
    return j;
}

}  // namespace vscstab
