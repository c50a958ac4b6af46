#pragma once

// CSV and JSON emitters with fixed column orders. Numbers are written with
// std::to_chars (shortest round-trip form), so identical inputs give
// byte-identical files.
//
//   portrait       initial_x,initial_y,class,final_x,final_y
//   pll-portrait   d_omega0,delta0,class,slips
//   cct-sweep      bandwidth_hz,k_f,delta_a,delta_cca,s_accel,t_cct_est,t_cct_oracle,verdict
//   scenario       t,delta,d_omega,i_cd_ref,i_cq_ref,p,q,u_pcc,limiter_active
//   trajectory     t,x,y

#include <charconv>
#include <cstdint>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "vscstab/config.hpp"
#include "vscstab/eap.hpp"
#include "vscstab/pcl.hpp"
#include "vscstab/pll.hpp"
#include "vscstab/scenario.hpp"

namespace vscstab {

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

/// RFC 4180 field: quoted only when it contains a comma, quote or line break.
inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os) { row(header); }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) os_ << ',';
            os_ << csv_field(fields[i]);
        }
        os_ << "\r\n";
    }

private:
    std::ostream& os_;
};

inline const std::vector<std::string>& portrait_columns() {
    static const std::vector<std::string> c{"initial_x", "initial_y", "class", "final_x", "final_y"};
    return c;
}

inline void write_portrait_csv(std::ostream& os, const BasinMap& map) {
    CsvWriter w(os, portrait_columns());
    for (const auto& p : map.points)
        w.row({format_number(p.x0), format_number(p.y0), std::string(to_string(p.cls)), format_number(p.xf),
               format_number(p.yf)});
}

inline const std::vector<std::string>& pll_portrait_columns() {
    static const std::vector<std::string> c{"d_omega0", "delta0", "class", "slips"};
    return c;
}

inline void write_pll_portrait_csv(std::ostream& os, const std::vector<PllPortraitPoint>& pts) {
    CsvWriter w(os, pll_portrait_columns());
    for (const auto& p : pts)
        w.row({format_number(p.d_omega0), format_number(p.delta0), std::string(to_string(p.cls)),
               std::to_string(p.slips)});
}

inline void write_xy_trajectory_csv(std::ostream& os, const std::vector<double>& t, const std::vector<Vec<2>>& xy,
                                    const std::string& x_name, const std::string& y_name) {
    CsvWriter w(os, {"t", x_name, y_name});
    for (std::size_t i = 0; i < t.size(); ++i) w.row({format_number(t[i]), format_number(xy[i][0]), format_number(xy[i][1])});
}

inline const std::vector<std::string>& sweep_columns() {
    static const std::vector<std::string> c{"bandwidth_hz", "k_f",     "delta_a",      "delta_cca",
                                            "s_accel",      "t_cct_est", "t_cct_oracle", "verdict"};
    return c;
}

inline std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

inline void write_sweep_csv(std::ostream& os, const SweepTable& table) {
    CsvWriter w(os, sweep_columns());
    for (const auto& c : table.cells) {
        std::optional<double> oracle;
        if (c.oracle) oracle = c.oracle->t_cct;
        w.row({format_number(c.bandwidth_hz), format_number(c.k_f), format_number(c.cca.delta_a),
               format_number(c.cca.delta_cca), format_number(c.cca.s_accel), opt_number(c.t_cct_estimate),
               opt_number(oracle), std::string(to_string(c.cca.status))});
    }
}

inline Json sweep_summary_json(const SweepTable& table) {
    Json spread = Json::array();
    for (std::size_t i = 0; i < table.bandwidths.size(); ++i)
        spread.push_back({{"bandwidth_hz", table.bandwidths[i]}, {"dip_spread_s", table.dip_spread(i)}});
    std::size_t interior = 0;
    for (const auto& c : table.cells) interior += c.cca.status == MarginStatus::Interior;
    return {{"bandwidths_hz", table.bandwidths},
            {"dips", table.dips},
            {"cells", table.cells.size()},
            {"interior_cells", interior},
            {"cct_strictly_decreasing_in_bandwidth", table.cct_decreasing_in_bandwidth()},
            {"dip_spread", spread}};
}

inline const std::vector<std::string>& scenario_columns() {
    static const std::vector<std::string> c{"t", "delta", "d_omega", "i_cd_ref", "i_cq_ref",
                                            "p", "q",     "u_pcc",   "limiter_active"};
    return c;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    CsvWriter w(os, scenario_columns());
    for (const auto& s : traj.samples)
        w.row({format_number(s.t), format_number(s.delta), format_number(s.d_omega), format_number(s.i_cd_ref),
               format_number(s.i_cq_ref), format_number(s.p), format_number(s.q), format_number(s.u_pcc),
               s.limiter_active ? "1" : "0"});
}

/// JSON numbers cannot be NaN or infinite; those become null.
inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json verdict_json(const Trajectory& traj, const SyncVerdict& v) {
    Json events = Json::array();
    for (const auto& e : traj.events) events.push_back({{"name", e.name}, {"t", e.t}});
    return {{"classification", std::string(to_string(v.cls))},
            {"slips", v.slips},
            {"peak_freq_pu", traj.peak_freq_pu},
            {"peak_delta_rad", traj.peak_delta},
            {"events", events}};
}

inline Json margin_report_json(const MarginReport& r) {
    Json j = {{"status", std::string(to_string(r.cca.status))},
              {"delta_a", json_number(r.cca.delta_a)},
              {"delta_b", json_number(r.cca.delta_b)},
              {"delta_cca", json_number(r.cca.delta_cca)},
              {"s_accel", json_number(r.cca.s_accel)},
              {"s_decel_max", json_number(r.cca.s_decel_max)},
              {"t_pll", r.t_pll},
              {"t_cct_estimate", r.t_cct_estimate ? json_number(*r.t_cct_estimate) : Json(nullptr)}};
    if (r.oracle) {
        j["t_cct_oracle"] = json_number(r.oracle->t_cct);
        j["oracle"] = {{"status", std::string(to_string(r.oracle->status))},
                       {"stable_at", r.oracle->lo},
                       {"unstable_at", r.oracle->hi}};
    } else {
        j["t_cct_oracle"] = nullptr;
    }
    Json fs = Json::array();
    for (const auto& [t, stable] : r.first_swing_stable_at)
        fs.push_back({{"clearing_time", t}, {"verdict", stable ? "FIRST_SWING_STABLE" : "UNSTABLE"}});
    j["first_swing_stable_at"] = fs;
    return j;
}

inline constexpr std::string_view kToolVersion = "0.1.0";

struct RunManifest {
    std::string subcommand;
    std::string config_path;
    Json resolved;
    std::vector<std::string> outputs;
    std::string tool_version{kToolVersion};
    double wall_clock_s = 0.0;
    std::optional<std::uint64_t> seed;
};

inline Json to_json(const RunManifest& m) {
    Json j = {{"subcommand", m.subcommand},
              {"config_path", m.config_path},
              {"tool_version", m.tool_version},
              {"wall_clock_s", m.wall_clock_s},
              {"outputs", m.outputs},
              {"resolved_config", m.resolved}};
    if (m.seed) j["seed"] = *m.seed;
    return j;
}

}  // namespace vscstab
