// vscstab command-line front end.
//
// Exit codes: 0 success, 1 validation or usage error, 2 numerical failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vscstab/config.hpp"
#include "vscstab/io.hpp"
#include "vscstab/runners.hpp"
#include "vscstab/verify.hpp"

namespace fs = std::filesystem;
using namespace vscstab;

namespace {

struct Options {
    std::string config;
    std::string out = "out";
    std::optional<double> dt;
    std::optional<std::uint64_t> seed;
    bool oracle = false;
    bool trajectories = false;
    unsigned threads = 0;
    std::string presets = default_preset_dir().string();
    std::string figure;
};

class Outputs {
public:
    Outputs(std::string subcommand, const Options& o) : dir_(o.out) {
        manifest_.subcommand = std::move(subcommand);
        manifest_.config_path = o.config;
        manifest_.seed = o.seed;
    }

    std::ofstream open(const std::string& name) {
        const fs::path p = dir_ / name;
        fs::create_directories(p.parent_path());
        std::ofstream f(p, std::ios::binary);
        if (!f) throw validation_error("cannot write '" + p.string() + "'");
        manifest_.outputs.push_back(p.string());
        return f;
    }

    void finish(const Json& resolved) {
        manifest_.resolved = resolved;
        manifest_.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        fs::create_directories(dir_);
        std::ofstream f(dir_ / "manifest.json", std::ios::binary);
        f << to_json(manifest_).dump(2) << "\n";
    }

private:
    fs::path dir_;
    RunManifest manifest_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Config load(const Options& o) {
    if (o.config.empty()) throw validation_error("--config is required");
    return load_config(o.config);
}

std::string pad(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", i);
    return buf;
}

int cmd_portrait(const Options& o) {
    Config cfg = load(o);
    if (o.dt) cfg.analysis.portrait.basin.dt = *o.dt;
    Outputs out("portrait", o);
    const auto map = run_portrait(cfg, o.seed, o.threads);
    {
        auto f = out.open("portrait.csv");
        write_portrait_csv(f, map);
    }
    if (o.trajectories) {
        const auto setup = pcl_setup(cfg.params());
        const auto initials = portrait_initials(cfg.analysis.portrait, o.seed);
        const auto stride = static_cast<std::size_t>(std::max(1.0, std::round(0.01 / cfg.analysis.portrait.basin.dt)));
        for (std::size_t i = 0; i < initials.size(); ++i) {
            const auto [t, xy] = portrait_trajectory(setup, initials[i], cfg.analysis.portrait.basin, stride);
            auto f = out.open("trajectories/portrait_" + pad(i) + ".csv");
            write_xy_trajectory_csv(f, t, xy, "i_cd", "i_cq");
        }
    }
    out.finish(to_json(cfg));
    std::cout << "CONVERGED_TO_TARGET fraction " << map.fraction(BasinClass::ConvergedToTarget) << " over "
              << map.points.size() << " points\n";
    return 0;
}

int cmd_pll_portrait(const Options& o) {
    Config cfg = load(o);
    if (o.dt) cfg.analysis.pll_portrait.options.dt = *o.dt;
    Outputs out("pll-portrait", o);
    const auto pts = run_pll_portrait(cfg, o.seed, o.threads);
    {
        auto f = out.open("pll_portrait.csv");
        write_pll_portrait_csv(f, pts);
    }
    if (o.trajectories) {
        const auto c = portrait_coeffs(cfg);
        const auto d = portrait_damping(cfg, c);
        const auto initials = pll_portrait_initials(cfg.analysis.pll_portrait, o.seed);
        const auto& po = cfg.analysis.pll_portrait.options;
        const auto stride = static_cast<std::size_t>(std::max(1.0, std::round(1e-3 / po.dt)));
        for (std::size_t i = 0; i < initials.size(); ++i) {
            const auto sol = rk4_integrate<2>(
                [&](double, const Vec<2>& x) { return pll_rhs(PllState::from(x), c, d).vec(); }, initials[i].vec(),
                IntegratorConfig{po.dt, po.horizon, stride, 1e9});
            auto f = out.open("trajectories/pll_" + pad(i) + ".csv");
            write_xy_trajectory_csv(f, sol.t, sol.x, "d_omega", "delta");
        }
    }
    out.finish(to_json(cfg));
    std::size_t counts[4] = {0, 0, 0, 0};
    for (const auto& p : pts) ++counts[static_cast<int>(p.cls)];
    std::cout << "CONVERGED_TO_TARGET " << counts[0] << " CONVERGED_ELSEWHERE " << counts[1] << " DIVERGED "
              << counts[2] << " UNDECIDED " << counts[3] << "\n";
    return 0;
}

int cmd_cca(const Options& o) {
    Config cfg = load(o);
    if (o.dt) cfg.analysis.oracle.dt = *o.dt;
    const auto rep = run_cca(cfg, o.oracle);
    const auto j = margin_report_json(rep);
    std::cout << j.dump(2) << "\n";
    if (!o.out.empty() && o.out != "-") {
        Outputs out("cca", o);
        out.open("margin_report.json") << j.dump(2) << "\n";
        out.finish(to_json(cfg));
    }
    return 0;
}

int cmd_sweep(const Options& o) {
    Config cfg = load(o);
    if (o.dt) cfg.analysis.oracle.dt = *o.dt;
    Outputs out("cct-sweep", o);
    const auto table = run_sweep(cfg, o.oracle, o.threads);
    {
        auto f = out.open("cct_sweep.csv");
        write_sweep_csv(f, table);
    }
    const auto summary = sweep_summary_json(table);
    out.open("cct_sweep_summary.json") << summary.dump(2) << "\n";
    out.finish(to_json(cfg));
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_scenario(const Options& o) {
    Config cfg = load(o);
    if (o.dt) cfg.scenario.dt = *o.dt;
    Outputs out("scenario", o);
    const auto traj = run_config_scenario(cfg);
    {
        auto f = out.open("trajectory.csv");
        write_trajectory_csv(f, traj);
    }
    const auto verdict = verdict_json(traj, classify_sync(traj));
    out.open("verdict.json") << verdict.dump(2) << "\n";
    out.finish(to_json(cfg));
    std::cout << verdict.dump(2) << "\n";
    return 0;
}

int cmd_verify(const Options& o) {
    int failed = 0;
    for (const auto& r : run_acceptance(o.presets)) {
        std::cout << format_result_line(r) << std::endl;
        failed += !r.passed;
    }
    std::cout << (8 - failed) << "/8 criteria passed\n";
    return failed == 0 ? 0 : 1;
}

// --- repro ---------------------------------------------------------------------------

void save_csv_if(const Options& o, Outputs& out, const std::string& name, const std::function<void(std::ostream&)>& w) {
    if (o.out.empty()) return;
    auto f = out.open(name);
    w(f);
}

int repro_fig2a(const Options& o, Outputs& out) {
    const auto base = load_preset("fig2a", o.presets);
    for (auto [kp, ki] : {std::pair{0.1, 20.0}, std::pair{0.2, 20.0}, std::pair{0.1, 40.0}, std::pair{0.2, 40.0}}) {
        Config c = base;
        c.params().ctrl.pq_kp = kp;
        c.params().ctrl.pq_ki = ki;
        const auto map = run_portrait(c, o.seed, o.threads);
        std::cout << "kp=" << kp << " ki=" << ki << "  CONVERGED_TO_TARGET fraction "
                  << map.fraction(BasinClass::ConvergedToTarget) << "\n";
        std::ostringstream name;
        name << "fig2a_kp" << kp << "_ki" << ki << ".csv";
        save_csv_if(o, out, name.str(), [&](std::ostream& f) { write_portrait_csv(f, map); });
    }
    return 0;
}

int repro_fig2c(const Options& o, Outputs& out) {
    const auto base = load_preset("fig2c", o.presets);
    const auto target = pcl_setup(base.params()).target;
    for (double i_max : {base.params().op.i_max, 5.0}) {
        Config c = base;
        c.params().op.i_max = i_max;
        c.scenario.limiter.i_max = i_max;
        const auto traj = run_config_scenario(c);
        const auto& last = traj.samples.back();
        const bool home = std::hypot(last.i_cd_ref - target.i_cd, last.i_cq_ref - target.i_cq) < 1e-2;
        const bool p_met = std::abs(last.p - c.params().op.p_ref) < 1e-3;
        const char* verdict = home ? "RETURNS_TO_EQUILIBRIUM" : (p_met ? "STEADY_NON_EQUILIBRIUM" : "NOT_SETTLED");
        std::cout << "i_max=" << i_max << "  final (i_cd, i_cq)=(" << last.i_cd_ref << ", " << last.i_cq_ref
                  << ") P=" << last.p << " Q=" << last.q << "  " << verdict << "\n";
        std::ostringstream name;
        name << "fig2c_imax" << i_max << ".csv";
        save_csv_if(o, out, name.str(), [&](std::ostream& f) { write_trajectory_csv(f, traj); });
    }
    return 0;
}

int repro_fig3(const Options& o, Outputs& out) {
    const auto base = load_preset("fig3", o.presets);
    for (auto mode : {DampingMode::Constant, DampingMode::AngleDependent}) {
        Config c = base;
        c.analysis.pll_portrait.damping = mode;
        const auto pts = run_pll_portrait(c, o.seed, o.threads);
        std::size_t counts[4] = {0, 0, 0, 0};
        for (const auto& p : pts) ++counts[static_cast<int>(p.cls)];
        const char* label = mode == DampingMode::Constant ? "constant D(delta_A)" : "angle-dependent D(delta)";
        std::cout << label << ": CONVERGED_TO_TARGET " << counts[0] << " CONVERGED_ELSEWHERE " << counts[1]
                  << " DIVERGED " << counts[2] << " UNDECIDED " << counts[3] << "\n";
        const std::string name = mode == DampingMode::Constant ? "fig3a_portrait.csv" : "fig3b_portrait.csv";
        save_csv_if(o, out, name, [&](std::ostream& f) { write_pll_portrait_csv(f, pts); });
    }
    const auto traj = run_config_scenario(base);
    const auto v = classify_sync(traj);
    std::cout << "fault " << base.scenario.fault.duration() * 1e3 << " ms: " << to_string(v.cls) << " (slips "
              << v.slips << ")\n";
    save_csv_if(o, out, "fig3c_trajectory.csv", [&](std::ostream& f) { write_trajectory_csv(f, traj); });
    return 0;
}

int repro_single_scenario(const Options& o, Outputs& out, const std::string& name) {
    const auto cfg = load_preset(name, o.presets);
    const auto traj = run_config_scenario(cfg);
    const auto v = classify_sync(traj);
    std::cout << "fault " << cfg.scenario.fault.duration() * 1e3 << " ms: " << to_string(v.cls) << " (slips "
              << v.slips << ")\n";
    save_csv_if(o, out, name + "_trajectory.csv", [&](std::ostream& f) { write_trajectory_csv(f, traj); });
    return 0;
}

int repro_fig6a(const Options& o, Outputs& out) {
    const auto cfg = load_preset("fig6a", o.presets);
    const auto table = run_sweep(cfg, o.oracle, o.threads);
    std::cout << "bandwidth_hz  k_f  t_cct_est  verdict\n";
    for (const auto& c : table.cells)
        std::cout << c.bandwidth_hz << "  " << c.k_f << "  "
                  << (c.t_cct_estimate ? format_number(*c.t_cct_estimate) : std::string("-")) << "  "
                  << to_string(c.cca.status) << "\n";
    std::cout << "strictly decreasing in bandwidth: " << (table.cct_decreasing_in_bandwidth() ? "yes" : "no") << "\n";
    save_csv_if(o, out, "fig6a_cct_sweep.csv", [&](std::ostream& f) { write_sweep_csv(f, table); });
    return 0;
}

int repro_fig6b(const Options& o, Outputs& out) {
    const auto cfg = load_preset("fig6b", o.presets);
    const auto rep = run_cca(cfg, o.oracle);
    if (rep.t_cct_estimate) std::cout << "EAP estimate t_cct = " << *rep.t_cct_estimate << " s\n";
    if (rep.oracle) std::cout << "oracle t_cct = " << rep.oracle->t_cct << " s\n";
    for (double d : {0.1, 0.3}) {
        const auto traj = run_config_scenario(with_fault_duration(cfg, d));
        const auto v = classify_sync(traj);
        std::cout << "fault " << d * 1e3 << " ms: " << to_string(v.cls) << "\n";
        std::ostringstream name;
        name << "fig6b_" << static_cast<int>(std::lround(d * 1e3)) << "ms.csv";
        save_csv_if(o, out, name.str(), [&](std::ostream& f) { write_trajectory_csv(f, traj); });
    }
    return 0;
}

int repro_fig8a(const Options& o, Outputs&) {
    const auto cfg = load_preset("fig8a", o.presets);
    const auto rep = compare_q_control(cfg.scenario);
    std::cout << "max |Dw| difference Q control vs i_cq_ref = 0: " << rep.max_freq_diff << " pu ("
              << 100.0 * rep.relative_freq_diff() << "% of peak " << rep.peak_freq_dev << ")\n";
    return 0;
}

int repro_fig8b(const Options& o, Outputs& out) {
    for (const char* name : {"fig8a", "fig8b"}) {
        const auto cfg = load_preset(name, o.presets);
        const auto traj = run_config_scenario(cfg);
        std::cout << "PQ bandwidth " << cfg.params().ctrl.pq_bandwidth_hz.value_or(0.0)
                  << " Hz: peak |Dw| = " << traj.peak_abs_d_omega << " pu\n";
        save_csv_if(o, out, std::string(name) + "_pq_trajectory.csv",
                    [&](std::ostream& f) { write_trajectory_csv(f, traj); });
    }
    return 0;
}

int cmd_repro(const Options& o) {
    Outputs out("repro " + o.figure, o);
    int rc = 0;
    if (o.figure == "fig2a")
        rc = repro_fig2a(o, out);
    else if (o.figure == "fig2c")
        rc = repro_fig2c(o, out);
    else if (o.figure == "fig3")
        rc = repro_fig3(o, out);
    else if (o.figure == "fig4b")
        rc = repro_single_scenario(o, out, "fig4b");
    else if (o.figure == "fig6a")
        rc = repro_fig6a(o, out);
    else if (o.figure == "fig6b")
        rc = repro_fig6b(o, out);
    else if (o.figure == "fig8a")
        rc = repro_fig8a(o, out);
    else if (o.figure == "fig8b")
        rc = repro_fig8b(o, out);
    else
        throw validation_error("unknown figure '" + o.figure + "'");
    if (!o.out.empty()) out.finish(to_json(load_preset(o.figure, o.presets)));
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vscstab: transient frequency stability of a grid-synchronized converter"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", o.config, "JSON configuration file");
        if (needs_config) c->required();
        sub->add_option("--out", o.out, "output directory")->capture_default_str();
        sub->add_option("--dt", o.dt, "integration step override (s)");
        sub->add_option("--seed", o.seed, "seed for random sampling grids");
        sub->add_option("--threads", o.threads, "worker threads (0 = hardware)");
    };

    auto* portrait = app.add_subcommand("portrait", "PCL current-plane basin map");
    add_common(portrait, true);
    portrait->add_flag("--trajectories", o.trajectories, "also write one CSV per trajectory");

    auto* pll = app.add_subcommand("pll-portrait", "PLL (Dw, delta) portrait classification");
    add_common(pll, true);
    pll->add_flag("--trajectories", o.trajectories, "also write one CSV per trajectory");

    auto* cca = app.add_subcommand("cca", "critical clearing angle / time report");
    add_common(cca, true);
    cca->add_flag("--oracle", o.oracle, "run the brute-force clearing-time bisection");

    auto* sweep = app.add_subcommand("cct-sweep", "clearing time over PLL bandwidth x dip depth");
    add_common(sweep, true);
    sweep->add_flag("--oracle", o.oracle, "run the brute-force oracle for every interior cell");

    auto* scenario = app.add_subcommand("scenario", "time-domain fault scenario");
    add_common(scenario, true);

    auto* verify = app.add_subcommand("verify", "run the acceptance suite and print a pass/fail table");
    verify->add_option("--presets", o.presets, "preset directory")->capture_default_str();

    auto* repro = app.add_subcommand("repro", "reproduce one figure from its preset");
    repro->add_option("figure", o.figure, "fig2a | fig2c | fig3 | fig4b | fig6a | fig6b | fig8a | fig8b")->required();
    repro->add_option("--presets", o.presets, "preset directory")->capture_default_str();
    repro->add_option("--out", o.out, "directory for CSV outputs (empty: none)");
    repro->add_option("--seed", o.seed, "seed for random sampling grids");
    repro->add_option("--threads", o.threads, "worker threads (0 = hardware)");
    repro->add_flag("--oracle", o.oracle, "also run the brute-force oracle where relevant");

    if (argc <= 1) {
        std::cerr << app.help();
        return 1;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*portrait) return cmd_portrait(o);
        if (*pll) return cmd_pll_portrait(o);
        if (*cca) return cmd_cca(o);
        if (*sweep) return cmd_sweep(o);
        if (*scenario) return cmd_scenario(o);
        if (*verify) return cmd_verify(o);
        if (*repro) return cmd_repro(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::Numerical ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
