#pragma once

// Config-driven entry points shared by the CLI, the acceptance suite and the
// demos: one function per analysis, plus the per-figure reproduction runs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vscstab/config.hpp"
#include "vscstab/eap.hpp"
#include "vscstab/io.hpp"
#include "vscstab/pcl.hpp"
#include "vscstab/pll.hpp"
#include "vscstab/scenario.hpp"

namespace vscstab {

// --- PCL portrait -----------------------------------------------------------------

struct PclSetup {
    PclEquilibrium target;
    PclModel model;
};

inline PclSetup pcl_setup(const SystemParams& p) {
    require_valid(p);
    const auto target = pcl_target_equilibrium(pcl_equilibria(p.op.p_ref, p.op.q_ref, p.grid));
    if (!target) throw validation_error("portrait: the power set-point has no equilibrium on this grid");
    return {*target, PclModel(p, target->theta0)};
}

inline std::vector<CurrentPoint> portrait_initials(const PortraitSettings& s, std::optional<std::uint64_t> seed) {
    if (s.random_samples == 0) return pcl_current_grid(s.n, s.lo, s.hi);
    std::mt19937_64 rng(seed.value_or(0));
    std::uniform_real_distribution<double> u(s.lo, s.hi);
    std::vector<CurrentPoint> out(s.random_samples);
    for (auto& c : out) {
        c.i_cd = u(rng);
        c.i_cq = u(rng);
    }
    return out;
}

inline BasinMap run_portrait(const Config& cfg, std::optional<std::uint64_t> seed = std::nullopt,
                             unsigned threads = 0) {
    const auto setup = pcl_setup(cfg.params());
    const auto initials = portrait_initials(cfg.analysis.portrait, seed);
    BasinOptions opt = cfg.analysis.portrait.basin;
    opt.threads = threads;
    return classify_current_basin(setup.model, setup.target, initials, opt);
}

/// Current trajectory (i_cd, i_cq) from one portrait initial point. Stops
/// where the algebraic loop loses its solution.
inline std::pair<std::vector<double>, std::vector<Vec<2>>> portrait_trajectory(const PclSetup& s,
                                                                               const CurrentPoint& c,
                                                                               const BasinOptions& opt,
                                                                               std::size_t record_every) {
    const auto sol = simulate_pcl(s.model, s.model.state_for_currents(c.i_cd, c.i_cq), opt, record_every);
    std::vector<double> t;
    std::vector<Vec<2>> xy;
    for (std::size_t i = 0; i < sol.t.size(); ++i) {
        try {
            const auto o = s.model.outputs(PclState::from(sol.x[i]));
            t.push_back(sol.t[i]);
            xy.push_back({o.i_cd, o.i_cq});
        } catch (const Error&) {
            break;
        }
    }
    return {t, xy};
}

// --- PLL portrait -----------------------------------------------------------------

inline SwingCoeffs portrait_coeffs(const Config& cfg) {
    const auto& p = cfg.params();
    require_valid(p);
    if (cfg.analysis.pll_portrait.curve == PortraitCurve::Fault) {
        if (!cfg.has_fault) throw validation_error("pll-portrait: curve 'fault' needs a fault section");
        return swing_coeffs(p, CurveCondition::post_fault(cfg.scenario.fault));
    }
    return swing_coeffs(p, CurveCondition::pre_fault());
}

/// CONSTANT mode without an explicit d0 uses D(delta_A).
inline DampingSpec portrait_damping(const Config& cfg, const SwingCoeffs& c) {
    const auto& s = cfg.analysis.pll_portrait;
    if (s.damping == DampingMode::AngleDependent) return DampingSpec::angle_dependent();
    if (s.d0) return DampingSpec::constant(*s.d0);
    const auto eq = swing_equilibria(c);
    if (!eq) throw validation_error("pll-portrait: no equilibrium to evaluate D(delta_A)");
    return DampingSpec::constant(damping(eq->delta_a, c));
}

inline std::vector<PllState> pll_portrait_initials(const PllPortraitSettings& s, std::optional<std::uint64_t> seed) {
    std::vector<PllState> out;
    if (s.random_samples > 0) {
        std::mt19937_64 rng(seed.value_or(0));
        std::uniform_real_distribution<double> uw(s.d_omega_lo, s.d_omega_hi), ud(s.delta_lo, s.delta_hi);
        for (std::size_t i = 0; i < s.random_samples; ++i) {
            const double w = uw(rng);
            out.push_back({w, ud(rng)});
        }
        return out;
    }
    auto lin = [](double lo, double hi, std::size_t n, std::size_t i) {
        return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    for (std::size_t i = 0; i < s.n_d_omega; ++i)
        for (std::size_t j = 0; j < s.n_delta; ++j)
            out.push_back({lin(s.d_omega_lo, s.d_omega_hi, s.n_d_omega, i), lin(s.delta_lo, s.delta_hi, s.n_delta, j)});
    return out;
}

inline std::vector<PllPortraitPoint> run_pll_portrait(const Config& cfg,
                                                      std::optional<std::uint64_t> seed = std::nullopt,
                                                      unsigned threads = 0) {
    const auto c = portrait_coeffs(cfg);
    const auto d = portrait_damping(cfg, c);
    auto opt = cfg.analysis.pll_portrait.options;
    opt.threads = threads;
    const auto initials = pll_portrait_initials(cfg.analysis.pll_portrait, seed);
    return classify_pll_portrait(c, d, initials, opt);
}

// --- margins ------------------------------------------------------------------------

inline void require_fault(const Config& cfg, const char* what) {
    if (!cfg.has_fault) throw validation_error(std::string(what) + ": the config has no fault section");
}

/// Clearing times in the analysis section are fault durations.
inline MarginReport run_cca(const Config& cfg, bool oracle) {
    require_fault(cfg, "cca");
    require_valid(cfg.params());
    MarginOptions opt;
    opt.oracle = oracle;
    opt.oracle_options = cfg.analysis.oracle;
    opt.clearing_times = cfg.analysis.clearing_times;
    return margin_report(cfg.params(), CurveCondition::post_fault(cfg.scenario.fault), opt);
}

inline SweepTable run_sweep(const Config& cfg, bool oracle, unsigned threads = 0) {
    require_valid(cfg.params());
    SweepOptions opt;
    opt.phi_f = cfg.has_fault ? cfg.scenario.fault.phi_f : 0.0;
    opt.oracle = oracle;
    opt.oracle_options = cfg.analysis.oracle;
    opt.threads = threads;
    return cct_sweep(cfg.analysis.sweep.bandwidths_hz, cfg.analysis.sweep.dips, cfg.params(), opt);
}

inline Trajectory run_config_scenario(const Config& cfg) {
    require_fault(cfg, "scenario");
    return run_scenario(cfg.scenario);
}

// --- presets --------------------------------------------------------------------------

#ifndef VSCSTAB_PRESET_DIR
#define VSCSTAB_PRESET_DIR "presets"
#endif

inline std::filesystem::path default_preset_dir() { return VSCSTAB_PRESET_DIR; }

inline Config load_preset(const std::string& name, const std::filesystem::path& dir = default_preset_dir()) {
    return load_config((dir / (name + ".json")).string());
}

/// Same configuration with a different fault duration.
inline Config with_fault_duration(Config cfg, double duration) {
    cfg.scenario.fault.t_clear = cfg.scenario.fault.t_apply + duration;
    return cfg;
}

}  // namespace vscstab
