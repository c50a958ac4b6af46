#pragma once

// End-to-end acceptance checks. Each criterion returns pass/fail, a short
// measured-value string and its wall time; the runtime budget is part of the
// verdict.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vscstab/config.hpp"
#include "vscstab/eap.hpp"
#include "vscstab/io.hpp"
#include "vscstab/numerics.hpp"
#include "vscstab/pcl.hpp"
#include "vscstab/pll.hpp"
#include "vscstab/runners.hpp"
#include "vscstab/scenario.hpp"

namespace vscstab {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
    double budget_s = 0.0;
};

namespace detail {

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string fmt(double v, int digits = 6) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

/// Wraps a check: times it, enforces the budget, turns exceptions into failures.
inline CriterionResult run_criterion(int id, std::string title, double budget_s,
                                     const std::function<bool(std::string&)>& body) {
    CriterionResult r{id, std::move(title), false, "", 0.0, budget_s};
    Stopwatch sw;
    try {
        r.passed = body(r.detail);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("error: ") + e.what();
    }
    r.seconds = sw.seconds();
    if (r.seconds > budget_s) {
        r.passed = false;
        r.detail += " (over budget: " + fmt(r.seconds, 3) + " s > " + fmt(budget_s, 3) + " s)";
    }
    return r;
}

/// Observed convergence order log2(e(h) / e(h/2)).
inline double observed_order(double e_h, double e_h2) { return std::log2(e_h / e_h2); }

}  // namespace detail

// 1. delta_A of the Fig. 6(b) network.
inline CriterionResult check_equilibrium_angle(const std::filesystem::path& presets) {
    const auto cfg = load_preset("fig6b", presets);
    // Budget covers 1000 repetitions; the per-call time must stay under 1 ms.
    return detail::run_criterion(1, "equilibrium angle delta_A = 0.253 rad", 1.0, [&](std::string& d) {
        const int reps = 1000;
        detail::Stopwatch sw;
        SwingEquilibria eq{};
        for (int i = 0; i < reps; ++i) eq = *swing_equilibria(swing_coeffs(cfg.params(), CurveCondition::pre_fault()));
        const double per_call = sw.seconds() / reps;
        d = "delta_A=" + detail::fmt(eq.delta_a) + " delta_B=" + detail::fmt(eq.delta_b) +
            " per-call=" + detail::fmt(per_call * 1e6, 3) + "us";
        return std::abs(eq.delta_a - 0.253) <= 1e-3 && std::abs(eq.delta_b - (std::numbers::pi - eq.delta_a)) < 1e-12 &&
               std::abs(eq.delta_b - 2.89) < 5e-3 && per_call < 1e-3;
    });
}

// 2. EAP estimate and brute-force oracle for the Fig. 6(b) preset.
inline CriterionResult check_cct_headline(const std::filesystem::path& presets) {
    const auto cfg = load_preset("fig6b", presets);
    return detail::run_criterion(2, "CCT estimate in [0.135, 0.225] s, oracle in (0.1, 0.3) s", 30.0, [&](std::string& d) {
        const auto rep = run_cca(cfg, true);
        if (!rep.t_cct_estimate || !rep.oracle) {
            d = "no interior CCA";
            return false;
        }
        const double est = *rep.t_cct_estimate, orc = rep.oracle->t_cct;
        d = "estimate=" + detail::fmt(est) + " s oracle=" + detail::fmt(orc) + " s";
        return est >= 0.135 && est <= 0.225 && orc > 0.1 && orc < 0.3;
    });
}

// 3. Scenario verdicts.
inline CriterionResult check_scenario_verdicts(const std::filesystem::path& presets) {
    const auto fig3 = load_preset("fig3", presets);
    const auto fig4b = load_preset("fig4b", presets);
    const auto fig6b = load_preset("fig6b", presets);
    return detail::run_criterion(3, "scenario verdicts fig3c/fig4b/fig6b", 10.0, [&](std::string& d) {
        struct Case {
            const char* name;
            Config cfg;
            SyncClass expect;
        };
        const std::vector<Case> cases{{"fig3c-500ms", fig3, SyncClass::LostSync},
                                      {"fig4b-100ms", fig4b, SyncClass::Synchronized},
                                      {"fig6b-100ms", with_fault_duration(fig6b, 0.1), SyncClass::Synchronized},
                                      {"fig6b-300ms", with_fault_duration(fig6b, 0.3), SyncClass::LostSync}};
        bool ok = true;
        for (const auto& c : cases) {
            const auto v = classify_sync(run_config_scenario(c.cfg));
            ok = ok && v.cls == c.expect;
            if (!d.empty()) d += " ";
            d += std::string(c.name) + "=" + std::string(to_string(v.cls));
        }
        return ok;
    });
}

// 4. CCT monotone in PLL bandwidth, dip spread narrower at 20 Hz than at 5 Hz.
inline CriterionResult check_cct_monotonicity(const std::filesystem::path& presets) {
    const auto cfg = load_preset("fig6a", presets);
    return detail::run_criterion(4, "CCT decreasing in bandwidth; dip spread(20 Hz) < spread(5 Hz)", 60.0,
                                 [&](std::string& d) {
                                     const auto table = run_sweep(cfg, false);
                                     const auto& bw = table.bandwidths;
                                     std::size_t i5 = bw.size(), i20 = bw.size();
                                     for (std::size_t i = 0; i < bw.size(); ++i) {
                                         if (bw[i] == 5.0) i5 = i;
                                         if (bw[i] == 20.0) i20 = i;
                                     }
                                     if (i5 == bw.size() || i20 == bw.size()) {
                                         d = "sweep grid lacks 5 Hz or 20 Hz";
                                         return false;
                                     }
                                     // Every dip must have an interior estimate at every bandwidth to
                                     // count as a "fixed fault depth" series.
                                     std::size_t series = 0;
                                     for (std::size_t j = 0; j < table.dips.size(); ++j) {
                                         bool full = true;
                                         for (std::size_t i = 0; i < bw.size(); ++i)
                                             full = full && table.at(i, j).t_cct_estimate.has_value();
                                         series += full;
                                     }
                                     const bool mono = table.cct_decreasing_in_bandwidth();
                                     const double s5 = table.dip_spread(i5), s20 = table.dip_spread(i20);
                                     d = "decreasing=" + std::string(mono ? "yes" : "no") +
                                         " full-series=" + std::to_string(series) + " spread5=" + detail::fmt(s5) +
                                         " s spread20=" + detail::fmt(s20) + " s";
                                     return mono && series >= 1 && s20 < s5;
                                 });
}

// 5. PCL basin fractions.
inline CriterionResult check_pcl_basin(const std::filesystem::path& presets) {
    const auto base = load_preset("fig2a", presets);
    return detail::run_criterion(5, "PCL basin: kp effect, ki insensitivity, i_max disk", 120.0, [&](std::string& d) {
        auto fraction = [&](double kp, double ki) {
            Config c = base;
            c.params().ctrl.pq_kp = kp;
            c.params().ctrl.pq_ki = ki;
            return run_portrait(c).fraction(BasinClass::ConvergedToTarget);
        };
        const double f11 = fraction(0.1, 20.0), f21 = fraction(0.2, 20.0), f12 = fraction(0.1, 40.0);
        bool disk_ok = true;
        double worst_disk = 1.0;
        for (double kp : {0.1, 0.2}) {
            for (double ki : {20.0, 40.0}) {
                SystemParams p = base.params();
                p.ctrl.pq_kp = kp;
                p.ctrl.pq_ki = ki;
                const auto s = pcl_setup(p);
                BasinOptions opt = base.analysis.portrait.basin;
                const auto pts = pcl_current_disk(base.analysis.portrait.n, p.op.i_max);
                const double f = classify_current_basin(s.model, s.target, pts, opt).fraction(BasinClass::ConvergedToTarget);
                worst_disk = std::min(worst_disk, f);
                disk_ok = disk_ok && f == 1.0;
            }
        }
        const double rel_ki = std::abs(f12 - f11) / f11;
        d = "frac(kp0.1,ki20)=" + detail::fmt(f11, 4) + " frac(kp0.2,ki20)=" + detail::fmt(f21, 4) +
            " frac(kp0.1,ki40)=" + detail::fmt(f12, 4) + " ki-rel-diff=" + detail::fmt(rel_ki, 3) +
            " min-disk=" + detail::fmt(worst_disk, 4);
        return f21 < f11 && rel_ki < 0.05 && disk_ok;
    });
}

// 6. Closed forms against independent oracles.
inline CriterionResult check_oracle_equivalence(std::uint64_t seed = 20240521) {
    return detail::run_criterion(6, "closed-form areas, P/Q and swing energy vs oracles", 30.0, [&](std::string& d) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> ang(-2.0 * std::numbers::pi, 4.0 * std::numbers::pi);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double worst_area = 0.0;
        for (int i = 0; i < 1000; ++i) {
            SwingCoeffs c;
            c.t_m = unit(rng);
            c.u_eff = unit(rng) * 1.2;
            c.phi = (unit(rng) - 0.5) * std::numbers::pi;
            const double a = ang(rng), b = ang(rng);
            const double quad = integrate_adaptive(
                [&](double x) { return c.t_m - c.u_eff * std::sin(x - c.phi); }, a, b);
            worst_area = std::max(worst_area, std::abs(area(a, b, c) - quad));
        }
        double worst_pq = 0.0;
        std::uniform_real_distribution<double> cur(-3.0, 3.0);
        for (int i = 0; i < 1000; ++i) {
            GridParams g;
            g.scr = 1.0 + 9.0 * unit(rng);
            g.u_s = 0.5 + unit(rng);
            g.omega_s = 0.9 + 0.2 * unit(rng);
            const double id = cur(rng), iq = cur(rng), th = ang(rng);
            const auto pq = pq_from_currents(id, iq, th, g);
            const std::complex<double> i_c{id, iq};
            const auto u_g = std::polar(g.u_s, -th) + std::complex<double>{0.0, g.omega_s * g.l_sigma()} * i_c;
            const auto s = u_g * std::conj(i_c);
            worst_pq = std::max({worst_pq, std::abs(pq.p - s.real()), std::abs(pq.q - s.imag())});
        }
        // Zero damping: E = 1/2 T_pll w_b Dw^2 - t_m delta - u cos(delta - phi) is conserved.
        SwingCoeffs c;
        c.t_pll = 0.38645;
        c.t_m = 0.25;
        c.u_eff = 1.0;
        auto energy = [&](const Vec<2>& x) {
            return 0.5 * c.t_pll * c.omega_b * x[0] * x[0] - c.t_m * x[1] - c.u_eff * std::cos(x[1] - c.phi);
        };
        const Vec<2> x0{0.05, 0.2527};
        const auto sol = rk4_integrate<2>(
            [&](double, const Vec<2>& x) { return pll_rhs(PllState::from(x), c, DampingSpec::constant(0.0)).vec(); }, x0,
            IntegratorConfig{1e-4, 1.0, 1, 1e6});
        double drift = 0.0;
        for (const auto& x : sol.x) drift = std::max(drift, std::abs(energy(x) - energy(x0)));
        d = "area-err=" + detail::fmt(worst_area, 3) + " pq-err=" + detail::fmt(worst_pq, 3) +
            " energy-drift=" + detail::fmt(drift, 3);
        return worst_area < 1e-10 && worst_pq < 1e-12 && drift < 1e-6;
    });
}

// 7. Q controller has negligible effect; faster PQ loop gives a larger swing.
inline CriterionResult check_pq_regulation(const std::filesystem::path& presets) {
    const auto fig8a = load_preset("fig8a", presets);
    const auto fig8b = load_preset("fig8b", presets);
    return detail::run_criterion(7, "Q control < 2% of peak; peak(20 Hz PQ) >= peak(10 Hz PQ)", 30.0,
                                 [&](std::string& d) {
                                     if (fig8a.params().grid.r_sigma_t != 0.0) {
                                         d = "fig8a preset must have r_sigma_t = 0";
                                         return false;
                                     }
                                     const auto rep = compare_q_control(fig8a.scenario);
                                     const double p10 = run_config_scenario(fig8a).peak_abs_d_omega;
                                     const double p20 = run_config_scenario(fig8b).peak_abs_d_omega;
                                     d = "q-diff=" + detail::fmt(100.0 * rep.relative_freq_diff(), 3) +
                                         "% peak10=" + detail::fmt(p10) + " peak20=" + detail::fmt(p20);
                                     return rep.relative_freq_diff() < 0.02 && p20 >= p10;
                                 });
}

/// RK4 errors at N, 2N, 4N steps on x' = -x over [0, 1] and on the
/// pendulum over one exact period.
struct ConvergenceReport {
    std::vector<double> decay_errors;
    std::vector<double> pendulum_errors;
    double decay_order = 0.0;
    double pendulum_order = 0.0;
};

inline ConvergenceReport rk4_convergence() {
    ConvergenceReport r;
    for (int n : {10, 20, 40}) {
        const double dt = 1.0 / n;
        const auto sol = rk4_integrate<1>([](double, const Vec<1>& x) { return Vec<1>{-x[0]}; }, Vec<1>{1.0},
                                          IntegratorConfig{dt, 1.0, 1, 1e6});
        r.decay_errors.push_back(std::abs(sol.final_state()[0] - std::exp(-1.0)));
    }
    // theta'' = -sin theta from rest at theta0: period 4 K(sin(theta0/2)).
    const double theta0 = 1.0;
    const double period = 4.0 * std::comp_ellint_1(std::sin(theta0 / 2.0));
    for (int n : {50, 100, 200}) {
        const double dt = period / n;
        const auto sol = rk4_integrate<2>([](double, const Vec<2>& x) { return Vec<2>{x[1], -std::sin(x[0])}; },
                                          Vec<2>{theta0, 0.0}, IntegratorConfig{dt, period, 1, 1e6});
        const auto& xf = sol.final_state();
        r.pendulum_errors.push_back(std::hypot(xf[0] - theta0, xf[1]));
    }
    r.decay_order = detail::observed_order(r.decay_errors[1], r.decay_errors[2]);
    r.pendulum_order = detail::observed_order(r.pendulum_errors[1], r.pendulum_errors[2]);
    return r;
}

// 8. Order-4 convergence and bit-identical repeated runs.
inline CriterionResult check_numerics(const std::filesystem::path& presets) {
    const auto fig4b = load_preset("fig4b", presets);
    const auto fig3 = load_preset("fig3", presets);
    const auto fig6a = load_preset("fig6a", presets);
    return detail::run_criterion(8, "RK4 order 4; bit-deterministic outputs", 60.0, [&](std::string& d) {
        const auto conv = rk4_convergence();
        auto scenario_csv = [&] {
            std::ostringstream os;
            write_trajectory_csv(os, run_config_scenario(fig4b));
            return os.str();
        };
        auto portrait_csv = [&](unsigned threads) {
            std::ostringstream os;
            write_pll_portrait_csv(os, run_pll_portrait(fig3, std::nullopt, threads));
            return os.str();
        };
        auto sweep_csv = [&](unsigned threads) {
            std::ostringstream os;
            write_sweep_csv(os, run_sweep(fig6a, false, threads));
            return os.str();
        };
        const bool same_scenario = scenario_csv() == scenario_csv();
        const bool same_portrait = portrait_csv(1) == portrait_csv(4);
        const bool same_sweep = sweep_csv(1) == sweep_csv(3);
        d = "order(decay)=" + detail::fmt(conv.decay_order, 4) + " order(pendulum)=" +
            detail::fmt(conv.pendulum_order, 4) + " identical: scenario=" + (same_scenario ? "yes" : "no") +
            " portrait=" + (same_portrait ? "yes" : "no") + " sweep=" + (same_sweep ? "yes" : "no");
        auto order_ok = [](double p) { return p > 3.7 && p < 4.3; };
        return order_ok(conv.decay_order) && order_ok(conv.pendulum_order) && same_scenario && same_portrait &&
               same_sweep;
    });
}

inline std::vector<CriterionResult> run_acceptance(const std::filesystem::path& presets = default_preset_dir()) {
    return {check_equilibrium_angle(presets),  check_cct_headline(presets),      check_scenario_verdicts(presets),
            check_cct_monotonicity(presets),   check_pcl_basin(presets),         check_oracle_equivalence(),
            check_pq_regulation(presets),      check_numerics(presets)};
}

inline std::string format_result_line(const CriterionResult& r) {
    std::ostringstream os;
    os << (r.passed ? "PASS" : "FAIL") << "  [" << r.id << "] " << r.title << "  (" << detail::fmt(r.seconds, 3)
       << " s / " << detail::fmt(r.budget_s, 3) << " s)  " << r.detail;
    return os.str();
}

}  // namespace vscstab
