#pragma once

// Equal-area first-swing analysis of the PLL swing model.
//
// S_I      = int_{delta_A}^{delta_C} (T_m - T_e^fault) d delta   (acceleration)
// S_II^max = int_{delta_C}^{delta_B} (T_e^pre - T_m) d delta     (deceleration)
//
// The critical clearing angle balances the two. The clearing-time estimate
// follows from 1/2 T_pll w_b Dw_C^2 = S_I and int w_b Dw dt ~ k0 w_b Dw_C t:
//
//   t_CCT = (delta_CCA - delta_A) / k0 * sqrt(T_pll / (2 S_I w_b)),  k0 = 2/3

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "vscstab/common.hpp"
#include "vscstab/numerics.hpp"
#include "vscstab/params.hpp"
#include "vscstab/pll.hpp"

namespace vscstab {

/// Closed form of int_{from}^{to} (t_m - u_eff sin(delta - phi)) d delta.
inline double area(double delta_from, double delta_to, const SwingCoeffs& curve) {
    return curve.t_m * (delta_to - delta_from) +
           curve.u_eff * (std::cos(delta_to - curve.phi) - std::cos(delta_from - curve.phi));
}

enum class MarginStatus { Interior, NoMargin, AlwaysStable };

inline std::string_view to_string(MarginStatus s) {
    switch (s) {
        case MarginStatus::Interior: return "INTERIOR";
        case MarginStatus::NoMargin: return "NO_MARGIN";
        case MarginStatus::AlwaysStable: return "ALWAYS_STABLE";
    }
    return "UNKNOWN";
}

struct CcaResult {
    MarginStatus status = MarginStatus::NoMargin;
    double delta_a = std::numeric_limits<double>::quiet_NaN();
    double delta_b = std::numeric_limits<double>::quiet_NaN();
    double delta_cca = std::numeric_limits<double>::quiet_NaN();
    double s_accel = std::numeric_limits<double>::quiet_NaN();
    double s_decel_max = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
};

/// R(delta) = S_I(delta_A -> delta, fault curve) - S_II^max(delta -> delta_B, pre curve).
inline double cca_residual(double delta, double delta_a, double delta_b, const SwingCoeffs& pre,
                           const SwingCoeffs& post) {
    return area(delta_a, delta, post) + area(delta, delta_b, pre);
}

inline CcaResult solve_cca(const SwingCoeffs& pre, const SwingCoeffs& post, double tol = 1e-10) {
    CcaResult r;
    const auto eq = swing_equilibria(pre);
    if (!eq || !(eq->delta_a < eq->delta_b)) return r;  // no pre-fault operating point
    r.delta_a = eq->delta_a;
    r.delta_b = std::numbers::pi - eq->delta_a;
    auto res = [&](double d) { return cca_residual(d, r.delta_a, r.delta_b, pre, post); };
    const double r_lo = res(r.delta_a);
    const double r_hi = res(r.delta_b);
    if (r_lo >= 0.0) return r;
    if (r_hi <= 0.0) {
        r.status = MarginStatus::AlwaysStable;
        r.s_accel = area(r.delta_a, r.delta_b, post);
        r.s_decel_max = 0.0;
        return r;
    }
    r.status = MarginStatus::Interior;
    r.delta_cca = bisect(res, r.delta_a, r.delta_b, tol);
    r.s_accel = area(r.delta_a, r.delta_cca, post);
    r.s_decel_max = -area(r.delta_cca, r.delta_b, pre);
    r.residual = res(r.delta_cca);
    return r;
}

inline constexpr double kMeanFrequencyFactor = 2.0 / 3.0;

/// Clearing-time estimate; empty (always stable) when s_accel <= 0.
inline std::optional<double> estimate_cct(double delta_cca, double delta_a, double s_accel, double t_pll,
                                          double omega_b, double k0 = kMeanFrequencyFactor) {
    if (!(s_accel > 0.0)) return std::nullopt;
    if (!(t_pll > 0.0)) throw validation_error("estimate_cct: t_pll > 0 required");
    return (delta_cca - delta_a) / k0 * std::sqrt(t_pll / (2.0 * s_accel * omega_b));
}

// --- brute-force clearing time ------------------------------------------------

struct OracleOptions {
    double t_lo = 0.0;
    double t_hi = 0.5;
    double t_max = 5.0;   // widest bracket tried before declaring ALWAYS_STABLE
    double tol = 1e-3;
    double dt = 1e-4;
    double settle = 5.0;  // simulated time after clearing
    bool freq_clamp = true;
};

struct SwingRun {
    bool stable = false;
    bool slipped = false;
    bool returned = false;  // Dw came back through zero after clearing
    double peak_delta = 0.0;
    double peak_d_omega = 0.0;
};

/// Fault on at t = 0 for `duration`, then the healthy curve for opt.settle.
/// First-swing stable: no pole slip and Dw returns through zero.
inline SwingRun simulate_first_swing(const SystemParams& params, const CurveCondition& fault, double duration,
                                     const OracleOptions& opt = {}) {
    const double u_pcc = std::abs(prefault_pcc_voltage(params.grid, params.op));
    const auto pre = swing_coeffs(params, CurveCondition::pre_fault(), params.op.i_cd_ref, params.op.i_cq_ref, u_pcc);
    const auto post = swing_coeffs(params, fault, params.op.i_cd_ref, params.op.i_cq_ref, u_pcc);
    const auto eq = swing_equilibria(pre);
    if (!eq) throw validation_error("first swing: no pre-fault equilibrium");
    const double delta_a = eq->delta_a;
    const double clamp = params.op.freq_limit - 1.0;

    IntegratorConfig cfg{opt.dt, duration + opt.settle, 1u << 30, 1e9};
    const long long clear_step = snap_to_step(duration, opt.dt);
    auto rhs = [&](double, const Vec<2>& x, std::size_t segment) {
        return pll_rhs(PllState::from(x), segment == 0 ? post : pre).vec();
    };
    SwingRun run;
    double d_omega_at_clear = 0.0;
    bool cleared = false;
    StepHooks<2> hooks;
    if (opt.freq_clamp)
        hooks.project = [clamp](const Vec<2>& x) { return Vec<2>{std::clamp(x[0], -clamp, clamp), x[1]}; };
    hooks.stop = [&](double t, const Vec<2>& x) {
        run.peak_delta = std::max(run.peak_delta, x[1]);
        run.peak_d_omega = std::max(run.peak_d_omega, std::abs(x[0]));
        const long long step = snap_to_step(t, opt.dt);
        if (!cleared && step >= clear_step) {
            cleared = true;
            d_omega_at_clear = x[0];
            if (d_omega_at_clear <= 0.0) run.returned = true;
        } else if (cleared && !run.returned && x[0] <= 0.0) {
            run.returned = true;
        }
        if (slip_count(x[1], delta_a) >= 1) {
            run.slipped = true;
            return true;
        }
        return false;
    };
    std::vector<Event<2>> events{{duration, {}}};
    const auto sol = rk4_integrate<2>(rhs, Vec<2>{0.0, delta_a}, cfg, events, hooks);
    if (clear_step == 0) run.returned = true;
    if (sol.blew_up) run.slipped = true;
    run.stable = !run.slipped && run.returned;
    return run;
}

struct OracleResult {
    MarginStatus status = MarginStatus::Interior;
    double t_cct = std::numeric_limits<double>::quiet_NaN();
    double lo = 0.0;  // last clearing time found stable
    double hi = 0.0;  // first clearing time found unstable
};

/// Bisection on the clearing time over full nonlinear simulations.
inline OracleResult brute_force_cct(const SystemParams& params, const CurveCondition& fault,
                                    const OracleOptions& opt = {}) {
    auto stable = [&](double t) { return simulate_first_swing(params, fault, t, opt).stable; };
    double lo = opt.t_lo, hi = opt.t_hi;
    const bool lo_stable = stable(lo);
    bool hi_stable = stable(hi);
    while (hi_stable && hi < opt.t_max) {
        lo = hi;
        hi = std::min(2.0 * hi, opt.t_max);
        hi_stable = stable(hi);
    }
    OracleResult r;
    if (hi_stable) {
        r.status = MarginStatus::AlwaysStable;
        r.lo = r.hi = hi;
        r.t_cct = std::numeric_limits<double>::infinity();
        return r;
    }
    if (!lo_stable) {
        throw validation_error("brute_force_cct: invalid bracket, unstable at t_lo = " + std::to_string(opt.t_lo) +
                               " and at t_hi = " + std::to_string(hi));
    }
    const auto [a, b] = bisect_transition(stable, lo, hi, opt.tol);
    r.lo = a;
    r.hi = b;
    r.t_cct = 0.5 * (a + b);
    return r;
}

// --- reports and sweeps ---------------------------------------------------------

struct MarginReport {
    CcaResult cca;
    double t_pll = 0.0;
    std::optional<double> t_cct_estimate;
    std::optional<OracleResult> oracle;
    std::vector<std::pair<double, bool>> first_swing_stable_at;
};

struct MarginOptions {
    bool oracle = false;
    OracleOptions oracle_options;
    std::vector<double> clearing_times;
};

inline MarginReport margin_report(const SystemParams& params, const CurveCondition& fault,
                                  const MarginOptions& opt = {}) {
    const double u_pcc = std::abs(prefault_pcc_voltage(params.grid, params.op));
    const auto pre = swing_coeffs(params, CurveCondition::pre_fault(), params.op.i_cd_ref, params.op.i_cq_ref, u_pcc);
    const auto post = swing_coeffs(params, fault, params.op.i_cd_ref, params.op.i_cq_ref, u_pcc);
    MarginReport rep;
    rep.cca = solve_cca(pre, post);
    rep.t_pll = post.t_pll;
    if (rep.cca.status == MarginStatus::Interior)
        rep.t_cct_estimate = estimate_cct(rep.cca.delta_cca, rep.cca.delta_a, rep.cca.s_accel, post.t_pll, post.omega_b);
    if (opt.oracle) rep.oracle = brute_force_cct(params, fault, opt.oracle_options);
    for (double t : opt.clearing_times)
        rep.first_swing_stable_at.emplace_back(t, simulate_first_swing(params, fault, t, opt.oracle_options).stable);
    return rep;
}

struct SweepCell {
    double bandwidth_hz = 0.0;
    double k_f = 0.0;
    CcaResult cca;
    std::optional<double> t_cct_estimate;
    std::optional<OracleResult> oracle;
};

struct SweepOptions {
    double phi_f = 0.0;
    bool oracle = false;
    OracleOptions oracle_options;
    unsigned threads = 0;
};

struct SweepTable {
    std::vector<double> bandwidths;
    std::vector<double> dips;
    std::vector<SweepCell> cells;  // row-major: bandwidth outer, dip inner

    const SweepCell& at(std::size_t bw, std::size_t dip) const { return cells[bw * dips.size() + dip]; }

    /// Estimated CCT strictly decreasing along bandwidth for every dip that
    /// has an interior CCA at all bandwidths.
    bool cct_decreasing_in_bandwidth() const {
        for (std::size_t j = 0; j < dips.size(); ++j)
            for (std::size_t i = 0; i + 1 < bandwidths.size(); ++i) {
                const auto& a = at(i, j).t_cct_estimate;
                const auto& b = at(i + 1, j).t_cct_estimate;
                if (a && b && !(*b < *a)) return false;
            }
        return true;
    }

    /// max - min of the estimated CCT across dips at one bandwidth.
    double dip_spread(std::size_t bw) const {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t j = 0; j < dips.size(); ++j)
            if (const auto& t = at(bw, j).t_cct_estimate) {
                lo = std::min(lo, *t);
                hi = std::max(hi, *t);
            }
        return hi >= lo ? hi - lo : 0.0;
    }
};

/// PLL gains come from the bandwidth; everything else from `base`.
inline SweepTable cct_sweep(std::span<const double> bandwidths_hz, std::span<const double> dips,
                            const SystemParams& base, const SweepOptions& opt = {}) {
    SweepTable table{{bandwidths_hz.begin(), bandwidths_hz.end()}, {dips.begin(), dips.end()}, {}};
    table.cells.resize(bandwidths_hz.size() * dips.size());
    parallel_for(
        table.cells.size(),
        [&](std::size_t idx) {
            const std::size_t i = idx / dips.size(), j = idx % dips.size();
            SystemParams p = base;
            std::tie(p.ctrl.pll_kp, p.ctrl.pll_ki) = pll_gains_from_bandwidth(bandwidths_hz[i]);
            p.ctrl.pll_bandwidth_hz = bandwidths_hz[i];
            const auto fault = CurveCondition::post_fault(dips[j], opt.phi_f);
            auto rep = margin_report(p, fault);
            if (opt.oracle && rep.cca.status == MarginStatus::Interior)
                rep.oracle = brute_force_cct(p, fault, opt.oracle_options);
            table.cells[idx] = {bandwidths_hz[i], dips[j], rep.cca, rep.t_cct_estimate, rep.oracle};
        },
        opt.threads);
    return table;
}

}  // namespace vscstab
