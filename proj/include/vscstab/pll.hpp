#pragma once

// PLL-dominated swing model with constant current references:
//
//   T_pll dDw/dt = -D(delta) Dw + T_m - T_e(delta)
//   d delta/dt   = w_b Dw
//
//   T_pll    = (w_b - kp L I_cd) / ki
//   D(delta) = (kp/ki) (u_eff cos(delta - phi) w_b - L I_cd)
//   T_m      = w_s L_T I_cd + R_T I_cq
//   T_e      = u_eff sin(delta - phi)
//
// delta is measured from the PCC voltage. Before the fault u_eff = |U_pcc^0-|
// and phi = 0; while the fault is on u_eff = k_f |U_pcc^0-| and phi = phi_f.
// delta is never wrapped so pole slips stay visible.

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "vscstab/common.hpp"
#include "vscstab/numerics.hpp"
#include "vscstab/params.hpp"

namespace vscstab {

struct PllState {
    double d_omega = 0.0;
    double delta = 0.0;

    Vec<2> vec() const { return {d_omega, delta}; }
    static PllState from(const Vec<2>& v) { return {v[0], v[1]}; }
};

/// Which T_e curve is active: the healthy grid or a retained-voltage fault.
struct CurveCondition {
    bool faulted = false;
    double k_f_mag = 1.0;
    double phi_f = 0.0;

    static CurveCondition pre_fault() { return {}; }
    static CurveCondition post_fault(double k_f_mag, double phi_f) { return {true, k_f_mag, phi_f}; }
    static CurveCondition post_fault(const FaultSpec& f) { return post_fault(f.k_f_mag, f.phi_f); }
};

struct SwingCoeffs {
    double t_pll = 0.0;
    double t_m = 0.0;
    double u_eff = 1.0;
    double phi = 0.0;
    double kp_over_ki = 0.0;
    double omega_b = 2.0 * std::numbers::pi * 50.0;
    double damping_offset = 0.0;  // L_sigma * I_cd^ref

    double t_e(double delta) const { return u_eff * std::sin(delta - phi); }
};

/// Steady PCC voltage in the PLL frame, U_s^pll + I_c Z_s, with the PLL
/// angle chosen so the PoC voltage has no q component.
inline Complex prefault_pcc_voltage(const GridParams& grid, const OperatingPoint& op) {
    const Complex i_c{op.i_cd_ref, op.i_cq_ref};
    const Complex z_total = grid.z_line() + grid.z_s;
    const double sin_theta = grid.u_s > 0.0 ? (i_c * z_total).imag() / grid.u_s : 0.0;
    if (std::abs(sin_theta) > 1.0)
        throw validation_error("no steady PLL angle: the injected current drops more than U_s across the network");
    const double cos_theta = std::sqrt(1.0 - sin_theta * sin_theta);
    const Complex u_s_pll{grid.u_s * cos_theta, -grid.u_s * sin_theta};
    return u_s_pll + i_c * grid.z_s;
}

/// Swing coefficients for explicit current references and a given pre-fault
/// PCC voltage magnitude.
inline SwingCoeffs swing_coeffs(const SystemParams& p, const CurveCondition& cond, double i_cd, double i_cq,
                                double u_pcc_prefault) {
    const auto& g = p.grid;
    const double omega_b = p.base.omega_b();
    SwingCoeffs c;
    c.omega_b = omega_b;
    c.t_pll = (omega_b - p.ctrl.pll_kp * g.l_sigma() * i_cd) / p.ctrl.pll_ki;
    if (!(c.t_pll > 0.0)) throw validation_error("non-physical inertia analog: t_pll <= 0");
    c.t_m = g.omega_s * g.l_sigma_t * i_cd + g.r_sigma_t * i_cq;
    c.kp_over_ki = p.ctrl.pll_kp / p.ctrl.pll_ki;
    c.damping_offset = g.l_sigma() * i_cd;
    if (cond.faulted) {
        c.u_eff = cond.k_f_mag * u_pcc_prefault;
        c.phi = cond.phi_f;
    } else {
        c.u_eff = u_pcc_prefault;
        c.phi = 0.0;
    }
    return c;
}

inline SwingCoeffs swing_coeffs(const SystemParams& p, const CurveCondition& cond) {
    const double u_pcc = std::abs(prefault_pcc_voltage(p.grid, p.op));
    return swing_coeffs(p, cond, p.op.i_cd_ref, p.op.i_cq_ref, u_pcc);
}

/// Angle-dependent damping of the active curve.
inline double damping(double delta, const SwingCoeffs& c) {
    return c.kp_over_ki * (c.u_eff * std::cos(delta - c.phi) * c.omega_b - c.damping_offset);
}

enum class DampingMode { Constant, AngleDependent };

struct DampingSpec {
    DampingMode mode = DampingMode::AngleDependent;
    double d0 = 0.0;

    static DampingSpec constant(double d0) { return {DampingMode::Constant, d0}; }
    static DampingSpec angle_dependent() { return {}; }
};

inline PllState pll_rhs(const PllState& s, const SwingCoeffs& c, const DampingSpec& d = {}) {
    const double dpll = d.mode == DampingMode::Constant ? d.d0 : damping(s.delta, c);
    return {(-dpll * s.d_omega + c.t_m - c.t_e(s.delta)) / c.t_pll, c.omega_b * s.d_omega};
}

/// Stable (A) and unstable (B) equilibrium angles of the principal period.
struct SwingEquilibria {
    double delta_a = 0.0;
    double delta_b = 0.0;
};

inline std::optional<SwingEquilibria> swing_equilibria(const SwingCoeffs& c) {
    if (!(c.u_eff > 0.0) || std::abs(c.t_m) > c.u_eff) return std::nullopt;
    const double a = std::asin(c.t_m / c.u_eff);
    return SwingEquilibria{c.phi + a, c.phi + std::numbers::pi - a};
}

/// Number of full 2*pi excursions of delta away from delta_a.
inline int slip_count(double delta, double delta_a) {
    return static_cast<int>(std::floor(std::abs(delta - delta_a) / (2.0 * std::numbers::pi)));
}

struct PllPortraitOptions {
    double horizon = 5.0;
    double dt = 1e-4;
    double tol = 1e-3;
    double diverge_d_omega = 1.0;  // |Dw| beyond this (pu) counts as runaway
    unsigned threads = 0;
};

struct PllPortraitPoint {
    double d_omega0 = 0.0, delta0 = 0.0;
    BasinClass cls = BasinClass::Undecided;
    int slips = 0;
    double d_omega_f = 0.0, delta_f = 0.0;
};

inline PllPortraitPoint classify_pll_point(const SwingCoeffs& c, const DampingSpec& d, const PllState& x0,
                                           const PllPortraitOptions& opt) {
    const auto eq = swing_equilibria(c);
    if (!eq) throw validation_error("pll portrait: no equilibrium (t_m exceeds u_eff)");
    const double delta_a = eq->delta_a;
    IntegratorConfig cfg{opt.dt, opt.horizon, 1u << 30, 1e9};
    auto rhs = [&](double, const Vec<2>& x) { return pll_rhs(PllState::from(x), c, d).vec(); };
    int max_slips = 0;
    StepHooks<2> hooks;
    hooks.stop = [&](double, const Vec<2>& x) {
        max_slips = std::max(max_slips, slip_count(x[1], delta_a));
        return std::abs(x[0]) > opt.diverge_d_omega;
    };
    const auto sol = rk4_integrate<2>(rhs, x0.vec(), cfg, {}, hooks);
    const auto xf = sol.final_state();
    PllPortraitPoint pt{x0.d_omega, x0.delta, BasinClass::Undecided, max_slips, xf[0], xf[1]};
    if (sol.blew_up || sol.stopped_early) {
        pt.cls = BasinClass::Diverged;
        return pt;
    }
    const double two_pi = 2.0 * std::numbers::pi;
    const double k = std::round((xf[1] - delta_a) / two_pi);
    const bool settled = std::abs(xf[0]) < opt.tol && std::abs(xf[1] - (delta_a + k * two_pi)) < opt.tol;
    if (settled) {
        pt.cls = k == 0.0 ? BasinClass::ConvergedToTarget : BasinClass::ConvergedElsewhere;
        pt.slips = static_cast<int>(std::abs(k));
    } else if (max_slips > 0 && std::abs(xf[0]) > opt.tol) {
        pt.cls = BasinClass::Diverged;  // still rotating at the horizon
    }
    return pt;
}

inline std::vector<PllPortraitPoint> classify_pll_portrait(const SwingCoeffs& c, const DampingSpec& d,
                                                           std::span<const PllState> initials,
                                                           const PllPortraitOptions& opt = {}) {
    std::vector<PllPortraitPoint> out(initials.size());
    parallel_for(
        initials.size(), [&](std::size_t i) { out[i] = classify_pll_point(c, d, initials[i], opt); }, opt.threads);
    return out;
}

}  // namespace vscstab
