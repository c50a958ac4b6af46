#pragma once

// Per-unit parameter set of a grid-synchronized voltage-source converter:
// base values, grid Thevenin equivalent, PLL / PQ controller gains, the
// operating point and the symmetrical fault description.

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vscstab/common.hpp"

namespace vscstab {

using Complex = std::complex<double>;

struct PerUnitBase {
    double s_base = 2.0e6;  // VA
    double u_base = 690.0;  // V, line-to-line
    double f_base = 50.0;   // Hz

    double omega_b() const { return 2.0 * std::numbers::pi * f_base; }

    bool operator==(const PerUnitBase&) const = default;
};

/// Switching-level hardware data. Stored so configs mirror the rating table;
/// none of it enters the averaged models.
struct HardwareParams {
    double v_dc = 1200.0;  // V
    double f_sw = 2400.0;  // Hz
    double l_f = 7.6e-5;   // H
    double l_t = 0.1;      // pu, T1 + T2 leakage

    bool operator==(const HardwareParams&) const = default;
};

struct GridParams {
    double scr = 4.0;
    double l_sigma_t = 0.25;  // PoC -> PCC line lump
    double r_sigma_t = 0.0;
    Complex z_s{0.0, 0.0};    // source impedance behind the PCC
    double u_s = 1.0;
    double omega_s = 1.0;

    /// Lumped inductance seen from the PoC; always 1/SCR.
    double l_sigma() const { return 1.0 / scr; }

    Complex z_line() const { return {r_sigma_t, omega_s * l_sigma_t}; }

    bool operator==(const GridParams&) const = default;
};

struct ControllerParams {
    double pll_kp = 20.0;
    double pll_ki = 800.0;
    double pq_kp = 0.1;
    double pq_ki = 20.0;
    std::optional<double> pll_bandwidth_hz;
    std::optional<double> pq_bandwidth_hz;

    bool operator==(const ControllerParams&) const = default;
};

struct OperatingPoint {
    double p_ref = 0.5;
    double q_ref = 0.0;
    double i_cd_ref = 1.0;
    double i_cq_ref = 0.0;
    double i_max = 1.1;
    double freq_limit = 1.1;

    bool operator==(const OperatingPoint&) const = default;
};

struct SystemParams {
    PerUnitBase base;
    HardwareParams hardware;
    GridParams grid;
    ControllerParams ctrl;
    OperatingPoint op;

    bool operator==(const SystemParams&) const = default;
};

/// Polar form of the retained-voltage factor Z_f / (Z_f + Z_s).
struct FaultFactor {
    double k_f_mag = 1.0;
    double phi_f = 0.0;
};

inline FaultFactor fault_factor(Complex z_f, Complex z_s) {
    const Complex denom = z_f + z_s;
    if (std::abs(denom) == 0.0 || !std::isfinite(std::abs(denom)))
        throw validation_error("ill-posed fault circuit: z_f + z_s = 0");
    const Complex k = z_f / denom;
    if (std::abs(k) == 0.0) return {0.0, 0.0};
    return {std::abs(k), std::arg(k)};
}

struct FaultSpec {
    std::optional<Complex> z_f;  // empty when the retained voltage was given directly
    double k_f_mag = 1.0;
    double phi_f = 0.0;
    double t_apply = 0.0;
    double t_clear = 0.1;

    static FaultSpec from_impedance(Complex z_f, Complex z_s, double t_apply, double t_clear) {
        const auto k = fault_factor(z_f, z_s);
        return {z_f, k.k_f_mag, k.phi_f, t_apply, t_clear};
    }

    static FaultSpec from_retained_voltage(double k_f_mag, double phi_f, double t_apply, double t_clear) {
        return {std::nullopt, k_f_mag, phi_f, t_apply, t_clear};
    }

    double duration() const { return t_clear - t_apply; }

    bool operator==(const FaultSpec&) const = default;
};

struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }

    std::string summary() const {
        std::string s;
        for (const auto& v : violations) {
            if (!s.empty()) s += "; ";
            s += v;
        }
        return s;
    }
};

inline ValidationReport validate_params(const SystemParams& p) {
    ValidationReport r;
    auto require = [&r](bool cond, std::string what) {
        if (!cond) r.violations.push_back(std::move(what));
    };
    auto finite = [](double x) { return std::isfinite(x); };

    require(p.base.s_base > 0.0, "s_base > 0");
    require(p.base.u_base > 0.0, "u_base > 0");
    require(p.base.f_base > 0.0, "f_base > 0");

    const auto& g = p.grid;
    require(g.scr > 0.0 && finite(g.scr), "scr > 0");
    require(g.u_s >= 0.0 && finite(g.u_s), "u_s >= 0");
    require(g.omega_s > 0.0 && finite(g.omega_s), "omega_s > 0");
    require(g.l_sigma_t >= 0.0, "l_sigma_t >= 0");
    if (g.scr > 0.0)
        require(g.l_sigma_t <= g.l_sigma(), "l_sigma >= l_sigma_t (line lump exceeds 1/scr)");
    require(g.r_sigma_t >= 0.0, "r_sigma_t >= 0");
    require(finite(g.z_s.real()) && finite(g.z_s.imag()), "z_s finite");

    const auto& c = p.ctrl;
    require(c.pll_kp >= 0.0, "pll_kp >= 0");
    require(c.pll_ki > 0.0, "pll_ki > 0");
    require(c.pq_kp >= 0.0, "pq_kp >= 0");
    require(c.pq_ki > 0.0, "pq_ki > 0");

    const auto& o = p.op;
    require(o.i_max > 0.0, "i_max > 0");
    require(o.freq_limit > 1.0, "freq_limit > 1");
    require(finite(o.p_ref) && finite(o.q_ref) && finite(o.i_cd_ref) && finite(o.i_cq_ref),
            "operating point finite");
    return r;
}

inline ValidationReport validate_fault(const FaultSpec& f) {
    ValidationReport r;
    if (!(f.t_clear > f.t_apply)) r.violations.emplace_back("t_clear > t_apply");
    if (!(f.k_f_mag >= 0.0)) r.violations.emplace_back("k_f_mag >= 0");
    if (!std::isfinite(f.phi_f)) r.violations.emplace_back("phi_f finite");
    return r;
}

inline void require_valid(const SystemParams& p) {
    if (auto r = validate_params(p); !r.ok()) throw validation_error("invalid parameters: " + r.summary());
}

/// PLL PI gains for a given bandwidth: kp = f, ki = 2 f^2 (20 Hz -> 20, 800).
inline std::pair<double, double> pll_gains_from_bandwidth(double bandwidth_hz) {
    return {bandwidth_hz, 2.0 * bandwidth_hz * bandwidth_hz};
}

/// PQ integral gain placing the first-order closed power loop
/// ki*U/(1 + U*kp) at 2*pi*f for a given proportional gain.
inline double pq_ki_from_bandwidth(double bandwidth_hz, double pq_kp, double u = 1.0) {
    return 2.0 * std::numbers::pi * bandwidth_hz * (1.0 + u * pq_kp) / u;
}

}  // namespace vscstab
