#pragma once

// Time-domain scenario engine for the averaged converter model. The network
// is algebraic, the current loop is ideal, and a symmetrical fault only
// scales and shifts the PCC voltage seen by the PLL and the PQ loop.
//
// States: (Dw, delta) always; (x_d, x_q) of the PQ controller in the
// outer-loop modes.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "vscstab/common.hpp"
#include "vscstab/numerics.hpp"
#include "vscstab/params.hpp"
#include "vscstab/pcl.hpp"
#include "vscstab/pll.hpp"

namespace vscstab {

enum class ScenarioMode { ConstCurrentRefs, PqOuterLoop, QRefZero };
enum class LimiterPriority { DAxis, Proportional };

inline std::string_view to_string(ScenarioMode m) {
    switch (m) {
        case ScenarioMode::ConstCurrentRefs: return "const_current_refs";
        case ScenarioMode::PqOuterLoop: return "pq_outer_loop";
        case ScenarioMode::QRefZero: return "q_ref_zero";
    }
    return "unknown";
}

inline std::string_view to_string(LimiterPriority p) {
    return p == LimiterPriority::DAxis ? "d_axis" : "proportional";
}

struct LimiterSpec {
    double i_max = 1.1;
    LimiterPriority priority = LimiterPriority::DAxis;
    double freq_clamp = 1.1;

    bool operator==(const LimiterSpec&) const = default;
};

struct CurrentRefs {
    double i_cd = 0.0;
    double i_cq = 0.0;
    bool limited = false;
};

/// Magnitude clamp. D_AXIS keeps i_cd (itself clipped to +-i_max) and trims
/// i_cq; PROPORTIONAL scales the vector.
inline CurrentRefs limit_current(double i_cd, double i_cq, const LimiterSpec& lim) {
    const double mag = std::hypot(i_cd, i_cq);
    if (mag <= lim.i_max) return {i_cd, i_cq, false};
    if (lim.priority == LimiterPriority::Proportional) {
        const double s = lim.i_max / mag;
        return {i_cd * s, i_cq * s, true};
    }
    const double d = std::clamp(i_cd, -lim.i_max, lim.i_max);
    const double q_room = std::sqrt(std::max(lim.i_max * lim.i_max - d * d, 0.0));
    return {d, std::clamp(i_cq, -q_room, q_room), true};
}

struct Scenario {
    SystemParams params;
    FaultSpec fault;
    ScenarioMode mode = ScenarioMode::ConstCurrentRefs;
    double t_end = 5.0;
    double dt = 1e-4;
    LimiterSpec limiter;
    std::size_t record_every = 1;
    bool pll_frozen = false;  // Dw = 0 and delta held at its pre-fault value

    void validate() const {
        require_valid(params);
        if (auto r = validate_fault(fault); !r.ok()) throw validation_error("invalid fault: " + r.summary());
        if (!(dt > 0.0)) throw validation_error("scenario: dt > 0 required");
        if (!(t_end > fault.t_clear)) throw validation_error("scenario: t_end > t_clear required");
        if (!(limiter.i_max > 0.0)) throw validation_error("scenario: i_max > 0 required");
        if (!(limiter.freq_clamp > 1.0)) throw validation_error("scenario: freq_clamp > 1 required");
        if (record_every < 1) throw validation_error("scenario: record_every >= 1 required");
    }

    bool operator==(const Scenario&) const = default;
};

struct TrajectorySample {
    double t = 0.0;
    double delta = 0.0;
    double d_omega = 0.0;
    double i_cd_ref = 0.0;
    double i_cq_ref = 0.0;
    double p = 0.0;
    double q = 0.0;
    double u_pcc = 0.0;
    bool limiter_active = false;
};

struct TrajectoryEvent {
    std::string name;
    double t = 0.0;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    std::vector<TrajectoryEvent> events;
    double delta_a = 0.0;   // post-clearing operating angle
    double t_apply = 0.0;   // snapped
    double t_clear = 0.0;   // snapped
    double t_end = 0.0;
    int max_slips = 0;
    double peak_freq_pu = 1.0;      // max (1 + Dw)
    double peak_abs_d_omega = 0.0;  // max |Dw|
    double peak_delta = 0.0;
};

namespace detail {

/// Power delivered at the PoC for PCC voltage u e^{-j a} in the PLL frame.
inline PqPower poc_power(double i_cd, double i_cq, double u, double a, const GridParams& g) {
    const double i2 = i_cd * i_cd + i_cq * i_cq;
    const double ca = std::cos(a), sa = std::sin(a);
    return {u * (ca * i_cd - sa * i_cq) + g.r_sigma_t * i2, -u * (ca * i_cq + sa * i_cd) + g.omega_s * g.l_sigma_t * i2};
}

struct ScenarioEngine {
    const Scenario& sc;
    SwingCoeffs pre;   // constant-reference mode only
    SwingCoeffs post;
    double u_pcc0 = 1.0;
    CurveCondition fault_cond;

    // Algebraic part evaluated at one state in one segment (0 pre-fault, 1 fault, 2 cleared).
    struct Algebra {
        CurrentRefs refs;
        PqPower pq;
        SwingCoeffs coeffs;
    };

    const CurveCondition& condition(std::size_t segment) const {
        static const CurveCondition healthy = CurveCondition::pre_fault();
        return segment == 1 ? fault_cond : healthy;
    }

    Algebra algebra(const Vec<4>& x, std::size_t segment) const {
        const auto& p = sc.params;
        Algebra out;
        if (sc.mode == ScenarioMode::ConstCurrentRefs) {
            out.refs = limit_current(p.op.i_cd_ref, p.op.i_cq_ref, sc.limiter);
            out.coeffs = segment == 1 ? post : pre;
        } else {
            const auto& cond = condition(segment);
            const double u = cond.faulted ? cond.k_f_mag * u_pcc0 : u_pcc0;
            const double a = x[1] - (cond.faulted ? cond.phi_f : 0.0);
            // The loop measures the power of the limited current actually injected.
            auto power = [&](double d, double q) {
                const auto l = limit_current(d, q, sc.limiter);
                return poc_power(l.i_cd, l.i_cq, u, a, p.grid);
            };
            const double kp = p.ctrl.pq_kp;
            double id = 0.0, iq = 0.0;
            if (sc.mode == ScenarioMode::PqOuterLoop) {
                const PclState st{x[2], x[3]};
                try {
                    const auto o = solve_pq_outputs(st, p.op.p_ref, p.op.q_ref, kp, power);
                    id = o.i_cd;
                    iq = o.i_cq;
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::Numerical) throw;
                    std::tie(id, iq) = fixed_point_outputs(st, kp, power);
                }
            } else {
                id = solve_d_only(x[2], kp, power);
            }
            out.refs = limit_current(id, iq, sc.limiter);
            out.coeffs = swing_coeffs(p, cond, out.refs.i_cd, out.refs.i_cq, u_pcc0);
        }
        const auto& c = out.coeffs;
        out.pq = poc_power(out.refs.i_cd, out.refs.i_cq, c.u_eff, x[1] - c.phi, p.grid);
        return out;
    }

    // Damped iteration I <- I + beta (G(I) - I) with G(I) = (x_d + kp (P* - P),
    // -x_q - kp (Q* - Q)). Used when Newton stalls on the limiter kink; beta
    // is halved whenever the update stops shrinking.
    template <class PowerFn>
    std::pair<double, double> fixed_point_outputs(const PclState& st, double kp, PowerFn&& power) const {
        const auto& op = sc.params.op;
        double id = st.x_d, iq = -st.x_q;
        const double scale = 1.0 + std::abs(st.x_d) + std::abs(st.x_q);
        double beta = 1.0, prev = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 5000; ++it) {
            const auto pq = power(id, iq);
            const double gd = st.x_d + kp * (op.p_ref - pq.p) - id;
            const double gq = -st.x_q - kp * (op.q_ref - pq.q) - iq;
            const double err = std::max(std::abs(gd), std::abs(gq));
            if (!std::isfinite(err)) break;
            if (err <= 1e-12 * scale) return {id, iq};
            if (err >= prev) beta = std::max(0.5 * beta, 1e-6);
            prev = err;
            id += beta * gd;
            iq += beta * gq;
        }
        throw numerical_error("algebraic loop divergence");
    }

    // I_cd = x_d + kp (P* - P(I_cd, 0)) by Newton on the scalar residual.
    template <class PowerFn>
    double solve_d_only(double x_d, double kp, PowerFn&& power) const {
        const double p_ref = sc.params.op.p_ref;
        double id = x_d;
        for (int it = 0; it < 100; ++it) {
            const double f = x_d + kp * (p_ref - power(id, 0.0).p) - id;
            if (std::abs(f) <= 1e-12 * (1.0 + std::abs(x_d))) return id;
            const double h = 1e-7 * (1.0 + std::abs(id));
            const double dp = (power(id + h, 0.0).p - power(id - h, 0.0).p) / (2.0 * h);
            const double df = -kp * dp - 1.0;
            if (df == 0.0 || !std::isfinite(df)) break;
            id -= f / df;
        }
        throw numerical_error("algebraic loop divergence");
    }

    Vec<4> rhs(const Vec<4>& x, std::size_t segment) const {
        const auto alg = algebra(x, segment);
        Vec<4> out{0.0, 0.0, 0.0, 0.0};
        if (!sc.pll_frozen) {
            const auto d = pll_rhs(PllState{x[0], x[1]}, alg.coeffs);
            out[0] = d.d_omega;
            out[1] = d.delta;
        }
        if (sc.mode != ScenarioMode::ConstCurrentRefs) {
            const auto& op = sc.params.op;
            out[2] = sc.params.ctrl.pq_ki * (op.p_ref - alg.pq.p);
            if (sc.mode == ScenarioMode::PqOuterLoop) out[3] = sc.params.ctrl.pq_ki * (op.q_ref - alg.pq.q);
        }
        return out;
    }
};

}  // namespace detail

/// Pre-fault steady state of a scenario: current references, PLL angle and
/// the PCC voltage magnitude feeding the swing coefficients.
struct ScenarioInitialState {
    CurrentRefs refs;
    double delta_a = 0.0;
    double u_pcc0 = 1.0;
};

inline ScenarioInitialState scenario_initial_state(const Scenario& sc) {
    const auto& p = sc.params;
    ScenarioInitialState init;
    if (sc.mode == ScenarioMode::ConstCurrentRefs) {
        init.refs = limit_current(p.op.i_cd_ref, p.op.i_cq_ref, sc.limiter);
        OperatingPoint op = p.op;
        op.i_cd_ref = init.refs.i_cd;
        op.i_cq_ref = init.refs.i_cq;
        init.u_pcc0 = std::abs(prefault_pcc_voltage(p.grid, op));
        const auto c = swing_coeffs(p, CurveCondition::pre_fault(), init.refs.i_cd, init.refs.i_cq, init.u_pcc0);
        const auto eq = swing_equilibria(c);
        if (!eq) throw validation_error("scenario: no pre-fault PLL equilibrium (t_m > |U_pcc|)");
        init.delta_a = eq->delta_a;
        return init;
    }
    // Outer-loop modes: alternate between the PLL angle for the current
    // references and the references that meet the power set-points at that angle.
    double id = p.grid.u_s > 0.0 ? p.op.p_ref / p.grid.u_s : 0.0, iq = 0.0;
    for (int outer = 0; outer < 200; ++outer) {
        OperatingPoint op = p.op;
        op.i_cd_ref = id;
        op.i_cq_ref = iq;
        const double u0 = std::abs(prefault_pcc_voltage(p.grid, op));
        const auto c = swing_coeffs(p, CurveCondition::pre_fault(), id, iq, u0);
        const auto eq = swing_equilibria(c);
        if (!eq) throw validation_error("scenario: power set-point not transferable (no PLL equilibrium)");
        const double a = eq->delta_a;
        auto power = [&](double d, double q) { return detail::poc_power(d, q, u0, a, p.grid); };
        double nd = id, nq = iq;
        for (int it = 0; it < 100; ++it) {
            const auto pq = power(nd, nq);
            const double fp = pq.p - p.op.p_ref;
            const double fq = sc.mode == ScenarioMode::PqOuterLoop ? pq.q - p.op.q_ref : 0.0;
            if (std::abs(fp) < 1e-15 && std::abs(fq) < 1e-15) break;
            const double h = 1e-7;
            const auto pd = power(nd + h, nq), md = power(nd - h, nq);
            const double j00 = (pd.p - md.p) / (2 * h);
            if (sc.mode == ScenarioMode::QRefZero) {
                nd -= fp / j00;
                continue;
            }
            const auto pqq = power(nd, nq + h), mq = power(nd, nq - h);
            const double j01 = (pqq.p - mq.p) / (2 * h), j10 = (pd.q - md.q) / (2 * h), j11 = (pqq.q - mq.q) / (2 * h);
            const double det = j00 * j11 - j01 * j10;
            if (det == 0.0) throw numerical_error("scenario: singular power-flow Jacobian at initialization");
            nd -= (j11 * fp - j01 * fq) / det;
            nq -= (-j10 * fp + j00 * fq) / det;
        }
        const bool done = std::abs(nd - id) < 1e-14 && std::abs(nq - iq) < 1e-14;
        id = nd;
        iq = nq;
        init.delta_a = a;
        init.u_pcc0 = u0;
        if (done) break;
    }
    if (!std::isfinite(id) || !std::isfinite(iq)) throw numerical_error("scenario: initialization diverged");
    init.refs = {id, iq, std::hypot(id, iq) > sc.limiter.i_max};
    if (init.refs.limited) throw validation_error("scenario: pre-fault operating point exceeds the current limit");
    return init;
}

inline Trajectory run_scenario(const Scenario& sc) {
    sc.validate();
    const auto init = scenario_initial_state(sc);
    const auto& p = sc.params;

    detail::ScenarioEngine eng{sc, {}, {}, init.u_pcc0, CurveCondition::post_fault(sc.fault)};
    if (sc.mode == ScenarioMode::ConstCurrentRefs) {
        eng.pre = swing_coeffs(p, CurveCondition::pre_fault(), init.refs.i_cd, init.refs.i_cq, init.u_pcc0);
        eng.post = swing_coeffs(p, eng.fault_cond, init.refs.i_cd, init.refs.i_cq, init.u_pcc0);
    }

    const double dt = sc.dt;
    const long long n_steps = std::llround(sc.t_end / dt);
    const long long apply_step = std::clamp(snap_to_step(sc.fault.t_apply, dt), 0LL, n_steps);
    const long long clear_step = std::clamp(snap_to_step(sc.fault.t_clear, dt), apply_step, n_steps);
    const double clamp = sc.limiter.freq_clamp - 1.0;

    Trajectory traj;
    traj.delta_a = init.delta_a;
    traj.t_apply = static_cast<double>(apply_step) * dt;
    traj.t_clear = static_cast<double>(clear_step) * dt;
    traj.t_end = static_cast<double>(n_steps) * dt;
    traj.events = {{"fault_apply", traj.t_apply}, {"fault_clear", traj.t_clear}};

    Vec<4> x{0.0, init.delta_a, init.refs.i_cd, -init.refs.i_cq};
    auto segment_of = [&](long long n) -> std::size_t { return n < apply_step ? 0 : (n < clear_step ? 1 : 2); };
    auto rhs = [&eng](double, const Vec<4>& s, std::size_t seg) { return eng.rhs(s, seg); };

    auto record = [&](long long n) {
        const auto seg = segment_of(std::min(n, n_steps - 1));
        const auto alg = eng.algebra(x, n == n_steps ? 2 : seg);
        traj.samples.push_back({static_cast<double>(n) * dt, x[1], x[0], alg.refs.i_cd, alg.refs.i_cq, alg.pq.p,
                                alg.pq.q, alg.coeffs.u_eff, alg.refs.limited || std::abs(x[0]) >= clamp});
    };
    auto track = [&] {
        traj.peak_freq_pu = std::max(traj.peak_freq_pu, 1.0 + x[0]);
        traj.peak_abs_d_omega = std::max(traj.peak_abs_d_omega, std::abs(x[0]));
        traj.peak_delta = std::max(traj.peak_delta, x[1]);
        traj.max_slips = std::max(traj.max_slips, slip_count(x[1], init.delta_a));
    };

    record(0);
    track();
    for (long long n = 0; n < n_steps; ++n) {
        const auto seg = segment_of(n);
        Vec<4> next;
        try {
            next = rk4_step<4>(rhs, static_cast<double>(n) * dt, x, dt, seg);
        } catch (const Error& e) {
            std::ostringstream os;
            os << "numerical blow-up (" << e.what() << "), last good time " << static_cast<double>(n) * dt << " s";
            throw numerical_error(os.str());
        }
        next[0] = std::clamp(next[0], -clamp, clamp);
        if (!all_finite(next)) {
            std::ostringstream os;
            os << "numerical blow-up, last good time " << static_cast<double>(n) * dt << " s";
            throw numerical_error(os.str());
        }
        x = next;
        track();
        const long long k = n + 1;
        if (k == n_steps || k == apply_step || k == clear_step || k % static_cast<long long>(sc.record_every) == 0)
            record(k);
    }
    return traj;
}

enum class SyncClass { Synchronized, LostSync, Marginal };

inline std::string_view to_string(SyncClass s) {
    switch (s) {
        case SyncClass::Synchronized: return "SYNCHRONIZED";
        case SyncClass::LostSync: return "LOST_SYNC";
        case SyncClass::Marginal: return "MARGINAL";
    }
    return "UNKNOWN";
}

struct SyncVerdict {
    SyncClass cls = SyncClass::Marginal;
    int slips = 0;
};

inline SyncVerdict classify_sync(const Trajectory& traj) {
    if (traj.samples.empty()) throw validation_error("classify_sync: empty trajectory");
    if (traj.t_end < traj.t_clear + 1.0 - 1e-9)
        throw validation_error("classify_sync: trajectory must extend at least 1 s beyond fault clearing");
    int slips = traj.max_slips;
    for (const auto& s : traj.samples) slips = std::max(slips, slip_count(s.delta, traj.delta_a));
    if (slips >= 1) return {SyncClass::LostSync, slips};
    const auto& last = traj.samples.back();
    if (std::abs(last.delta - traj.delta_a) < 0.05 && std::abs(last.d_omega) < 1e-3) return {SyncClass::Synchronized, 0};
    return {SyncClass::Marginal, 0};
}

struct DeltaReport {
    double max_freq_diff = 0.0;   // max |Dw_a - Dw_b|, pu
    double max_delta_diff = 0.0;  // max |delta_a - delta_b|, rad
    double peak_freq_dev = 0.0;   // max |Dw| of the first run
    double relative_freq_diff() const { return peak_freq_dev > 0.0 ? max_freq_diff / peak_freq_dev : 0.0; }
};

inline DeltaReport compare_trajectories(const Trajectory& a, const Trajectory& b) {
    if (a.samples.size() != b.samples.size()) throw validation_error("compare: trajectories have different sampling");
    DeltaReport r;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        r.max_freq_diff = std::max(r.max_freq_diff, std::abs(a.samples[i].d_omega - b.samples[i].d_omega));
        r.max_delta_diff = std::max(r.max_delta_diff, std::abs(a.samples[i].delta - b.samples[i].delta));
        r.peak_freq_dev = std::max(r.peak_freq_dev, std::abs(a.samples[i].d_omega));
    }
    return r;
}

/// Runs `base` (PQ outer loop) and the same scenario with i_cq_ref held at 0.
inline DeltaReport compare_q_control(const Scenario& base) {
    if (base.mode != ScenarioMode::PqOuterLoop) throw validation_error("compare_q_control: base must use pq_outer_loop");
    Scenario q_off = base;
    q_off.mode = ScenarioMode::QRefZero;
    return compare_trajectories(run_scenario(base), run_scenario(q_off));
}

}  // namespace vscstab
