#pragma once

// Power-control-loop dominated model: the PLL is held at a steady angle
// theta0, the current loop is ideal (I_c = I_c^ref), and the PQ PI
// controller integrates the power errors.
//
//   P = U_s cos(theta0) I_cd - U_s sin(theta0) I_cq
//   Q = w_s L (I_cd^2 + I_cq^2) - (U_s cos(theta0) I_cq + U_s sin(theta0) I_cd)
//   dx_d/dt = ki (P* - P),  I_cd =  x_d + kp (P* - P)
//   dx_q/dt = ki (Q* - Q),  I_cq = -x_q - kp (Q* - Q)

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "vscstab/common.hpp"
#include "vscstab/numerics.hpp"
#include "vscstab/params.hpp"

namespace vscstab {

struct PqPower {
    double p = 0.0;
    double q = 0.0;
};

inline PqPower pq_from_currents(double i_cd, double i_cq, double theta0, const GridParams& grid) {
    const double uc = grid.u_s * std::cos(theta0);
    const double us = grid.u_s * std::sin(theta0);
    const double wl = grid.omega_s * grid.l_sigma();
    return {uc * i_cd - us * i_cq, wl * (i_cd * i_cd + i_cq * i_cq) - (uc * i_cq + us * i_cd)};
}

struct PclState {
    double x_d = 0.0;
    double x_q = 0.0;

    Vec<2> vec() const { return {x_d, x_q}; }
    static PclState from(const Vec<2>& v) { return {v[0], v[1]}; }
};

struct PclOutputs {
    double i_cd = 0.0;
    double i_cq = 0.0;
    double p = 0.0;
    double q = 0.0;
};

struct PclEquilibrium {
    double i_cd = 0.0;
    double i_cq = 0.0;
    double theta0 = 0.0;

    /// Integrator state that reproduces these currents with zero power error.
    PclState state() const { return {i_cd, -i_cq}; }
};

namespace detail {

/// Solves I = (x_d + kp (P* - P(I)), -x_q - kp (Q* - Q(I))) by damped Newton
/// seeded at (x_d, -x_q). Generic in the power evaluator so the scenario
/// engine can reuse it with a faulted network.
template <class PowerFn>
PclOutputs solve_pq_outputs(const PclState& s, double p_ref, double q_ref, double kp, PowerFn&& power,
                            double tol = 1e-12, int max_iter = 100) {
    double id = s.x_d;
    double iq = -s.x_q;
    auto residual = [&](double d, double q, PqPower& pq) {
        pq = power(d, q);
        return std::array<double, 2>{s.x_d + kp * (p_ref - pq.p) - d, -s.x_q - kp * (q_ref - pq.q) - q};
    };
    PqPower pq;
    if (kp == 0.0) {
        pq = power(id, iq);
        return {id, iq, pq.p, pq.q};
    }
    auto f = residual(id, iq, pq);
    auto fnorm = [](const std::array<double, 2>& r) { return std::max(std::abs(r[0]), std::abs(r[1])); };
    const double scale = 1.0 + std::abs(s.x_d) + std::abs(s.x_q);
    for (int it = 0; it < max_iter; ++it) {
        if (!std::isfinite(f[0]) || !std::isfinite(f[1])) break;
        if (fnorm(f) <= tol * scale) return {id, iq, pq.p, pq.q};
        // Jacobian by central differences of the power map; P, Q are polynomial
        // in the currents so the step is well inside double precision.
        const double h = 1e-7 * (1.0 + std::abs(id) + std::abs(iq));
        const PqPower pd1 = power(id + h, iq), pd0 = power(id - h, iq);
        const PqPower pq1 = power(id, iq + h), pq0 = power(id, iq - h);
        const double dp_dd = (pd1.p - pd0.p) / (2 * h), dp_dq = (pq1.p - pq0.p) / (2 * h);
        const double dq_dd = (pd1.q - pd0.q) / (2 * h), dq_dq = (pq1.q - pq0.q) / (2 * h);
        const double j00 = -kp * dp_dd - 1.0, j01 = -kp * dp_dq;
        const double j10 = kp * dq_dd, j11 = kp * dq_dq - 1.0;
        const double det = j00 * j11 - j01 * j10;
        if (det == 0.0 || !std::isfinite(det)) break;
        const double sd = (j11 * f[0] - j01 * f[1]) / det;
        const double sq = (-j10 * f[0] + j00 * f[1]) / det;
        double lambda = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            PqPower trial_pq;
            const double td = id - lambda * sd, tq = iq - lambda * sq;
            const auto tf = residual(td, tq, trial_pq);
            if (std::isfinite(tf[0]) && std::isfinite(tf[1]) && fnorm(tf) < fnorm(f)) {
                id = td;
                iq = tq;
                f = tf;
                pq = trial_pq;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            if (fnorm(f) <= 1e3 * tol * scale) return {id, iq, pq.p, pq.q};
            break;
        }
    }
    throw numerical_error("algebraic loop divergence");
}

}  // namespace detail

class PclModel {
public:
    PclModel(GridParams grid, double p_ref, double q_ref, double theta0, double kp, double ki)
        : grid_(grid), p_ref_(p_ref), q_ref_(q_ref), theta0_(theta0), kp_(kp), ki_(ki) {}

    PclModel(const SystemParams& params, double theta0)
        : PclModel(params.grid, params.op.p_ref, params.op.q_ref, theta0, params.ctrl.pq_kp, params.ctrl.pq_ki) {}

    const GridParams& grid() const { return grid_; }
    double theta0() const { return theta0_; }
    double kp() const { return kp_; }
    double ki() const { return ki_; }

    PqPower power(double i_cd, double i_cq) const { return pq_from_currents(i_cd, i_cq, theta0_, grid_); }

    /// Currents and powers implied by the integrator state. Throws a
    /// numerical Error ("algebraic loop divergence") if the implicit output
    /// equations have no nearby solution.
    PclOutputs outputs(const PclState& s) const {
        return detail::solve_pq_outputs(s, p_ref_, q_ref_, kp_, [this](double d, double q) { return power(d, q); });
    }

    /// Integrator state whose outputs are exactly (i_cd, i_cq); explicit
    /// because the power errors are evaluated at the given currents.
    PclState state_for_currents(double i_cd, double i_cq) const {
        const auto pq = power(i_cd, i_cq);
        return {i_cd - kp_ * (p_ref_ - pq.p), -i_cq - kp_ * (q_ref_ - pq.q)};
    }

    PclState rhs(const PclState& s) const {
        const auto o = outputs(s);
        return {ki_ * (p_ref_ - o.p), ki_ * (q_ref_ - o.q)};
    }

private:
    GridParams grid_;
    double p_ref_, q_ref_, theta0_, kp_, ki_;
};

inline PclState pcl_rhs(const PclState& s, double p_ref, double q_ref, double theta0, const GridParams& grid,
                        const ControllerParams& ctrl) {
    return PclModel(grid, p_ref, q_ref, theta0, ctrl.pq_kp, ctrl.pq_ki).rhs(s);
}

/// All real (I_cd, I_cq, theta0) with P = P*, Q = Q* and the PLL aligned to
/// the PoC voltage (w_s L I_cd = U_s sin theta0). Empty when the power
/// transfer is infeasible. For P* = Q* = 0 the branch I_cq = U_s cos(theta0)/(w_s L)
/// is a continuum of solutions and is not enumerated.
inline std::vector<PclEquilibrium> pcl_equilibria(double p_ref, double q_ref, const GridParams& grid) {
    std::vector<PclEquilibrium> out;
    const double u = grid.u_s;
    const double wl = grid.omega_s * grid.l_sigma();
    if (!(u > 0.0)) {
        if (p_ref == 0.0 && q_ref == 0.0) out.push_back({0.0, 0.0, 0.0});
        return out;
    }
    const double id_max = u / wl;

    for (int cos_sign : {+1, -1}) {
        for (int root_sign : {-1, +1}) {
            auto c_of = [&](double id) {
                const double r = u * u - (wl * id) * (wl * id);
                return cos_sign * std::sqrt(std::max(r, 0.0));
            };
            auto iq_of = [&](double id, bool& ok) {
                const double c = c_of(id);
                const double disc = c * c + 4.0 * wl * q_ref;
                ok = disc >= 0.0;
                return ok ? (c + root_sign * std::sqrt(disc)) / (2.0 * wl) : 0.0;
            };
            auto g = [&](double id, bool& ok) {
                const double iq = iq_of(id, ok);
                return id * (c_of(id) - wl * iq) - p_ref;
            };

            constexpr int samples = 4001;
            std::vector<double> xs(samples), gs(samples);
            std::vector<char> valid(samples);
            bool degenerate = true;
            for (int i = 0; i < samples; ++i) {
                xs[i] = -id_max + 2.0 * id_max * i / (samples - 1);
                bool ok = false;
                gs[i] = g(xs[i], ok);
                valid[i] = ok;
                if (ok && std::abs(gs[i]) > 1e-13) degenerate = false;
            }
            if (degenerate) continue;

            auto record = [&](double id) {
                bool ok = false;
                const double iq = iq_of(id, ok);
                if (!ok) return;
                const double th = std::atan2(wl * id, c_of(id));
                for (const auto& e : out)
                    if (std::abs(e.i_cd - id) < 1e-9 && std::abs(e.i_cq - iq) < 1e-9) return;
                out.push_back({id, iq, th});
            };
            for (int i = 0; i < samples; ++i) {
                if (!valid[i]) continue;
                if (gs[i] == 0.0) record(xs[i]);
                if (i + 1 < samples && valid[i + 1] && gs[i] * gs[i + 1] < 0.0) {
                    auto gf = [&](double id) {
                        bool ok = false;
                        return g(id, ok);
                    };
                    record(bisect(gf, xs[i], xs[i + 1], 1e-15 * (1.0 + id_max)));
                }
            }
        }
    }
    return out;
}

/// The normal operating equilibrium: PLL angle within (-pi/2, pi/2), then the
/// smallest current magnitude.
inline std::optional<PclEquilibrium> pcl_target_equilibrium(const std::vector<PclEquilibrium>& eqs) {
    std::optional<PclEquilibrium> best;
    auto key = [](const PclEquilibrium& e) {
        return std::pair{std::abs(e.theta0) >= std::numbers::pi / 2 ? 1 : 0, std::hypot(e.i_cd, e.i_cq)};
    };
    for (const auto& e : eqs)
        if (!best || key(e) < key(*best)) best = e;
    return best;
}

struct BasinOptions {
    double horizon = 5.0;
    double dt = 1e-3;
    double tol = 1e-6;
    double diverge_norm = 10.0;
    unsigned threads = 0;
};

struct BasinPoint {
    double x0 = 0.0, y0 = 0.0;
    BasinClass cls = BasinClass::Undecided;
    double xf = 0.0, yf = 0.0;
};

struct BasinMap {
    std::vector<BasinPoint> points;

    double fraction(BasinClass c) const {
        if (points.empty()) return 0.0;
        const auto n = std::count_if(points.begin(), points.end(), [c](const BasinPoint& p) { return p.cls == c; });
        return static_cast<double>(n) / static_cast<double>(points.size());
    }
};

/// n x n grid over [lo, hi]^2 in (x_d, x_q), row-major in x_d.
inline std::vector<PclState> pcl_state_grid(std::size_t n, double lo, double hi) {
    std::vector<PclState> g;
    g.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double a = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
            const double b = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n - 1);
            g.push_back({a, b});
        }
    return g;
}

/// Integrates the PCL model from one initial state.
inline Solution<2> simulate_pcl(const PclModel& model, const PclState& x0, const BasinOptions& opt,
                                std::size_t record_every = 1) {
    IntegratorConfig cfg{opt.dt, opt.horizon, record_every, opt.diverge_norm};
    auto rhs = [&model](double, const Vec<2>& x) { return model.rhs(PclState::from(x)).vec(); };
    try {
        return rk4_integrate<2>(rhs, x0.vec(), cfg);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numerical) throw;
    }
    // Algebraic loop lost its solution somewhere along the path; rerun
    // step-wise to keep the partial trajectory.
    Solution<2> sol;
    Vec<2> x = x0.vec();
    sol.t.push_back(0.0);
    sol.x.push_back(x);
    const long long n = cfg.steps();
    for (long long k = 0; k < n; ++k) {
        try {
            x = rk4_step<2>(rhs, static_cast<double>(k) * cfg.dt, x, cfg.dt);
        } catch (const Error&) {
            sol.blew_up = true;
            sol.last_good_t = static_cast<double>(k) * cfg.dt;
            sol.t.push_back(sol.last_good_t);
            sol.x.push_back(x);
            return sol;
        }
        if ((k + 1) % static_cast<long long>(record_every) == 0 || k + 1 == n) {
            sol.t.push_back(static_cast<double>(k + 1) * cfg.dt);
            sol.x.push_back(x);
        }
    }
    return sol;
}

inline BasinClass classify_pcl_point(const PclModel& model, const PclState& target, const PclState& x0,
                                     const BasinOptions& opt, PclState* final_state = nullptr) {
    IntegratorConfig cfg{opt.dt, opt.horizon, 1u << 30, opt.diverge_norm};
    auto rhs = [&model](double, const Vec<2>& x) { return model.rhs(PclState::from(x)).vec(); };
    Vec<2> x = x0.vec();
    BasinClass cls = BasinClass::Undecided;
    try {
        StepHooks<2> hooks;
        hooks.stop = [&](double, const Vec<2>& s) {
            const double dist = std::hypot(s[0] - target.x_d, s[1] - target.x_q);
            return dist < 1e-3 * opt.tol;
        };
        auto sol = rk4_integrate<2>(rhs, x, cfg, {}, hooks);
        x = sol.final_state();
        if (sol.blew_up) cls = BasinClass::Diverged;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numerical) throw;
        cls = BasinClass::Diverged;
        x = {std::nan(""), std::nan("")};
    }
    if (cls != BasinClass::Diverged) {
        double resid = 0.0;
        try {
            resid = norm(rhs(0.0, x));
        } catch (const Error&) {
            resid = std::numeric_limits<double>::infinity();
        }
        const double dist = std::hypot(x[0] - target.x_d, x[1] - target.x_q);
        if (resid < opt.tol && dist < opt.tol)
            cls = BasinClass::ConvergedToTarget;
        else if (resid < opt.tol)
            cls = BasinClass::ConvergedElsewhere;
        else
            cls = BasinClass::Undecided;
    }
    if (final_state) *final_state = PclState::from(x);
    return cls;
}

inline BasinMap classify_basin(const PclModel& model, const PclState& target, std::span<const PclState> initials,
                               const BasinOptions& opt = {}) {
    BasinMap map;
    map.points.resize(initials.size());
    parallel_for(
        initials.size(),
        [&](std::size_t i) {
            PclState fin;
            const auto cls = classify_pcl_point(model, target, initials[i], opt, &fin);
            map.points[i] = {initials[i].x_d, initials[i].x_q, cls, fin.x_d, fin.x_q};
        },
        opt.threads);
    return map;
}

/// Initial condition given as converter currents (the portrait axes).
struct CurrentPoint {
    double i_cd = 0.0;
    double i_cq = 0.0;
};

/// n x n grid over [lo, hi]^2 in (i_cd, i_cq), row-major in i_cd.
inline std::vector<CurrentPoint> pcl_current_grid(std::size_t n, double lo, double hi) {
    std::vector<CurrentPoint> out;
    for (const auto& s : pcl_state_grid(n, lo, hi)) out.push_back({s.x_d, s.x_q});
    return out;
}

/// Points of an n x n grid over [-r, r]^2 that lie on the disk |I| <= r.
inline std::vector<CurrentPoint> pcl_current_disk(std::size_t n, double radius) {
    std::vector<CurrentPoint> out;
    for (const auto& c : pcl_current_grid(n, -radius, radius))
        if (std::hypot(c.i_cd, c.i_cq) <= radius) out.push_back(c);
    return out;
}

/// Basin classification with initial and final points in current coordinates.
/// Diverged points report NaN final currents.
inline BasinMap classify_current_basin(const PclModel& model, const PclEquilibrium& target,
                                       std::span<const CurrentPoint> initials, const BasinOptions& opt = {}) {
    BasinMap map;
    map.points.resize(initials.size());
    const PclState target_state = target.state();
    parallel_for(
        initials.size(),
        [&](std::size_t i) {
            const auto& c = initials[i];
            PclState fin;
            const auto cls = classify_pcl_point(model, target_state, model.state_for_currents(c.i_cd, c.i_cq), opt, &fin);
            double fd = std::numeric_limits<double>::quiet_NaN(), fq = fd;
            if (cls != BasinClass::Diverged) {
                try {
                    const auto o = model.outputs(fin);
                    fd = o.i_cd;
                    fq = o.i_cq;
                } catch (const Error&) {
                }
            }
            map.points[i] = {c.i_cd, c.i_cq, cls, fd, fq};
        },
        opt.threads);
    return map;
}

}  // namespace vscstab
