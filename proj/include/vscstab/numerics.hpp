#pragma once

// Shared numerical kernels: fixed-step classical RK4 with events snapped to
// the step grid, bracketing root finders, an adaptive quadrature used to
// cross-check closed-form integrals, and a deterministic parallel loop.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "vscstab/common.hpp"

namespace vscstab {

template <std::size_t N>
using Vec = std::array<double, N>;

template <std::size_t N>
double norm(const Vec<N>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

template <std::size_t N>
bool all_finite(const Vec<N>& x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

struct IntegratorConfig {
    double dt = 1e-4;
    double t_end = 1.0;
    std::size_t record_every = 1;
    double blowup_norm = 1e6;

    void validate() const {
        if (!(dt > 0.0)) throw validation_error("integrator: dt > 0 required");
        if (record_every < 1) throw validation_error("integrator: record_every >= 1 required");
        if (!(blowup_norm > 0.0)) throw validation_error("integrator: blowup_norm > 0 required");
        if (!(t_end >= 0.0)) throw validation_error("integrator: t_end >= 0 required");
    }

    long long steps() const { return std::llround(t_end / dt); }
};

/// Index of the grid point nearest to time t.
inline long long snap_to_step(double t, double dt) { return std::llround(t / dt); }

/// A discrete state map applied at (the grid point nearest to) `time`.
template <std::size_t N>
struct Event {
    double time = 0.0;
    std::function<Vec<N>(const Vec<N>&)> map;
};

/// Optional per-step hooks: `project` is applied to the state after every
/// step (e.g. a saturation), `stop` ends the run early when it returns true.
template <std::size_t N>
struct StepHooks {
    std::function<Vec<N>(const Vec<N>&)> project;
    std::function<bool(double, const Vec<N>&)> stop;
};

template <std::size_t N>
struct Solution {
    std::vector<double> t;
    std::vector<Vec<N>> x;
    std::vector<double> event_times;  // snapped
    bool blew_up = false;
    bool stopped_early = false;
    double last_good_t = 0.0;

    const Vec<N>& final_state() const { return x.back(); }
};

namespace detail {

template <std::size_t N, class Rhs>
Vec<N> call_rhs(Rhs& f, double t, const Vec<N>& x, std::size_t segment) {
    if constexpr (std::invocable<Rhs&, double, const Vec<N>&, std::size_t>)
        return f(t, x, segment);
    else
        return f(t, x);
}

}  // namespace detail

/// One classical RK4 step. The right-hand side may take (t, x) or
/// (t, x, segment); the segment index is constant across the four stages.
template <std::size_t N, class Rhs>
Vec<N> rk4_step(Rhs& f, double t, const Vec<N>& x, double dt, std::size_t segment = 0) {
    Vec<N> tmp;
    const Vec<N> k1 = detail::call_rhs<N>(f, t, x, segment);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    const Vec<N> k2 = detail::call_rhs<N>(f, t + 0.5 * dt, tmp, segment);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    const Vec<N> k3 = detail::call_rhs<N>(f, t + 0.5 * dt, tmp, segment);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + dt * k3[i];
    const Vec<N> k4 = detail::call_rhs<N>(f, t + dt, tmp, segment);
    Vec<N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

/// Fixed-step RK4 from t = 0 to cfg.t_end. Event i is applied at step
/// round(time_i/dt) before that step is taken, and the segment index passed
/// to the right-hand side counts the events already applied. Time stamps are
/// n*dt, never accumulated.
template <std::size_t N, class Rhs>
Solution<N> rk4_integrate(Rhs&& f, const Vec<N>& x0, const IntegratorConfig& cfg,
                          const std::vector<Event<N>>& events = {}, const StepHooks<N>& hooks = {}) {
    cfg.validate();
    const long long n_steps = cfg.steps();
    std::vector<long long> event_steps;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (i > 0 && events[i].time < events[i - 1].time) throw validation_error("integrator: events must be sorted");
        event_steps.push_back(std::clamp(snap_to_step(events[i].time, cfg.dt), 0LL, n_steps));
    }

    Solution<N> sol;
    Vec<N> x = x0;
    if (!all_finite(x)) {
        sol.blew_up = true;
        return sol;
    }
    sol.t.push_back(0.0);
    sol.x.push_back(x);

    std::size_t next_event = 0;
    auto apply_events = [&](long long n) {
        while (next_event < events.size() && event_steps[next_event] == n) {
            if (events[next_event].map) x = events[next_event].map(x);
            sol.event_times.push_back(static_cast<double>(n) * cfg.dt);
            ++next_event;
        }
    };

    for (long long n = 0; n < n_steps; ++n) {
        apply_events(n);
        const double t = static_cast<double>(n) * cfg.dt;
        Vec<N> next = rk4_step<N>(f, t, x, cfg.dt, next_event);
        if (hooks.project) next = hooks.project(next);
        const double t_next = static_cast<double>(n + 1) * cfg.dt;
        if (!all_finite(next) || norm(next) > cfg.blowup_norm) {
            sol.blew_up = true;
            sol.last_good_t = t;
            if (sol.t.back() != t) {
                sol.t.push_back(t);
                sol.x.push_back(x);
            }
            return sol;
        }
        x = next;
        sol.last_good_t = t_next;
        const bool last = (n + 1 == n_steps);
        const bool stop = hooks.stop && hooks.stop(t_next, x);
        if (last || stop || (n + 1) % static_cast<long long>(cfg.record_every) == 0) {
            sol.t.push_back(t_next);
            sol.x.push_back(x);
        }
        if (stop) {
            sol.stopped_early = true;
            return sol;
        }
    }
    apply_events(n_steps);
    if (!sol.x.empty()) sol.x.back() = x;
    return sol;
}

/// Bisection on a sign change. Returns the bracket midpoint once the bracket
/// is no wider than tol.
template <class F>
double bisect(F&& f, double lo, double hi, double tol) {
    if (!(hi > lo)) throw validation_error("bisect: empty interval");
    double f_lo = f(lo);
    const double f_hi = f(hi);
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if (!(f_lo * f_hi < 0.0)) {
        std::ostringstream os;
        os << "bisect: invalid bracket, f(" << lo << ")=" << f_lo << ", f(" << hi << ")=" << f_hi;
        throw validation_error(os.str());
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = f(mid);
        if (f_mid == 0.0) return mid;
        if ((f_mid < 0.0) == (f_lo < 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Bisection on a boolean predicate with pred(lo) != pred(hi). Returns the
/// final bracket, with `first` on the side of pred(lo).
template <class Pred>
std::pair<double, double> bisect_transition(Pred&& pred, double lo, double hi, double tol) {
    const bool at_lo = pred(lo);
    if (pred(hi) == at_lo) throw validation_error("bisect_transition: predicate does not change over bracket");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (pred(mid) == at_lo)
            lo = mid;
        else
            hi = mid;
    }
    return {lo, hi};
}

/// Adaptive Gauss-Kronrod quadrature. Test oracle for the closed-form areas.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double tol = 1e-13) {
    if (a == b) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, tol);
}

/// Runs body(i) for i in [0, n). Each index must be independent; results
/// are whatever body writes into caller-owned, index-addressed storage.
template <class Body>
void parallel_for(std::size_t n, Body&& body, unsigned threads = 0) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex m;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += threads) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(m);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace vscstab
