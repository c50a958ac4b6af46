#include "catch_amalgamated.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "vscstab/eap.hpp"

using namespace vscstab;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

SystemParams reference() { return SystemParams{}; }

SystemParams sweep_family() {
    SystemParams p;
    p.grid.l_sigma_t = 0.2;
    p.grid.z_s = {0.0, 0.05};
    return p;
}

SwingCoeffs pre_of(const SystemParams& p) { return swing_coeffs(p, CurveCondition::pre_fault()); }
SwingCoeffs post_of(const SystemParams& p, double k, double phi = 0.0) {
    return swing_coeffs(p, CurveCondition::post_fault(k, phi), p.op.i_cd_ref, p.op.i_cq_ref,
                        std::abs(prefault_pcc_voltage(p.grid, p.op)));
}

}  // namespace

TEST_CASE("area over an empty interval is zero", "[eap][area]") {
    const auto c = pre_of(reference());
    REQUIRE(area(1.3, 1.3, c) == 0.0);
}

TEST_CASE("area of a bare sine over half a period", "[eap][area]") {
    SwingCoeffs c;
    c.t_m = 0.0;
    c.u_eff = 0.7;
    REQUIRE(area(0.0, pi, c) == Approx(-2.0 * 0.7).epsilon(1e-15));
}

TEST_CASE("closed-form areas match adaptive quadrature", "[eap][area][property]") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> d(-pi, 2.0 * pi), u(0.0, 1.2), tm(0.0, 0.5), ph(-pi / 2, 0.0);
    for (int i = 0; i < 1000; ++i) {
        SwingCoeffs c;
        c.u_eff = u(rng);
        c.t_m = tm(rng);
        c.phi = ph(rng);
        double a = d(rng), b = d(rng);
        if (a > b) std::swap(a, b);
        const double q = integrate_adaptive([&](double x) { return c.t_m - c.t_e(x); }, a, b);
        REQUIRE(std::abs(area(a, b, c) - q) < 1e-10);
    }
}

TEST_CASE("reference configuration margin", "[eap][cca]") {
    const auto p = reference();
    const auto pre = pre_of(p), post = post_of(p, 0.2);
    const auto r = solve_cca(pre, post);
    REQUIRE(r.status == MarginStatus::Interior);
    REQUIRE(r.delta_a == Approx(std::asin(0.25)).epsilon(1e-14));
    REQUIRE(r.delta_b == Approx(pi - std::asin(0.25)).epsilon(1e-14));
    REQUIRE(r.delta_a < r.delta_cca);
    REQUIRE(r.delta_cca < r.delta_b);
    REQUIRE(std::abs(r.residual) < 1e-10);
    REQUIRE(std::abs(r.s_accel - r.s_decel_max) < 1e-9);
    // frozen from the bisection above, cross-checked against the oracle below
    REQUIRE(r.delta_cca == Approx(2.25048).margin(1e-5));
    REQUIRE(r.s_accel == Approx(0.18009).margin(1e-5));

    const auto t = estimate_cct(r.delta_cca, r.delta_a, r.s_accel, post.t_pll, post.omega_b);
    REQUIRE(t);
    REQUIRE(*t == Approx(0.17513).margin(1e-5));
    REQUIRE(*t > 0.135);
    REQUIRE(*t < 0.225);
}

TEST_CASE("bolted fault CCA against the symbolic residual", "[eap][cca]") {
    const auto p = reference();
    const auto pre = pre_of(p), post = post_of(p, 0.0);
    const auto r = solve_cca(pre, post);
    REQUIRE(r.status == MarginStatus::Interior);
    // S_I = t_m (delta - delta_A); the residual vanishes where
    // cos delta = cos delta_B + t_m (delta_B - delta_A) / u
    const double da = std::asin(0.25), db = pi - da;
    const double closed = std::acos(std::cos(db) + pre.t_m * (db - da) / pre.u_eff);
    REQUIRE(r.delta_cca == Approx(closed).margin(1e-9));
    REQUIRE(r.s_accel == Approx(pre.t_m * (closed - da)).margin(1e-9));
}

TEST_CASE("no dip means no acceleration area", "[eap][cca]") {
    const auto p = reference();
    REQUIRE(solve_cca(pre_of(p), post_of(p, 1.0)).status == MarginStatus::AlwaysStable);
    for (double tm : {0.0, 0.1, 0.5, 0.95}) {
        SwingCoeffs c;
        c.t_m = tm;
        REQUIRE(solve_cca(c, c).status == MarginStatus::AlwaysStable);
    }
}

TEST_CASE("shallow dip on the sweep family is always stable", "[eap][cca]") {
    const auto p = sweep_family();
    const auto r = solve_cca(pre_of(p), post_of(p, 0.3));
    REQUIRE(r.status == MarginStatus::AlwaysStable);
}

TEST_CASE("missing operating point gives no margin", "[eap][cca]") {
    SwingCoeffs c;
    c.t_m = 1.2;
    c.u_eff = 1.0;
    SwingCoeffs post = c;
    post.u_eff = 0.2;
    const auto r = solve_cca(c, post);
    REQUIRE(r.status == MarginStatus::NoMargin);
    REQUIRE(std::isnan(r.delta_cca));
}

TEST_CASE("CCA residual is monotone when the fault curve lies below the healthy one", "[eap][property]") {
    const auto p = reference();
    const auto pre = pre_of(p);
    for (double k : {0.0, 0.2, 0.5, 0.8}) {
        const auto post = post_of(p, k);
        const double da = std::asin(0.25), db = pi - da;
        double prev = -1e9;
        for (int i = 0; i <= 1000; ++i) {
            const double d = da + (db - da) * i / 1000.0;
            const double r = cca_residual(d, da, db, pre, post);
            REQUIRE(r >= prev - 1e-15);
            prev = r;
        }
    }
}

TEST_CASE("clearing-time estimate limits", "[eap][cct]") {
    REQUIRE_FALSE(estimate_cct(2.0, 0.25, 0.0, 0.386, 314.0));
    REQUIRE_FALSE(estimate_cct(2.0, 0.25, -0.1, 0.386, 314.0));
    REQUIRE(*estimate_cct(0.25, 0.25, 0.18, 0.386, 314.0) == 0.0);
    double prev = -1.0;
    for (double d = 0.3; d < 3.0; d += 0.1) {
        const double t = *estimate_cct(d, 0.25, 0.18, 0.386, 314.0);
        REQUIRE(t > prev);
        prev = t;
    }
    // dimensional check by hand: dw_C = sqrt(2 S_I / (T w_b)), t = (dd / k0) / (w_b dw_C)
    const double dw_c = std::sqrt(2.0 * 0.18 / (0.386 * 314.0));
    REQUIRE(*estimate_cct(1.25, 0.25, 0.18, 0.386, 314.0) == Approx(1.0 / (2.0 / 3.0) / (314.0 * dw_c)));
}

TEST_CASE("brute-force clearing time for the reference fault", "[eap][oracle]") {
    const auto p = reference();
    const auto fault = CurveCondition::post_fault(0.2, 0.0);
    REQUIRE(simulate_first_swing(p, fault, 0.1).stable);
    REQUIRE_FALSE(simulate_first_swing(p, fault, 0.3).stable);
    const auto o = brute_force_cct(p, fault);
    REQUIRE(o.status == MarginStatus::Interior);
    REQUIRE(o.hi - o.lo <= 1e-3);
    REQUIRE(o.t_cct > 0.1);
    REQUIRE(o.t_cct < 0.3);
    // self-consistency one bracket width either side
    REQUIRE(simulate_first_swing(p, fault, 0.9 * o.t_cct).stable);
    REQUIRE_FALSE(simulate_first_swing(p, fault, 1.1 * o.t_cct).stable);
    // the estimate is within 30 % of the oracle
    const auto rep = margin_report(p, fault);
    REQUIRE(std::abs(*rep.t_cct_estimate - o.t_cct) / o.t_cct < 0.3);
}

TEST_CASE("a 500 ms fault loses the first swing", "[eap][oracle]") {
    const auto run = simulate_first_swing(reference(), CurveCondition::post_fault(0.2, 0.0), 0.5);
    REQUIRE_FALSE(run.stable);
    REQUIRE(run.slipped);
}

TEST_CASE("oracle without disturbance reports always stable", "[eap][oracle]") {
    OracleOptions opt;
    opt.t_max = 2.0;
    opt.settle = 1.0;
    const auto o = brute_force_cct(reference(), CurveCondition::post_fault(1.0, 0.0), opt);
    REQUIRE(o.status == MarginStatus::AlwaysStable);
}

TEST_CASE("oracle rejects a bracket unstable at both ends", "[eap][oracle]") {
    OracleOptions opt;
    opt.t_lo = 0.4;
    opt.t_hi = 0.5;
    REQUIRE_THROWS_WITH(brute_force_cct(reference(), CurveCondition::post_fault(0.2, 0.0), opt),
                        Catch::Matchers::ContainsSubstring("invalid bracket"));
}

TEST_CASE("margin report lists first-swing verdicts", "[eap]") {
    MarginOptions opt;
    opt.clearing_times = {0.1, 0.3};
    const auto rep = margin_report(reference(), CurveCondition::post_fault(0.2, 0.0), opt);
    REQUIRE(rep.first_swing_stable_at.size() == 2);
    REQUIRE(rep.first_swing_stable_at[0].second);
    REQUIRE_FALSE(rep.first_swing_stable_at[1].second);
}

TEST_CASE("single-cell sweep equals the direct computation", "[eap][sweep]") {
    const std::vector<double> bw{20.0}, dips{0.2};
    const auto table = cct_sweep(bw, dips, reference());
    const auto rep = margin_report(reference(), CurveCondition::post_fault(0.2, 0.0));
    REQUIRE(table.cells.size() == 1);
    REQUIRE(table.cells[0].cca.delta_cca == rep.cca.delta_cca);
    REQUIRE(*table.cells[0].t_cct_estimate == *rep.t_cct_estimate);
}

TEST_CASE("clearing time falls with bandwidth and dip sensitivity shrinks", "[eap][sweep]") {
    const std::vector<double> bw{5.0, 10.0, 15.0, 20.0, 25.0}, dips{0.0, 0.1, 0.2};
    const auto table = cct_sweep(bw, dips, sweep_family());
    for (const auto& c : table.cells) REQUIRE(c.cca.status == MarginStatus::Interior);
    REQUIRE(table.cct_decreasing_in_bandwidth());
    REQUIRE(table.dip_spread(3) < table.dip_spread(0));
    // deeper dip, shorter clearing time
    for (std::size_t i = 0; i < bw.size(); ++i) REQUIRE(*table.at(i, 0).t_cct_estimate < *table.at(i, 2).t_cct_estimate);
}

TEST_CASE("sweep results do not depend on the thread count", "[eap][sweep]") {
    const std::vector<double> bw{5.0, 20.0}, dips{0.0, 0.2};
    SweepOptions one, many;
    one.threads = 1;
    many.threads = 4;
    const auto a = cct_sweep(bw, dips, sweep_family(), one);
    const auto b = cct_sweep(bw, dips, sweep_family(), many);
    for (std::size_t i = 0; i < a.cells.size(); ++i) REQUIRE(*a.cells[i].t_cct_estimate == *b.cells[i].t_cct_estimate);
}
