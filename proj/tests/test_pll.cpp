#include "catch_amalgamated.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "vscstab/pll.hpp"

using namespace vscstab;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

SystemParams reference() {
    SystemParams p;  // 20 Hz PLL (20, 800), SCR 4, L_sigmaT 0.25, I_cd 1
    return p;
}

}  // namespace

TEST_CASE("pre-fault coefficients of the reference system", "[pll]") {
    const auto c = swing_coeffs(reference(), CurveCondition::pre_fault());
    REQUIRE(c.t_m == Approx(0.25).epsilon(1e-15));
    REQUIRE(c.u_eff == Approx(1.0).epsilon(1e-15));
    REQUIRE(c.phi == 0.0);
    // (w_b - kp L I_cd) / ki, by hand
    REQUIRE(c.t_pll == Approx((100.0 * pi - 20.0 * 0.25) / 800.0).epsilon(1e-14));
    REQUIRE(c.t_pll == Approx(0.38645).margin(1e-5));
    REQUIRE(c.kp_over_ki == 0.025);
}

TEST_CASE("stable and unstable swing angles", "[pll]") {
    const auto eq = swing_equilibria(swing_coeffs(reference(), CurveCondition::pre_fault()));
    REQUIRE(eq);
    REQUIRE(eq->delta_a == Approx(0.253).margin(1e-3));
    REQUIRE(eq->delta_a == Approx(std::asin(0.25)).epsilon(1e-14));
    REQUIRE(eq->delta_b == Approx(pi - std::asin(0.25)).epsilon(1e-14));
    REQUIRE(eq->delta_b == Approx(2.89).margin(5e-3));
}

TEST_CASE("unfaulted post curve equals the pre curve", "[pll]") {
    const auto pre = swing_coeffs(reference(), CurveCondition::pre_fault());
    const auto post = swing_coeffs(reference(), CurveCondition::post_fault(1.0, 0.0));
    REQUIRE(post.t_pll == pre.t_pll);
    REQUIRE(post.t_m == pre.t_m);
    REQUIRE(post.u_eff == pre.u_eff);
    REQUIRE(post.phi == pre.phi);
    REQUIRE(post.kp_over_ki == pre.kp_over_ki);
}

TEST_CASE("fault curve is a scaled and shifted healthy curve", "[pll][property]") {
    const auto pre = swing_coeffs(reference(), CurveCondition::pre_fault());
    for (auto [k, phi] : {std::pair{0.2, 0.0}, std::pair{0.5, -0.3}, std::pair{0.0, 0.0}, std::pair{0.9, -1.2}}) {
        const auto post = swing_coeffs(reference(), CurveCondition::post_fault(k, phi));
        double max_pre = -1e9, max_post = -1e9;
        for (int i = 0; i <= 20000; ++i) {
            const double d = -pi + 4.0 * pi * i / 20000.0;
            REQUIRE(post.t_e(d) == Approx(k * pre.u_eff * std::sin(d - phi)).margin(1e-14));
            max_pre = std::max(max_pre, pre.t_e(d));
            max_post = std::max(max_post, post.t_e(d));
        }
        // both curves reach their peak on this grid to within grid spacing
        REQUIRE(std::abs(max_post - k * max_pre) < 1e-6);
        const double peak_post = k * pre.u_eff;  // analytic maximum
        REQUIRE(std::abs(post.t_e(phi + pi / 2) - peak_post) < 1e-12);
    }
}

TEST_CASE("non-physical inertia analog is rejected", "[pll]") {
    auto p = reference();
    p.ctrl.pll_kp = 2000.0;  // kp L I_cd > w_b
    REQUIRE_THROWS_WITH(swing_coeffs(p, CurveCondition::pre_fault()),
                        Catch::Matchers::ContainsSubstring("non-physical inertia analog"));
}

TEST_CASE("pre-fault PCC voltage", "[pll]") {
    GridParams g;
    OperatingPoint none;
    none.i_cd_ref = 0.0;
    none.i_cq_ref = 0.0;
    g.z_s = {0.0, 0.05};
    REQUIRE(std::abs(prefault_pcc_voltage(g, none) - Complex(g.u_s, 0.0)) < 1e-15);

    OperatingPoint op;
    g.z_s = {0.0, 0.0};
    REQUIRE(std::abs(prefault_pcc_voltage(g, op)) == Approx(g.u_s).epsilon(1e-14));

    g.z_s = {0.0, 0.05};
    g.l_sigma_t = 0.2;
    const Complex u = prefault_pcc_voltage(g, op);
    const Complex i{op.i_cd_ref, op.i_cq_ref};
    // with the PLL on the PoC voltage, d-axis current through a reactance
    // lowers |U_pcc| below U_s
    REQUIRE(std::abs(u) < g.u_s);
    // the source sits behind z_s with magnitude U_s, and the PoC is q-free
    REQUIRE(std::abs(u - i * g.z_s) == Approx(g.u_s).epsilon(1e-13));
    REQUIRE(std::abs((u + i * g.z_line()).imag()) < 1e-13);
}

TEST_CASE("damping sign over the principal period", "[pll]") {
    const auto c = swing_coeffs(reference(), CurveCondition::pre_fault());
    REQUIRE(damping(0.0, c) > 0.0);
    REQUIRE(damping(pi, c) < 0.0);
    const auto eq = swing_equilibria(c);
    REQUIRE(damping(eq->delta_a, c) == Approx(0.025 * (std::cos(eq->delta_a) * 100.0 * pi - 0.25)).epsilon(1e-14));
    REQUIRE(damping(eq->delta_a, c) == Approx(7.5983).margin(1e-4));
    // negative on the whole closed band [pi/2, 3pi/2]; the offset L I_cd
    // moves the zeros just outside it
    const double first = bisect([&](double d) { return damping(d, c); }, 0.0, pi, 1e-12);
    const double second = bisect([&](double d) { return damping(d, c); }, pi, 2.0 * pi, 1e-12);
    REQUIRE(first < pi / 2);
    REQUIRE(first > pi / 2 - 1e-2);
    REQUIRE(second > 3.0 * pi / 2);
    REQUIRE(second < 3.0 * pi / 2 + 1e-2);
    for (int i = 0; i <= 1000; ++i) REQUIRE(damping(pi / 2 + pi * i / 1000.0, c) < 0.0);
}

TEST_CASE("equilibria of the swing field", "[pll][property]") {
    for (auto [k, phi] : {std::pair{1.0, 0.0}, std::pair{0.6, -0.2}, std::pair{0.3, -0.5}}) {
        const auto c = swing_coeffs(reference(), CurveCondition::post_fault(k, phi));
        const auto eq = swing_equilibria(c);
        REQUIRE(eq);
        for (double d : {eq->delta_a, eq->delta_b, eq->delta_a + 2.0 * pi, eq->delta_b - 4.0 * pi}) {
            const auto r = pll_rhs({0.0, d}, c);
            REQUIRE(std::hypot(r.d_omega, r.delta) < 1e-10);
            REQUIRE(c.u_eff * std::sin(d - c.phi) == Approx(c.t_m).margin(1e-12));
        }
    }
    const auto deep = swing_coeffs(reference(), CurveCondition::post_fault(0.2, 0.0));
    REQUIRE_FALSE(swing_equilibria(deep));  // t_m = 0.25 > u_eff = 0.2
}

TEST_CASE("swing field is 2 pi periodic in delta", "[pll][property]") {
    const auto c = swing_coeffs(reference(), CurveCondition::pre_fault());
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> w(-0.2, 0.2), d(-pi, 3.0 * pi);
    for (int i = 0; i < 500; ++i) {
        const PllState s{w(rng), d(rng)};
        const auto a = pll_rhs(s, c);
        const auto b = pll_rhs({s.d_omega, s.delta + 2.0 * pi}, c);
        REQUIRE(a.d_omega == Approx(b.d_omega).margin(1e-11));
        REQUIRE(a.delta == b.delta);
    }
}

TEST_CASE("constant damping mode uses the given value", "[pll]") {
    const auto c = swing_coeffs(reference(), CurveCondition::pre_fault());
    const PllState s{0.1, 2.0};
    const auto r = pll_rhs(s, c, DampingSpec::constant(3.0));
    REQUIRE(r.d_omega == Approx((-3.0 * 0.1 + c.t_m - std::sin(2.0)) / c.t_pll).epsilon(1e-14));
    REQUIRE(r.delta == Approx(c.omega_b * 0.1).epsilon(1e-15));
}

TEST_CASE("mechanical analog ignores i_cq without line resistance", "[pll][property]") {
    auto p = reference();
    const double base = swing_coeffs(p, CurveCondition::pre_fault()).t_m;
    for (double iq : {-0.5, 0.3, 0.8}) {
        p.op.i_cq_ref = iq;
        REQUIRE(swing_coeffs(p, CurveCondition::pre_fault()).t_m == base);
    }
    p.grid.r_sigma_t = 0.05;
    REQUIRE(swing_coeffs(p, CurveCondition::pre_fault()).t_m == Approx(base + 0.05 * 0.8));
}

TEST_CASE("undamped swing energy is conserved", "[pll][property]") {
    const auto c = swing_coeffs(reference(), CurveCondition::pre_fault());
    const auto d0 = DampingSpec::constant(0.0);
    auto energy = [&](const Vec<2>& x) {
        // 1/2 T w_b Dw^2 + int (T_e - T_m) d delta
        return 0.5 * c.t_pll * c.omega_b * x[0] * x[0] - c.u_eff * std::cos(x[1] - c.phi) - c.t_m * x[1];
    };
    const Vec<2> x0{0.02, 0.5};
    const auto sol = rk4_integrate<2>([&](double, const Vec<2>& x) { return pll_rhs(PllState::from(x), c, d0).vec(); },
                                      x0, IntegratorConfig{1e-4, 1.0, 1, 1e6});
    double drift = 0.0;
    for (const auto& x : sol.x) drift = std::max(drift, std::abs(energy(x) - energy(x0)));
    REQUIRE(drift < 1e-6);
}

TEST_CASE("slip counting on the unwrapped angle", "[pll]") {
    const double a = std::asin(0.25);
    REQUIRE(slip_count(a, a) == 0);
    REQUIRE(slip_count(a + 2.0 * pi - 1e-6, a) == 0);
    REQUIRE(slip_count(a + 2.0 * pi + 1e-6, a) == 1);
    REQUIRE(slip_count(a - 4.0 * pi - 0.1, a) == 2);
}

TEST_CASE("portrait point at the equilibrium converges to target", "[pll][portrait]") {
    const auto c = swing_coeffs(reference(), CurveCondition::pre_fault());
    const auto pt = classify_pll_point(c, {}, {0.0, std::asin(0.25)}, PllPortraitOptions{});
    REQUIRE(pt.cls == BasinClass::ConvergedToTarget);
    REQUIRE(pt.slips == 0);
}

TEST_CASE("angle-dependent damping loses large initial states that constant damping keeps", "[pll][portrait]") {
    const auto c = swing_coeffs(reference(), CurveCondition::pre_fault());
    const auto eq = swing_equilibria(c);
    std::vector<PllState> grid;
    for (int i = 0; i < 21; ++i)
        for (int j = 0; j < 21; ++j) grid.push_back({-0.2 + 0.4 * i / 20.0, -pi + 3.0 * pi * j / 20.0});
    PllPortraitOptions opt;
    auto count = [&](const DampingSpec& d, BasinClass cls) {
        const auto pts = classify_pll_portrait(c, d, grid, opt);
        return std::count_if(pts.begin(), pts.end(), [&](const auto& p) { return p.cls == cls; });
    };
    const auto constant = DampingSpec::constant(damping(eq->delta_a, c));
    REQUIRE(count(constant, BasinClass::Diverged) == 0);
    REQUIRE(count(constant, BasinClass::Undecided) == 0);
    REQUIRE(count(DampingSpec::angle_dependent(), BasinClass::Diverged) > 0);
}
