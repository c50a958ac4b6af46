#include "catch_amalgamated.hpp"

#include <algorithm>
#include <complex>
#include <numbers>
#include <random>

#include "vscstab/params.hpp"

using namespace vscstab;
using Catch::Approx;

namespace {

bool has_violation(const ValidationReport& r, const std::string& needle) {
    return std::any_of(r.violations.begin(), r.violations.end(),
                       [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("rating table defaults validate with l_sigma = 1/scr", "[params]") {
    SystemParams p;
    REQUIRE(p.base.s_base == 2.0e6);
    REQUIRE(p.base.u_base == 690.0);
    REQUIRE(p.base.f_base == 50.0);
    REQUIRE(p.grid.scr == 4.0);
    const auto r = validate_params(p);
    REQUIRE(r.ok());
    REQUIRE(p.grid.l_sigma() == 0.25);
    REQUIRE(p.base.omega_b() == Approx(100.0 * std::numbers::pi));
}

TEST_CASE("degenerate grid strength is reported", "[params]") {
    SystemParams p;
    p.grid.scr = 0.0;
    const auto r = validate_params(p);
    REQUIRE_FALSE(r.ok());
    REQUIRE(has_violation(r, "scr > 0"));
    REQUIRE_THROWS_AS(require_valid(p), Error);
}

TEST_CASE("line lump larger than the total lump is reported", "[params]") {
    SystemParams p;
    p.grid.l_sigma_t = 0.3;
    const auto r = validate_params(p);
    REQUIRE(has_violation(r, "l_sigma >= l_sigma_t"));
}

TEST_CASE("controller and limiter bounds", "[params]") {
    SystemParams p;
    p.ctrl.pll_ki = 0.0;
    p.op.freq_limit = 1.0;
    p.op.i_max = -1.0;
    const auto r = validate_params(p);
    REQUIRE(has_violation(r, "pll_ki > 0"));
    REQUIRE(has_violation(r, "freq_limit > 1"));
    REQUIRE(has_violation(r, "i_max > 0"));
    REQUIRE(r.violations.size() == 3);
}

TEST_CASE("l_sigma * scr = 1 over a range of strengths", "[params][property]") {
    for (double scr : {0.5, 1.0, 1.7, 4.0, 10.0, 123.0}) {
        GridParams g;
        g.scr = scr;
        REQUIRE(g.l_sigma() * scr == Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("bolted fault collapses the retained voltage", "[params][fault]") {
    const auto k = fault_factor({0.0, 0.0}, {0.0, 0.05});
    REQUIRE(k.k_f_mag == 0.0);
    REQUIRE(k.phi_f == 0.0);
}

TEST_CASE("inductive fault and source give no phase shift", "[params][fault]") {
    const auto k = fault_factor({0.0, 0.1}, {0.0, 0.05});
    REQUIRE(k.k_f_mag == Approx(2.0 / 3.0).epsilon(1e-14));
    REQUIRE(k.phi_f == Approx(0.0).margin(1e-15));
}

TEST_CASE("resistive fault behind an inductive source lags", "[params][fault]") {
    const auto k = fault_factor({0.1, 0.0}, {0.0, 0.05});
    // 0.1 / (0.1 + 0.05j) by hand
    const Complex oracle = Complex(0.1, 0.0) / Complex(0.1, 0.05);
    REQUIRE(k.k_f_mag == Approx(std::abs(oracle)).epsilon(1e-14));
    REQUIRE(k.phi_f == Approx(std::arg(oracle)).epsilon(1e-14));
    REQUIRE(k.phi_f < 0.0);
    REQUIRE(k.phi_f > -std::numbers::pi / 2);
}

TEST_CASE("ill-posed fault circuit throws", "[params][fault]") {
    REQUIRE_THROWS_WITH(fault_factor({0.0, 0.1}, {0.0, -0.1}), Catch::Matchers::ContainsSubstring("ill-posed"));
}

TEST_CASE("fault factor is scale invariant", "[params][fault][property]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0), s(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        const Complex z_f{u(rng), u(rng)}, z_s{u(rng) * 0.1, u(rng)};
        Complex c{s(rng), s(rng)};
        if (std::abs(c) < 1e-3) c = {1.0, 0.0};
        const auto a = fault_factor(z_f, z_s);
        const auto b = fault_factor(c * z_f, c * z_s);
        REQUIRE(b.k_f_mag == Approx(a.k_f_mag).epsilon(1e-12));
        REQUIRE(b.phi_f == Approx(a.phi_f).margin(1e-12));
    }
}

TEST_CASE("retained voltage grows with fault impedance at equal phase", "[params][fault][property]") {
    const Complex z_s{0.01, 0.05};
    const Complex dir = z_s / std::abs(z_s);
    double prev = -1.0;
    for (double m = 0.0; m <= 1.0; m += 0.05) {
        const auto k = fault_factor(m * dir, z_s);
        REQUIRE(k.k_f_mag > prev);
        REQUIRE(k.k_f_mag <= 1.0);
        prev = k.k_f_mag;
    }
}

TEST_CASE("passive branches keep k_f within [0, 1]", "[params][fault][property]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const auto k = fault_factor({u(rng), u(rng)}, {0.0, 0.01 + u(rng)});
        REQUIRE(k.k_f_mag >= 0.0);
        REQUIRE(k.k_f_mag <= 1.0 + 1e-15);
        REQUIRE(k.phi_f <= 1e-15);
    }
}

TEST_CASE("fault timing validation", "[params][fault]") {
    auto f = FaultSpec::from_retained_voltage(0.2, 0.0, 1.0, 1.0);
    REQUIRE(has_violation(validate_fault(f), "t_clear > t_apply"));
    f.t_clear = 1.1;
    REQUIRE(validate_fault(f).ok());
    REQUIRE(f.duration() == Approx(0.1));
    const auto g = FaultSpec::from_impedance({0.0, 0.1}, {0.0, 0.05}, 0.0, 0.2);
    REQUIRE(g.z_f.has_value());
    REQUIRE(g.k_f_mag == Approx(2.0 / 3.0));
}

TEST_CASE("bandwidth to gain maps", "[params]") {
    const auto [kp, ki] = pll_gains_from_bandwidth(20.0);
    REQUIRE(kp == 20.0);
    REQUIRE(ki == 800.0);
    // closed power loop ki*U/(1 + U*kp) sits at 2*pi*f
    const double ki_pq = pq_ki_from_bandwidth(10.0, 0.1);
    REQUIRE(ki_pq / (1.0 + 0.1) == Approx(2.0 * std::numbers::pi * 10.0));
}
