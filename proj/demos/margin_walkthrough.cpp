// Walks through the clearing-time analysis for one preset: operating angles,
// critical clearing angle, the estimate, the brute-force check, and two
// time-domain runs either side of it.
//
//   demo_margin [preset-name]   (default paper_default)

#include <cstdio>
#include <exception>
#include <string>

#include "vscstab/runners.hpp"

using namespace vscstab;

int main(int argc, char** argv) try {
    const std::string name = argc > 1 ? argv[1] : "paper_default";
    const auto cfg = load_preset(name);
    const auto& p = cfg.params();
    const auto fault = CurveCondition::post_fault(cfg.scenario.fault);

    const auto pre = swing_coeffs(p, CurveCondition::pre_fault());
    const auto post = swing_coeffs(p, fault);
    std::printf("preset %s: PLL gains (%g, %g), SCR %g, k_f %g\n", name.c_str(), p.ctrl.pll_kp, p.ctrl.pll_ki,
                p.grid.scr, cfg.scenario.fault.k_f_mag);
    std::printf("T_pll %.5f  T_m %.4f  u_eff pre %.4f / fault %.4f\n", pre.t_pll, pre.t_m, pre.u_eff, post.u_eff);

    MarginOptions opt;
    opt.oracle = true;
    opt.oracle_options = cfg.analysis.oracle;
    const auto rep = margin_report(p, fault, opt);
    std::printf("delta_A %.5f rad  delta_B %.5f rad\n", rep.cca.delta_a, rep.cca.delta_b);
    if (rep.cca.status != MarginStatus::Interior) {
        std::printf("no interior clearing angle: %s\n", std::string(to_string(rep.cca.status)).c_str());
        return 0;
    }
    std::printf("delta_CCA %.5f rad  S_I %.5f\n", rep.cca.delta_cca, rep.cca.s_accel);
    std::printf("t_CCT estimate %.4f s  oracle %.4f s (bracket %.4f..%.4f)\n", *rep.t_cct_estimate,
                rep.oracle->t_cct, rep.oracle->lo, rep.oracle->hi);

    for (double f : {0.8, 1.2}) {
        const double d = f * rep.oracle->t_cct;
        const auto v = classify_sync(run_config_scenario(with_fault_duration(cfg, d)));
        std::printf("fault %.0f ms -> %s\n", d * 1e3, std::string(to_string(v.cls)).c_str());
    }
    return 0;
} catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
}
