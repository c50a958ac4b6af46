// Runs every acceptance criterion and prints one PASS/FAIL line each.
#include <cstdio>
#include <filesystem>

#include "vscstab/verify.hpp"

int main(int argc, char** argv) {
    const std::filesystem::path presets = argc > 1 ? argv[1] : vscstab::default_preset_dir();
    int failed = 0;
    for (const auto& r : vscstab::run_acceptance(presets)) {
        std::printf("%s\n", vscstab::format_result_line(r).c_str());
        std::fflush(stdout);
        failed += !r.passed;
    }
    std::printf("%d/8 criteria passed\n", 8 - failed);
    return failed == 0 ? 0 : 1;
}
