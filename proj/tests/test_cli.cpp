#include "catch_amalgamated.hpp"

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "vscstab/runners.hpp"

namespace fs = std::filesystem;
using Catch::Approx;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

fs::path scratch() {
    const auto p = fs::temp_directory_path() / "vscstab_cli_test";
    fs::create_directories(p);
    return p;
}

Result run(const std::string& args) {
    const auto log = scratch() / "stdout.txt";
    const std::string cmd = std::string("\"") + VSCSTAB_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::ostringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
}

std::string preset(const std::string& name) { return (vscstab::default_preset_dir() / (name + ".json")).string(); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("empty argv prints usage and exits 1", "[cli]") {
    const auto r = run("");
    REQUIRE(r.code == 1);
    REQUIRE(r.out.find("portrait") != std::string::npos);
    REQUIRE(r.out.find("cct-sweep") != std::string::npos);
}

TEST_CASE("unknown subcommand or flag exits 1", "[cli]") {
    REQUIRE(run("frobnicate").code == 1);
    REQUIRE(run("cca --config " + preset("paper_default") + " --bogus").code == 1);
    REQUIRE(run("cca").code == 1);
}

TEST_CASE("cca on the reference preset reports the clearing time", "[cli]") {
    const auto out = scratch() / "cca";
    const auto r = run("cca --config " + preset("paper_default") + " --out " + out.string());
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(slurp(out / "margin_report.json"));
    REQUIRE(j["status"] == "INTERIOR");
    REQUIRE(j["t_cct_estimate"].get<double>() == Approx(0.18).margin(0.01));
    const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
    REQUIRE(m["subcommand"] == "cca");
    REQUIRE(m["resolved_config"]["grid"]["scr"] == 4.0);
}

TEST_CASE("invalid or malformed configs exit 1 with a diagnostic", "[cli]") {
    const auto bad = scratch() / "bad.json";
    {
        std::ofstream f(bad);
        f << "{\n  \"grid\": {\"scr\": 0.0}\n}\n";
    }
    auto r = run("scenario --config " + bad.string() + " --out " + (scratch() / "bad_out").string());
    REQUIRE(r.code == 1);
    REQUIRE(r.out.find("scr > 0") != std::string::npos);

    {
        std::ofstream f(bad);
        f << "{ \"grid\": ";
    }
    r = run("cca --config " + bad.string());
    REQUIRE(r.code == 1);
    REQUIRE(r.out.find("parse error") != std::string::npos);

    r = run("cca --config " + (scratch() / "missing.json").string());
    REQUIRE(r.code == 1);
}

TEST_CASE("repro fig6b prints both verdicts", "[cli]") {
    const auto r = run("repro fig6b --out \"\"");
    REQUIRE(r.code == 0);
    const auto sync = r.out.find("100 ms: SYNCHRONIZED");
    const auto lost = r.out.find("300 ms: LOST_SYNC");
    REQUIRE(sync != std::string::npos);
    REQUIRE(lost != std::string::npos);
    REQUIRE(sync < lost);
}

TEST_CASE("scenario output is byte-identical across invocations", "[cli]") {
    const auto a = scratch() / "run_a", b = scratch() / "run_b";
    const std::string common = "scenario --config " + preset("fig4b") + " --out ";
    REQUIRE(run(common + a.string()).code == 0);
    REQUIRE(run(common + b.string()).code == 0);
    const auto ta = slurp(a / "trajectory.csv");
    REQUIRE_FALSE(ta.empty());
    REQUIRE(ta == slurp(b / "trajectory.csv"));
    REQUIRE(slurp(a / "verdict.json") == slurp(b / "verdict.json"));
    const auto v = nlohmann::json::parse(slurp(a / "verdict.json"));
    REQUIRE(v["classification"] == "SYNCHRONIZED");
}

TEST_CASE("portrait with trajectories and a seed", "[cli]") {
    const auto cfg = scratch() / "small_portrait.json";
    {
        auto j = vscstab::to_json(vscstab::load_preset("fig2a"));
        j["analysis"]["portrait"]["random_samples"] = 6;
        std::ofstream f(cfg);
        f << j.dump(2);
    }
    const auto out = scratch() / "portrait";
    fs::remove_all(out);
    const auto r = run("portrait --config " + cfg.string() + " --seed 5 --threads 2 --trajectories --out " + out.string());
    REQUIRE(r.code == 0);
    REQUIRE(fs::exists(out / "portrait.csv"));
    REQUIRE(fs::exists(out / "trajectories" / "portrait_00005.csv"));
    const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
    REQUIRE(m["seed"] == 5);
    REQUIRE(m["outputs"].size() == 7);
}

TEST_CASE("cct-sweep writes the table and a summary", "[cli]") {
    const auto out = scratch() / "sweep";
    const auto r = run("cct-sweep --config " + preset("fig6a") + " --out " + out.string());
    REQUIRE(r.code == 0);
    REQUIRE(fs::exists(out / "cct_sweep.csv"));
    const auto s = nlohmann::json::parse(slurp(out / "cct_sweep_summary.json"));
    REQUIRE(s["cct_strictly_decreasing_in_bandwidth"] == true);
}
