#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "gridce/commands.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = GRIDCE_CONFIG_DIR;

int run_cli(const std::string& args) {
    const std::string cmd = std::string(GRIDCE_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("gridce_cli_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("equilibrium writes plot-ready outputs and a summary") {
    const fs::path out = scratch("eq");
    CHECK(run_cli("equilibrium --config " + (kConfigs / "kkt_tiny.json").string() + " --out " + out.string()) == 0);
    for (const char* f : {"price.csv", "generation.csv", "deviations.csv", "soc.csv", "convergence.csv", "summary.json"})
        CHECK(fs::exists(out / f));
    std::ifstream in(out / "summary.json");
    const auto j = nlohmann::json::parse(in);
    CHECK(j.at("command") == "equilibrium");
    CHECK(j.at("exit_code") == 0);
    CHECK(j.at("metrics").at("relative_gap").get<double>() <= 1e-6);
}

TEST_CASE("cpp command with an uplift override") {
    const fs::path out = scratch("cpp");
    CHECK(run_cli("cpp --config " + (kConfigs / "cpp_default.json").string() + " --steps 96 --uplift 0.5 --out " +
                  out.string()) == 0);
    CHECK(fs::exists(out / "power.csv"));
    std::ifstream in(out / "price.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,hour,price,signal");
}

TEST_CASE("config errors exit with code 2") {
    const fs::path dir = scratch("bad");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.json") << "{\"grid\": {\"step_minutes\": 7}}";
    CHECK(run_cli("equilibrium --config " + (dir / "bad.json").string() + " --out " + (dir / "out").string()) == 2);
    std::ofstream(dir / "broken.json") << "{ nope";
    CHECK(run_cli("cpp --config " + (dir / "broken.json").string() + " --out " + (dir / "out").string()) == 2);
    CHECK(run_cli("cpp --config " + (kConfigs / "no_classes.json").string() + " --out " + (dir / "out").string()) == 2);
}

TEST_CASE("unbalanceable scarcity exits with code 4") {
    const fs::path out = scratch("infeasible");
    CHECK(run_cli("equilibrium --config " + (kConfigs / "scarcity_default.json").string() + " --bump-gw -5000 --out " +
                  out.string()) == 4);
}

TEST_CASE("verify passes") { CHECK(run_cli("verify --out " + scratch("verify").string()) == 0); }

TEST_CASE("run report json lists metrics in order") {
    gridce::RunReport r;
    r.command = "x";
    r.metrics = {{"b", 2.0}, {"a", 1.0}};
    const auto j = nlohmann::json::parse(r.to_json());
    CHECK(j.at("metrics").at("b") == 2.0);
    CHECK(r.metric("a") == 1.0);
    CHECK_THROWS(r.metric("c"));
    CHECK(r.to_json().find("\"b\"") < r.to_json().find("\"a\""));
}

TEST_CASE("zero uplift gives zero cpp metrics") {
    const fs::path out = scratch("cpp0");
    REQUIRE(run_cli("cpp --config " + (kConfigs / "cpp_default.json").string() + " --uplift 0 --out " + out.string()) == 0);
    std::ifstream in(out / "summary.json");
    const auto m = nlohmann::json::parse(in).at("metrics");
    for (const char* k : {"pre_bound_surge_gw", "onset_drop_gw", "turnoff_depth_gw"}) CHECK(m.at(k).get<double>() == 0.0);
}

TEST_CASE("coarser grid keeps the cpp metrics within ten percent") {
    gridce::RunOptions fine, coarse;
    fine.config = coarse.config = kConfigs / "cpp_default.json";
    fine.out_dir = scratch("cpp288");
    coarse.out_dir = scratch("cpp96");
    coarse.overrides.steps = 96;
    const auto a = gridce::cmd_cpp(fine), b = gridce::cmd_cpp(coarse);
    for (const char* k : {"pre_bound_surge_gw", "turnoff_depth_gw"})
        CHECK(b.metric(k) == doctest::Approx(a.metric(k)).epsilon(0.10));
}

TEST_CASE("repeated ensemble runs with a fixed seed write identical files") {
    const fs::path a = scratch("ens_a"), b = scratch("ens_b");
    const std::string cfg = "ensemble --config " + (kConfigs / "ensemble_default.json").string() + " --loads 300 --seed 9 --out ";
    REQUIRE(run_cli(cfg + a.string()) == 0);
    REQUIRE(run_cli(cfg + b.string()) == 0);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    int compared = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        if (e.path().extension() != ".csv") continue;
        CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
        ++compared;
    }
    CHECK(compared >= 4);
}
