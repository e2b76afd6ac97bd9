#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string cli = PATHWISE_CLI_BIN;

int run_cli(const std::string& args) {
    const int status = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pathwise_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream os(path);
    os << body;
}

std::string slurp(const fs::path& path) {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

json read_report(const fs::path& dir) { return json::parse(slurp(dir / "report.json")); }

} // namespace

TEST_CASE("bad invocations exit with the config-error code") {
    CHECK(run_cli("") == 2);
    CHECK(run_cli("frobnicate --config x.json") == 2);
    CHECK(run_cli("qv --config /nonexistent/config.json --out /tmp/x") == 2);

    const auto dir = fresh_dir("malformed");
    write_file(dir / "bad.json", "{ not json");
    CHECK(run_cli("qv --config " + (dir / "bad.json").string() + " --out " + dir.string()) == 2);

    write_file(dir / "incomplete.json", R"({"seed": 1})");
    CHECK(run_cli("qv --config " + (dir / "incomplete.json").string() + " --out " +
                  dir.string()) == 2);
}

TEST_CASE("qv study on the weak driver reports its quadratic variation") {
    const auto dir = fresh_dir("qv_weak");
    write_file(dir / "config.json", R"({
        "seed": 42,
        "process": {"type": "weak_bm1"},
        "statistic": "qv",
        "reference": {"kind": "constant", "value": 0.585786437626905},
        "m_list": [1],
        "n_list": [256, 1024],
        "n_paths": 100,
        "tolerances": {"mean_value_at_finest": {"min": 0.5358, "max": 0.6358},
                        "require_monotone": true}
    })");
    const std::string out = (dir / "out").string();
    CHECK(run_cli("qv --config " + (dir / "config.json").string() + " --out " + out) == 0);

    const json report = read_report(out);
    CHECK(report["pass"].get<bool>());
    CHECK(report["command"] == "qv");
    CHECK(report["config"]["seed"] == 42);
    const double mean = report["results"]["rows"].back()["mean_value"].get<double>();
    CHECK(std::abs(mean - 0.5858) < 0.05);
    CHECK(fs::exists(fs::path(out) / "convergence.csv"));
    CHECK(fs::exists(fs::path(out) / "run_meta.json"));
}

TEST_CASE("tolerance misses exit with the failure code") {
    const auto dir = fresh_dir("qv_fail");
    write_file(dir / "config.json", R"({
        "seed": 7,
        "process": {"type": "brownian"},
        "statistic": "qv",
        "reference": {"kind": "constant", "value": 1.0},
        "n_list": [64],
        "n_paths": 50,
        "tolerances": {"mean_value_at_finest": {"min": 5.0, "max": 6.0}}
    })");
    const std::string out = (dir / "out").string();
    CHECK(run_cli("qv --config " + (dir / "config.json").string() + " --out " + out) == 3);
    CHECK_FALSE(read_report(out)["pass"].get<bool>());
}

TEST_CASE("rerunning an unchanged config is byte-identical, whatever the thread count") {
    const auto dir = fresh_dir("determinism");
    write_file(dir / "config.json", R"({
        "seed": 99,
        "process": {"type": "gbm", "sigma": 0.2, "mu": 0.1, "s0": 1.0},
        "n_steps": 128,
        "n_paths": 64,
        "checkpoints": [0.5, 1.0]
    })");
    const std::string cfg = (dir / "config.json").string();
    const std::string out1 = (dir / "a").string();
    const std::string out2 = (dir / "b").string();
    const std::string out3 = (dir / "c").string();
    REQUIRE(run_cli("simulate --config " + cfg + " --out " + out1 + " --threads 1") == 0);
    REQUIRE(run_cli("simulate --config " + cfg + " --out " + out2 + " --threads 8") == 0);
    REQUIRE(run_cli("simulate --config " + cfg + " --out " + out3 + " --threads 1") == 0);
    for (const std::string name : {"report.json", "qv_table.csv", "ensemble.csv"}) {
        CHECK(slurp(fs::path(out1) / name) == slurp(fs::path(out2) / name));
        CHECK(slurp(fs::path(out1) / name) == slurp(fs::path(out3) / name));
    }
    // binary ensembles too
    CHECK(slurp(fs::path(out1) / "ensemble.bin") == slurp(fs::path(out2) / "ensemble.bin"));
}

TEST_CASE("seed override changes the report") {
    const auto dir = fresh_dir("seed_override");
    write_file(dir / "config.json", R"({
        "seed": 1,
        "process": {"type": "brownian"},
        "n_steps": 64,
        "n_paths": 32
    })");
    const std::string cfg = (dir / "config.json").string();
    REQUIRE(run_cli("simulate --config " + cfg + " --out " + (dir / "a").string()) == 0);
    REQUIRE(run_cli("simulate --config " + cfg + " --out " + (dir / "b").string() +
                    " --seed 2") == 0);
    CHECK(slurp(dir / "a" / "ensemble.bin") != slurp(dir / "b" / "ensemble.bin"));
    CHECK(read_report(dir / "b")["config"]["seed"] == 2);
}

TEST_CASE("martingale testing from the command line") {
    const auto dir = fresh_dir("amtest");

    SECTION("compensated weak driver passes") {
        write_file(dir / "pass.json", R"({
            "seed": 314159,
            "process": {"type": "weak_bm1"},
            "compensate": true,
            "n_steps": 256,
            "n_paths": 4000,
            "strategies": ["one", "identity", "sin"],
            "checkpoints": [0.25, 0.5, 0.75, 1.0],
            "z_crit": 3.0,
            "expect": "pass"
        })");
        const std::string out = (dir / "pass").string();
        CHECK(run_cli("amtest --config " + (dir / "pass.json").string() + " --out " + out) == 0);
        CHECK(fs::exists(fs::path(out) / "amtest.csv"));
    }

    SECTION("uncompensated weak driver fails as expected") {
        write_file(dir / "fail.json", R"({
            "seed": 314159,
            "process": {"type": "weak_bm1"},
            "compensate": false,
            "n_steps": 256,
            "n_paths": 4000,
            "strategies": ["identity"],
            "checkpoints": [0.75, 1.0],
            "z_crit": 3.0,
            "expect": "fail"
        })");
        const std::string out = (dir / "fail").string();
        CHECK(run_cli("amtest --config " + (dir / "fail.json").string() + " --out " + out) == 0);
        const json report = read_report(out);
        CHECK_FALSE(report["results"]["test_pass"].get<bool>());
        CHECK(report["results"]["expectation_met"].get<bool>());
    }
}

TEST_CASE("hedging from the command line") {
    const auto dir = fresh_dir("hedge");
    write_file(dir / "config.json", R"({
        "seed": 5150,
        "claim": {"type": "european_call", "strike": 1.0},
        "model": {"type": "gbm", "sigma": 0.2, "mu": 0.0, "s0": 1.0},
        "pde": {"n_space": 384, "n_time": 256},
        "n_steps": 512,
        "n_paths": 100,
        "tolerances": {"max_rel_rms": 0.08}
    })");
    const std::string out = (dir / "out").string();
    CHECK(run_cli("hedge --config " + (dir / "config.json").string() + " --out " + out) == 0);
    const json report = read_report(out);
    CHECK(report["results"]["x0"].get<double>() == Catch::Approx(0.0797).margin(0.001));
    CHECK(report["results"]["n_excluded"].get<int>() == 0);
    CHECK(fs::exists(fs::path(out) / "hedge_paths.csv"));
}

TEST_CASE("utility scan with optimality verification") {
    const auto dir = fresh_dir("utility");
    write_file(dir / "config.json", R"({
        "seed": 5005,
        "model": {"type": "gbm", "sigma": 0.2, "mu": 0.1, "s0": 1.0},
        "rate_r": 0.02,
        "theta_min": 0.0,
        "theta_max": 4.0,
        "theta_step": 0.25,
        "n_steps": 256,
        "n_paths": 4000,
        "tolerances": {"argmax_target": 2.0, "argmax_tol": 0.25},
        "verify": {
            "pi": [2.0, 3.0],
            "expect": ["pass", "fail"],
            "strategies": ["one", "identity", "sin"],
            "checkpoints": [0.25, 0.5, 0.75, 1.0]
        }
    })");
    const std::string out = (dir / "out").string();
    CHECK(run_cli("utility --config " + (dir / "config.json").string() + " --out " + out) == 0);
    const json report = read_report(out);
    CHECK(report["results"]["analytic_reference"].get<double>() ==
          Catch::Approx(2.0).margin(1e-12));
    CHECK(std::abs(report["results"]["argmax_theta"].get<double>() - 2.0) <= 0.25);
    CHECK(fs::exists(fs::path(out) / "scan.csv"));
}

TEST_CASE("wealth functional comparison from the command line") {
    const auto dir = fresh_dir("funcheck");
    write_file(dir / "config.json", R"({
        "seed": 606,
        "model": {"type": "gbm", "sigma": 0.2, "mu": 0.0, "s0": 1.0},
        "strategy": "above_min",
        "n_list": [128, 512],
        "n_paths": 50,
        "tolerances": {"require_monotone": true}
    })");
    const std::string out = (dir / "out").string();
    CHECK(run_cli("funcheck --config " + (dir / "config.json").string() + " --out " + out) == 0);
    CHECK(read_report(out)["results"]["monotone"].get<bool>());
}

TEST_CASE("tube fractions from the command line") {
    const auto dir = fresh_dir("fullsupport");
    write_file(dir / "config.json", R"({
        "seed": 24680,
        "process": {"type": "brownian"},
        "n_steps": 128,
        "n_paths": 4000,
        "eps_list": [0.25, 0.5, 1.0],
        "tolerances": {"require_monotone": true, "positive_at": [0.5]}
    })");
    const std::string out = (dir / "out").string();
    CHECK(run_cli("fullsupport --config " + (dir / "config.json").string() + " --out " + out) ==
          0);
    const json report = read_report(out);
    double prev = -1.0;
    for (const auto& row : report["results"]["rows"]) {
        CHECK(row["fraction"].get<double>() >= prev);
        prev = row["fraction"].get<double>();
    }
}

TEST_CASE("itocheck from the command line") {
    const auto dir = fresh_dir("itocheck");
    write_file(dir / "config.json", R"({
        "seed": 2121,
        "field": "sine",
        "process": {"type": "fbm", "hurst": 0.75},
        "n_list": [128, 512],
        "n_paths": 10,
        "tolerances": {"require_monotone": true}
    })");
    const std::string out = (dir / "out").string();
    CHECK(run_cli("itocheck --config " + (dir / "config.json").string() + " --out " + out) == 0);
    CHECK(fs::exists(fs::path(out) / "residuals.csv"));
    CHECK(fs::exists(fs::path(out) / "residual_path.csv"));
}
