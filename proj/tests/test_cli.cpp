// End-to-end tests for the command-line binary. The binary path comes in
// through the EQG_CLI_PATH compile definition; every test spawns a fresh
// process so flag parsing, config overrides, exit codes, and file output
// are exercised exactly as a user would hit them.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "eqg_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    out << content;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the binary with `args`, returns its exit code. Stdout is captured to
// `capture` when given, otherwise discarded; stderr is always discarded.
int run_cli(const std::string& args, const fs::path& capture = {}) {
    std::string cmd = std::string(EQG_CLI_PATH) + " " + args;
    if (capture.empty())
        cmd += " >/dev/null 2>&1";
    else
        cmd += " > " + capture.string() + " 2>/dev/null";
    const int raw = std::system(cmd.c_str());
    REQUIRE(raw != -1);
    REQUIRE(WIFEXITED(raw));
    return WEXITSTATUS(raw);
}

// Chain 0->1->2->3 with candidate shortcuts; groups A at node 1, B at node 0,
// reward at node 3. The best single addition for the worst group B is (0,3).
fs::path write_toy_bundle(const fs::path& dir) {
    const fs::path bundle = dir / "bundle";
    fs::create_directories(bundle);
    write_file(bundle / "manifest.json",
               "{\"nodes\":4,\"edges\":\"edges.csv\",\"mask\":\"mask.csv\","
               "\"groups\":\"groups.csv\",\"rewards\":\"rewards.csv\"}");
    write_file(bundle / "edges.csv", "src,dst\n0,1\n1,2\n2,3\n");
    write_file(bundle / "mask.csv", "src,dst\n0,2\n0,3\n1,3\n");
    write_file(bundle / "groups.csv", "group_id,node,probability\nA,1,1\nB,0,1\n");
    write_file(bundle / "rewards.csv", "node\n3\n");
    return bundle;
}

std::string toy_optimize_config(const fs::path& bundle) {
    return "{\"seed\":1,\"source\":{\"bundle\":\"" + bundle.string() +
           "\"},\"optimizer\":\"geci\",\"budget\":1,"
           "\"eval\":{\"walks\":400,\"horizon\":10,\"gamma\":0.9,"
           "\"hit_mode\":\"first-hit\",\"pooled\":\"individuals\"}}";
}

} // namespace

TEST_CASE("--version exits cleanly and prints something") {
    const fs::path dir = fresh_dir("version");
    const fs::path out = dir / "stdout.txt";
    CHECK(run_cli("--version", out) == 0);
    CHECK(slurp(out).size() > 0);
}

TEST_CASE("a subcommand is required") {
    CHECK(run_cli("") != 0);
    CHECK(run_cli("frobnicate --config x.json") != 0);
}

TEST_CASE("a missing config file is a configuration error") {
    const fs::path dir = fresh_dir("missing_config");
    CHECK(run_cli("optimize --config " + (dir / "absent.json").string()) == 2);
}

TEST_CASE("unparseable config json is a configuration error on both paths") {
    const fs::path dir = fresh_dir("bad_json");
    const fs::path cfg = dir / "cfg.json";
    write_file(cfg, "{not json");
    // Without overrides the text goes straight to the library.
    CHECK(run_cli("optimize --config " + cfg.string()) == 2);
    // With --seed the front end must parse the json itself first.
    CHECK(run_cli("optimize --seed 9 --config " + cfg.string()) == 2);
}

TEST_CASE("a dangling bundle path is a data error") {
    const fs::path dir = fresh_dir("bad_bundle");
    const fs::path cfg = dir / "cfg.json";
    write_file(cfg, "{\"seed\":1,\"source\":{\"bundle\":\"" +
                        (dir / "nowhere").string() + "\"}}");
    CHECK(run_cli("optimize --config " + cfg.string()) == 3);
}

TEST_CASE("generate writes a bundle and echoes the summary") {
    const fs::path dir = fresh_dir("generate");
    const fs::path cfg = dir / "cfg.json";
    write_file(cfg,
               "{\"seed\":5,\"source\":{\"ensemble\":{\"kind\":\"ER\",\"n\":30,"
               "\"p\":0.1}},\"rewards\":{\"k\":2,\"mode\":\"high-degree\"},"
               "\"groups\":[{\"id\":\"g1\"},{\"id\":\"g2\"}]}");
    const fs::path out_dir = dir / "run";
    const fs::path captured = dir / "stdout.txt";
    REQUIRE(run_cli("generate --config " + cfg.string() + " --out " +
                        out_dir.string(),
                    captured) == 0);

    const json summary = json::parse(slurp(captured));
    CHECK(summary["command"] == "generate");
    CHECK(summary["status"] == "ok");
    CHECK(summary["nodes"] == 30);
    CHECK(summary["files"]["bundle"] == "bundle/manifest.json");
    CHECK(fs::exists(out_dir / "bundle" / "manifest.json"));
    CHECK(fs::exists(out_dir / "bundle" / "edges.csv"));
    // The summary on stdout and the one on disk are the same document.
    CHECK(json::parse(slurp(out_dir / "summary.json")) == summary);
}

TEST_CASE("optimize runs the greedy baseline end to end") {
    const fs::path dir = fresh_dir("optimize");
    const fs::path bundle = write_toy_bundle(dir);
    const fs::path cfg = dir / "cfg.json";
    write_file(cfg, toy_optimize_config(bundle));
    const fs::path out_dir = dir / "run";
    const fs::path captured = dir / "stdout.txt";
    REQUIRE(run_cli("optimize --config " + cfg.string() + " --out " +
                        out_dir.string(),
                    captured) == 0);

    const json summary = json::parse(slurp(captured));
    CHECK(summary["command"] == "optimize");
    CHECK(summary["status"] == "ok");
    CHECK(summary["optimizer"] == "geci");
    CHECK(summary["budget"] == 1);
    CHECK(summary["edit_count"] == 1);
    CHECK(summary["utility_after"].get<double>() >
          summary["utility_before"].get<double>());
    CHECK(fs::exists(out_dir / "before.json"));
    CHECK(fs::exists(out_dir / "after.json"));
    CHECK(fs::exists(out_dir / "edits.csv"));
    CHECK(slurp(out_dir / "edits.csv").find("0,3") != std::string::npos);
}

TEST_CASE("--seed and --budget override the config file") {
    const fs::path dir = fresh_dir("overrides");
    const fs::path bundle = write_toy_bundle(dir);
    const fs::path cfg = dir / "cfg.json";
    write_file(cfg, toy_optimize_config(bundle));
    const fs::path out_dir = dir / "run";
    const fs::path captured = dir / "stdout.txt";
    REQUIRE(run_cli("optimize --seed 77 --budget 2 --config " + cfg.string() +
                        " --out " + out_dir.string(),
                    captured) == 0);

    const json summary = json::parse(slurp(captured));
    CHECK(summary["seed"] == 77);
    CHECK(summary["budget"] == 2);
    // The echoed config reflects the overrides, not the file.
    CHECK(summary["config"]["seed"] == 77);
    CHECK(summary["config"]["budget"] == 2);
    // With budget 2 the toy admits a second useful edit.
    CHECK(summary["edit_count"] == 2);
}

TEST_CASE("--budget accepts a comma list only under sweep") {
    const fs::path dir = fresh_dir("budget_list");
    const fs::path bundle = write_toy_bundle(dir);
    const fs::path cfg = dir / "cfg.json";
    write_file(cfg, toy_optimize_config(bundle));

    CHECK(run_cli("optimize --budget 1,2 --config " + cfg.string()) == 2);

    const fs::path out_dir = dir / "run";
    const fs::path captured = dir / "stdout.txt";
    REQUIRE(run_cli("sweep --budget 1,2 --config " + cfg.string() + " --out " +
                        out_dir.string(),
                    captured) == 0);
    const json summary = json::parse(slurp(captured));
    CHECK(summary["command"] == "sweep");
    CHECK(summary["status"] == "ok");
    CHECK(summary["rows"] == 2);
    CHECK(summary["ok_rows"] == 2);
    CHECK(fs::exists(out_dir / "sweep.csv"));
}

TEST_CASE("the output directory defaults to ./out") {
    const fs::path dir = fresh_dir("default_out");
    const fs::path cfg = dir / "cfg.json";
    write_file(cfg,
               "{\"seed\":3,\"source\":{\"ensemble\":{\"kind\":\"ER\",\"n\":12,"
               "\"p\":0.2}},\"rewards\":{\"k\":1,\"mode\":\"high-degree\"},"
               "\"groups\":[{\"id\":\"g\"}]}");
    const std::string cmd = "cd " + dir.string() + " && " +
                            std::string(EQG_CLI_PATH) +
                            " generate --config cfg.json >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    REQUIRE(raw != -1);
    REQUIRE(WIFEXITED(raw));
    CHECK(WEXITSTATUS(raw) == 0);
    CHECK(fs::exists(dir / "out" / "summary.json"));
}
