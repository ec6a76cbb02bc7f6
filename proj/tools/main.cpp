// Command-line front end. All real work goes through the C API in
// equigraph.h; this file only handles flags, config overrides, and exit
// codes (0 ok, 2 config error, 3 data error, 4 divergence, 1 internal).
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "equigraph.h"

namespace {

struct Options {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::vector<std::uint32_t> budgets;
};

int run(const std::string& command, const Options& opt) {
    std::ifstream in(opt.config_path);
    if (!in) {
        std::fprintf(stderr, "error: cannot open config %s\n",
                     opt.config_path.c_str());
        return EQG_ERR_CONFIG;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();

    if (opt.seed_set || !opt.budgets.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            std::fprintf(stderr, "error: config: %s\n", e.what());
            return EQG_ERR_CONFIG;
        }
        if (opt.seed_set) j["seed"] = opt.seed;
        if (!opt.budgets.empty()) {
            if (command == "sweep") {
                j["sweep"]["budgets"] = opt.budgets;
            } else if (opt.budgets.size() == 1) {
                j["budget"] = opt.budgets.front();
            } else {
                std::fprintf(stderr,
                             "error: --budget takes one value outside sweep\n");
                return EQG_ERR_CONFIG;
            }
        }
        text = j.dump();
    }

    char* summary = nullptr;
    const eqg_status status =
        eqg_run(command.c_str(), text.c_str(), opt.out_dir.c_str(), &summary);
    if (status != EQG_OK) {
        std::fprintf(stderr, "error: %s\n", eqg_last_error());
        eqg_string_free(summary);
        return status;
    }
    if (summary) std::fputs(summary, stdout);
    eqg_string_free(summary);
    return EQG_OK;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Budget-constrained edge additions for equitable group access "
                 "to reward nodes"};
    app.set_version_flag("--version", std::string(eqg_version()));
    app.require_subcommand(1);

    Options opt;
    std::string command;
    const std::pair<const char*, const char*> commands[] = {
        {"generate", "materialize a graph instance and save it as a dataset bundle"},
        {"optimize", "pick edge additions under a budget (greedy or gradient)"},
        {"evaluate", "score an instance by Monte Carlo walks, no edits"},
        {"sweep", "run an optimizer grid over budgets and seeds"},
        {"facility", "place reward nodes instead of adding edges"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config_path, "experiment config JSON path")
            ->required();
        sub->add_option("--out", opt.out_dir, "output directory (default: out)");
        sub->add_option("--seed", opt.seed, "override the master seed")
            ->each([&](const std::string&) { opt.seed_set = true; });
        sub->add_option("--budget", opt.budgets,
                        "override the budget (comma list for sweep)")
            ->delimiter(',');
        sub->callback([&, name] { command = name; });
    }

    CLI11_PARSE(app, argc, argv);
    return run(command, opt);
}
