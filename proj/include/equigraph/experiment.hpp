#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "equigraph/evaluate.hpp"
#include "equigraph/graph.hpp"
#include "equigraph/ingest.hpp"
#include "equigraph/mrp.hpp"
#include "equigraph/synth.hpp"

namespace eqg::experiment {

// Every random stream in a run is derived from the single master seed
// through a fixed role index, so one seed pins the whole experiment.
enum class SeedRole : std::uint64_t { Graph = 0, Rewards = 1, Train = 2, Eval = 3 };

std::uint64_t role_seed(std::uint64_t master, SeedRole role);

enum class Optimizer { None, Geci, Mrp };

const char* optimizer_name(Optimizer o);
Optimizer optimizer_from_name(const std::string& name);

// One group in a synthetic experiment: start distribution uniform over all
// nodes, or over one SBM cluster when cluster >= 0.
struct GroupConfig {
    std::string id;
    WeightRule weight_rule = WeightRule::Uniform;
    int cluster = -1;
};

// Parsed and validated experiment description. raw_json holds the resolved
// form (defaults filled in) that every output embeds as provenance;
// parse_config(raw_json) reproduces the same config.
struct ExperimentConfig {
    bool has_ensemble = false;
    synth::EnsembleConfig ensemble;
    std::string bundle_path;

    std::vector<GroupConfig> groups;
    std::uint32_t reward_k = 3;
    synth::RewardMode reward_mode = synth::RewardMode::HighDegree;
    std::string bundle_weights = "uniform"; // rule name, or "distance"

    Optimizer optimizer = Optimizer::None;
    std::uint32_t budget = 0;
    mrp::TrainConfig train;        // budget and seed resolved per run
    bool geci_prune = true;
    metrics::EvalSettings eval;    // seed resolved per run
    std::uint32_t facility_k = 0;

    std::uint64_t seed = 0;

    std::vector<std::uint32_t> sweep_budgets;
    std::vector<std::uint64_t> sweep_seeds;
    std::vector<Optimizer> sweep_optimizers;
    int sweep_jobs = 1;

    std::string raw_json;

    std::string source_name() const; // ensemble name, or "bundle"
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// A materialized problem: weighted graph, groups, rewards, and coordinates
// when the source provides them.
struct Instance {
    DiGraph graph;
    std::vector<GroupSpec> groups;
    RewardSet rewards;
    std::vector<ingest::Coord> coords;
};

// Builds the instance for one master seed. want_mask controls whether a
// synthetic source gets the complement candidate mask (facility runs skip it).
Instance build_instance(const ExperimentConfig& cfg, std::uint64_t master_seed,
                        bool want_mask = true);

// Each command writes its outputs under out_dir (created if needed) and both
// writes and returns a summary JSON string. Every file carries the resolved
// config and master seed as provenance.
std::string run_generate(const ExperimentConfig& cfg, const std::string& out_dir);
std::string run_optimize(const ExperimentConfig& cfg, const std::string& out_dir);
std::string run_evaluate(const ExperimentConfig& cfg, const std::string& out_dir);
std::string run_sweep(const ExperimentConfig& cfg, const std::string& out_dir);
std::string run_facility(const ExperimentConfig& cfg, const std::string& out_dir);

// Dispatches one of generate/optimize/evaluate/sweep/facility.
std::string run_command(const std::string& command, const ExperimentConfig& cfg,
                        const std::string& out_dir);

} // namespace eqg::experiment
