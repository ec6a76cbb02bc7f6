#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "equigraph/graph.hpp"

namespace eqg::synth {

enum class Ensemble { ER, PA, CL, SBM };

const char* ensemble_name(Ensemble e);
Ensemble ensemble_from_name(const std::string& name);

// Parameters for one random-graph family. Only the fields of the selected
// family are read. All families sample an undirected graph and emit both
// orientations of every sampled edge.
struct EnsembleConfig {
    Ensemble kind = Ensemble::ER;
    NodeId n = 100;

    double er_p = 0.05; // ER: per-pair probability

    std::uint32_t pa_m = 2; // PA: edges added per new node (Holme-Kim growth)
    double pa_p = 0.3;      // PA: triangle-closure probability

    double cl_gamma = 2.5; // CL: degree exponent, P(k) proportional to k^-gamma

    std::uint32_t sbm_clusters = 2;            // SBM: equal-size clusters
    std::vector<std::vector<double>> sbm_probs // SBM: block edge probabilities
        {{0.1, 0.01}, {0.01, 0.1}};

    void validate() const; // throws ConfigError with a field path
};

struct GenResult {
    DiGraph graph;
    std::vector<NodeId> cluster; // per-node cluster id; empty unless SBM
};

// Deterministic per (config, seed): same inputs give a bit-identical graph.
GenResult generate(const EnsembleConfig& config, std::uint64_t seed);

// Per-edge weights aligned with graph.edges() under a degree rule. Degrees
// are taken in the undirected support. Explicit is rejected here; explicit
// weights come from data, not from a rule.
std::vector<double> assign_group_weights(const DiGraph& graph, WeightRule rule);

enum class RewardMode { HighDegree, LowDegree };

const char* reward_mode_name(RewardMode m);
RewardMode reward_mode_from_name(const std::string& name);

// Sample k distinct reward nodes, probability proportional to degree
// (HighDegree) or inverse degree (LowDegree), by sequential draws without
// replacement with renormalization. Isolated nodes are never drawn.
RewardSet place_rewards(const DiGraph& graph, std::uint32_t k, RewardMode mode,
                        std::uint64_t seed);

// Uniform start distribution over all nodes.
std::vector<double> random_initial_distribution(NodeId n);

} // namespace eqg::synth
