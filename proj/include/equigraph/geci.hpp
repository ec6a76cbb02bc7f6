#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "equigraph/graph.hpp"

namespace eqg::geci {

struct GeciConfig {
    std::uint32_t budget = 0;
    int horizon = 10;  // hop radius used for candidate pruning
    bool prune = true; // false scans every mask candidate

    void validate() const;
};

struct GeciStep {
    std::string group_id; // worst-off group the step targeted
    Edge edge;
    double utility_before = 0.0; // that group's exact utility before/after
    double utility_after = 0.0;
};

struct GeciResult {
    EditSet edits;
    std::vector<GeciStep> trace; // one record per added edge, in order
};

// Nodes within `hops` of some reward node under edges plus edits (distance
// measured along forward edges toward the rewards).
std::vector<NodeId> reward_neighborhood(const DiGraph& g, const RewardSet& rewards,
                                        const EditSet& edits, int hops);

// Greedy equitable augmentation: each step computes every group's exact
// inverse-distance utility, targets the worst-off group, and adds the mask
// candidate with the largest exact utility gain for it (ties broken
// lexicographically by edge). Stops early when no candidate improves.
// Deterministic: same inputs always give the same edits.
GeciResult geci_augment(const DiGraph& g, const std::vector<GroupSpec>& groups,
                        const RewardSet& rewards, const GeciConfig& config);

} // namespace eqg::geci
