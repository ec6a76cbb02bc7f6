#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "equigraph/graph.hpp"

namespace eqg::metrics {

// How a walk scores reward: discounted first arrival with rewards absorbing,
// or discounted credit at every reward visit with rewards left transparent.
enum class HitMode { FirstHit, Accumulate };
// Pooled Gini base population: every walk individually, or group means.
enum class PooledMode { Individuals, GroupMeans };

const char* hit_mode_name(HitMode m);
HitMode hit_mode_from_name(const std::string& name);
const char* pooled_mode_name(PooledMode m);
PooledMode pooled_mode_from_name(const std::string& name);

struct EvalSettings {
    int walks = 5000;
    int horizon = 10;
    double gamma = 0.99;
    std::uint64_t seed = 0;
    HitMode hit_mode = HitMode::FirstHit;
    PooledMode pooled = PooledMode::Individuals;

    void validate() const;
};

struct GroupMetrics {
    double exact_utility = 0.0;
    double mc_mean = 0.0;
    double mc_stderr = 0.0;
    int walks = 0;
    double mean_shortest_path = 0.0;
    double unreachable_mass = 0.0;
    double intra_gini = 0.0;
};

struct EvalReport {
    std::vector<std::string> group_ids;
    std::vector<GroupMetrics> per_group;
    double pooled_gini = 0.0;
    double pooled_mean = 0.0;
    int walks_per_group = 0;
    EvalSettings settings;

    double mean_exact_utility() const;
    std::string to_json() const;
};

// Inverse-distance utility: sum_v mu0(v) * access(v) with access 1 at rewards,
// 1/d at hop distance d, 0 when unreachable.
double group_utility_exact(const DiGraph& g, const RewardSet& rewards,
                           const GroupSpec& group, const EditSet& edits = {});

// Per-walk discounted rewards under the group's weighted dynamics with edits
// applied at full weight. Walk w draws its own seed from settings.seed, so the
// result does not depend on execution order.
std::vector<double> walk_rewards(const DiGraph& g, const RewardSet& rewards,
                                 const GroupSpec& group, const EditSet& edits,
                                 const EvalSettings& settings);

// Mean and standard error (sample standard deviation / sqrt(walks)) of
// walk_rewards.
std::pair<double, double> monte_carlo_reward(const DiGraph& g, const RewardSet& rewards,
                                             const GroupSpec& group, const EditSet& edits,
                                             const EvalSettings& settings);

// Gini index sum_ij |x_i - x_j| / (2 n^2 mean). Zero for an all-zero sample;
// negative entries are rejected.
double gini(std::span<const double> values);

struct MeanShortestPath {
    double mean_hops = 0.0;       // over the reachable part of the support
    double unreachable_mass = 0.0;
};

MeanShortestPath mean_shortest_path(const DiGraph& g, const RewardSet& rewards,
                                    const GroupSpec& group, const EditSet& edits = {});

// Analytic expected discounted first-arrival reward: the absorbing-chain
// rollout that Monte Carlo estimates in FirstHit mode.
double first_hit_value(const DiGraph& g, const RewardSet& rewards, const GroupSpec& group,
                       const EditSet& edits, int horizon, double gamma);

// Analytic every-visit value matching Accumulate mode.
double accumulate_value(const DiGraph& g, const RewardSet& rewards, const GroupSpec& group,
                        const EditSet& edits, int horizon, double gamma);

// Full per-group and pooled evaluation of one graph + edit set.
EvalReport full_report(const DiGraph& g, const RewardSet& rewards,
                       const std::vector<GroupSpec>& groups, const EditSet& edits,
                       const EvalSettings& settings);

} // namespace eqg::metrics
