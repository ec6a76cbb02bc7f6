#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "equigraph/dynamics.hpp"
#include "equigraph/graph.hpp"
#include "equigraph/mrp.hpp"

namespace eqg::facility {

// Facility placement: the edge set is frozen and the learnable object is a
// per-node reward vector, relaxed through the same Gumbel-sigmoid as the edge
// optimizer. Because the dynamics are fixed, each group's value is linear in
// the reward vector: V_g = R . w_g with w_g the discounted occupancy
// sum_t gamma^t x_t, so exact-expectation training precomputes w_g once.
struct FacilityResult {
    std::vector<double> logits; // one per node
    double tau = 1.0;
    RewardSet placement; // top-k nodes by logit
    std::vector<mrp::EpochRecord> trajectory;
};

class Problem {
public:
    // k is the facility budget; the soft node mass is constrained against it.
    // cfg.budget is ignored in favour of k.
    Problem(const DiGraph& g, const std::vector<GroupSpec>& groups, std::uint32_t k,
            const mrp::TrainConfig& cfg);

    std::size_t param_count() const { return g_.node_count(); }

    // Full penalized loss at explicit parameters; fixed noise makes it a
    // smooth deterministic function for finite-difference checks.
    double loss(std::span<const double> logits, double tau,
                std::span<const double> noise = {}) const;

    // Exact reverse-mode gradient of loss() with respect to the node logits.
    std::vector<double> gradient(std::span<const double> logits, double tau,
                                 std::span<const double> noise = {}) const;

    // When progress is non-null epoch records are also appended there as they
    // are produced, preserving a trajectory snapshot across DivergenceError.
    FacilityResult train(std::vector<mrp::EpochRecord>* progress = nullptr) const;

private:
    std::vector<double> occupancy(const GroupDynamics& dyn,
                                  std::span<const double> mu) const;
    void losses_at(std::span<const double> soft,
                   const std::vector<std::span<const double>>& ws,
                   std::vector<double>& group_values, double& dev,
                   double& mean_value) const;

    const DiGraph& g_;
    const std::vector<GroupSpec>& groups_;
    std::uint32_t k_;
    mrp::TrainConfig cfg_;
    std::vector<GroupDynamics> dyn_;         // fixed dynamics, one per group
    std::vector<std::vector<double>> w_;     // exact occupancy per group
};

// Top-k nodes by logit, ties broken by node id. Unconditional: the k best
// nodes are kept even when their relaxed values sit below one half.
RewardSet discretize_topk(std::span<const double> logits, std::uint32_t k);

FacilityResult train_facility(const DiGraph& g, const std::vector<GroupSpec>& groups,
                              std::uint32_t k, const mrp::TrainConfig& cfg,
                              std::vector<mrp::EpochRecord>* progress = nullptr);

} // namespace eqg::facility
