#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "equigraph/dynamics.hpp"
#include "equigraph/graph.hpp"
#include "equigraph/matrix.hpp"

namespace eqg::mrp {

// Relaxed edit parameters: one logit per mask edge plus the relaxation
// temperature. sigmoid(logit) > 0.5 marks an edge the optimizer wants open.
struct EdgeLogits {
    std::vector<double> values;
    double tau = 1.0;
};

struct TrainConfig {
    double budget = 400.0; // bound on total soft edit mass
    int horizon = 10;      // rollout steps T
    double gamma = 0.99;

    double mu_equity = 1e-6; // quadratic-penalty coefficients
    double mu_budget = 0.1;
    double lambda_equity = 0.0; // initial Lagrange multipliers
    double lambda_budget = 0.0;

    int epochs = 700;
    int minibatch = 32;            // start-state samples per group
    int minibatches_per_epoch = 2; // one constraint plus one objective step
    double learning_rate = 0.05;
    double nu = 0.999; // temperature decay per annealed epoch
    double tau0 = 1.0;

    // A stage activates once the epoch index reaches its start.
    int equity_start_epoch = 0;
    int budget_start_epoch = 100;
    int anneal_start_epoch = 200;

    std::uint64_t seed = 0;
    bool exact_expectation = false; // use mu directly instead of sampling starts
    bool gumbel_noise = true;
    bool absorbing_rewards = false; // train on first-arrival dynamics instead
    double logit_init = -3.0;       // near-closed start, the unedited graph

    void validate() const;

    static TrainConfig synthetic_defaults();
    static TrainConfig road_defaults();
    static TrainConfig social_defaults(NodeId n); // budget = n/5, short horizon
};

struct EpochRecord {
    int epoch = 0;
    double sum_value = 0.0;  // sum of group values, noise-free evaluation
    double equity_dev = 0.0; // sum_g |V_g - mean|
    double soft_mass = 0.0;
    double tau = 0.0;
    double lambda_equity = 0.0; // multipliers in force during the epoch
    double lambda_budget = 0.0;
};

struct TrainResult {
    EdgeLogits logits;
    std::vector<EpochRecord> trajectory; // one record per epoch
};

// Discounted reward of a T-step rollout of dense row-stochastic dynamics:
// sum_{t=0}^{T-1} gamma^t R.x_t, computed by repeated vector-matrix products.
double value_rollout(const Matrix& p, std::span<const double> reward,
                     std::span<const double> s0, int horizon, double gamma);

// value_rollout started from a group's start distribution.
double group_value(const Matrix& p, std::span<const double> reward,
                   std::span<const double> mu, int horizon, double gamma);

// Relaxed edge values sigmoid((logit + g)/tau) with fresh Gumbel noise g when
// noise_on, zero noise otherwise. Same seed, same sample.
std::vector<double> gumbel_sigmoid_sample(const EdgeLogits& logits, std::uint64_t seed,
                                          bool noise_on);

// Augmented Lagrangian scalar: -sum V + mu_eq*Dev^2 + lambda_eq*Dev
// + mu_b*Exc^2 + lambda_b*Exc, with Dev = sum_g |V_g - mean| and
// Exc = max(0, soft_mass - budget).
double penalized_loss(std::span<const double> group_values, double soft_mass,
                      const TrainConfig& cfg);

// Multiplier ascent, called once per epoch per active constraint.
// Equity (equality form, dev >= 0): lambda_eq += mu_eq * dev. Budget
// (inequality): projected dual step lambda_b = max(0, lambda_b +
// mu_b * (soft_mass - budget)), so pressure decays once under budget.
void update_multipliers(const TrainConfig& cfg, double dev, double mass_minus_budget,
                        double& lambda_equity, double& lambda_budget);

// One training problem: graph + groups + rewards + config. Holds references;
// the inputs must outlive the problem.
class Problem {
public:
    Problem(const DiGraph& g, const std::vector<GroupSpec>& groups,
            const RewardSet& rewards, const TrainConfig& cfg);

    std::size_t param_count() const { return g_.mask().size(); }

    // Full-loss evaluation at explicit parameters. noise is a per-parameter
    // Gumbel draw (empty means none); fixing it makes the loss a smooth
    // deterministic function suitable for finite-difference checks.
    double loss(const EdgeLogits& logits, std::span<const double> noise = {}) const;

    // Exact gradient of loss() with respect to the logits, computed by
    // reverse-mode differentiation through the sigmoid, the row
    // normalization, the rollout, and the Lagrangian terms.
    std::vector<double> gradient(const EdgeLogits& logits,
                                 std::span<const double> noise = {}) const;

    // Method-of-multipliers training loop with the alternating
    // constraint/objective schedule. Bit-reproducible per (config, seed).
    // When progress is non-null every epoch record is also appended there as
    // it is produced, so callers keep a trajectory snapshot if training
    // throws DivergenceError.
    TrainResult train(std::vector<EpochRecord>* progress = nullptr) const;

private:
    struct ForwardState;
    void forward(std::span<const double> logits, double tau,
                 std::span<const double> noise,
                 const std::vector<std::span<const double>>& mus, bool keep_tape,
                 ForwardState& fs) const;
    void backward(const ForwardState& fs, double tau, double lambda_eq,
                  double lambda_b, bool term_objective, bool term_equity,
                  bool term_budget, std::span<double> d_logits) const;

    const DiGraph& g_;
    const std::vector<GroupSpec>& groups_;
    const RewardSet& rewards_;
    TrainConfig cfg_;
    std::vector<GroupDynamics> dyn_; // one per group
    std::vector<double> reward_ind_;
};

// Keep the top-budget mask edges with sigmoid(logit) > 0.5, ties broken
// lexicographically by edge.
EditSet discretize(const EdgeLogits& logits, const DiGraph& g, std::uint32_t budget);

// Largest discount so that an advantage horizon of t_adv steps retains
// influence: 1 - 1/t_adv.
double recommended_gamma(double t_adv);

} // namespace eqg::mrp
