#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "equigraph/graph.hpp"
#include "equigraph/matrix.hpp"

namespace eqg {

// Row-normalized random-walk dynamics for one group over the original edges
// plus, optionally, the candidate mask. Mask entries carry a unit base weight
// scaled by a soft value in [0,1]; original edges carry the group's weight.
// Rows whose total weight is zero act as self-loops. The row structure is
// sparse and fixed at construction; only the soft values vary, which is what
// makes the backward pass cheap.
class GroupDynamics {
public:
    GroupDynamics(const DiGraph& g, const GroupSpec& group, bool include_mask,
                  const RewardSet* absorbing = nullptr);

    NodeId n() const { return n_; }
    std::size_t entry_count() const { return cols_.size(); }
    std::size_t soft_count() const { return soft_count_; }

    // x_{t+1}[j] = sum_i x_t[i] * P[i][j]. out is overwritten.
    void push(std::span<const double> soft, std::span<const double> x,
              std::span<double> out) const;

    // Adjoint of push: out[i] = sum_j P[i][j] * y[j]. out is overwritten.
    void pull(std::span<const double> soft, std::span<const double> y,
              std::span<double> out) const;

    // outer[e] += x[i_e] * y[j_e] for every stored entry; accumulates the
    // per-entry transition gradient across rollout steps.
    void accumulate_outer(std::span<const double> x, std::span<const double> y,
                          std::span<double> outer) const;

    // Push the accumulated per-entry gradient through row normalization and
    // the sigmoid, adding into d_logits. soft[k] = sigmoid(u_k) and
    // d soft/d logit = soft*(1-soft)/tau. The s/D ratio is formed first so the
    // computation stays finite even for near-empty rows.
    void backprop_to_logits(std::span<const double> soft, std::span<const double> outer,
                            double tau, std::span<double> d_logits) const;

    // Reference dense row-stochastic matrix for the given soft values.
    Matrix dense(std::span<const double> soft) const;

private:
    double row_total(std::size_t i, std::span<const double> soft) const;

    NodeId n_;
    std::size_t soft_count_;
    std::vector<std::uint32_t> row_ptr_;   // size n+1
    std::vector<NodeId> cols_;
    std::vector<double> base_;             // group weight, or 1 for mask entries
    std::vector<std::int32_t> param_;      // soft index, -1 for original edges
    std::vector<double> base_sum_;         // per row, original edges only
    std::vector<char> absorbing_;
};

// Discounted reward accumulated over a T-step rollout of the dynamics:
// sum_{t=0}^{T-1} gamma^t R.x_t with x_0 = mu. When tape is non-null the
// visited distributions x_0..x_{T-1} are stored for the backward pass.
double rollout_value(const GroupDynamics& dyn, std::span<const double> soft,
                     std::span<const double> reward, std::span<const double> mu,
                     int horizon, double gamma,
                     std::vector<std::vector<double>>* tape = nullptr);

} // namespace eqg
