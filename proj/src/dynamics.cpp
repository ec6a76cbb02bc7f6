#include "equigraph/dynamics.hpp"

#include <algorithm>
#include <cassert>

#include "equigraph/errors.hpp"

namespace eqg {

GroupDynamics::GroupDynamics(const DiGraph& g, const GroupSpec& group, bool include_mask,
                             const RewardSet* absorbing)
    : n_(g.node_count()), soft_count_(include_mask ? g.mask().size() : 0) {
    absorbing_.assign(n_, 0);
    if (absorbing)
        for (NodeId r : absorbing->nodes) absorbing_[r] = 1;

    const std::vector<double>* weights = g.weights_for(group.id);
    const auto& edges = g.edges();
    const auto& mask = g.mask();

    std::vector<std::uint32_t> count(n_, 0);
    for (const Edge& e : edges)
        if (!absorbing_[e.src]) ++count[e.src];
    if (include_mask)
        for (const Edge& e : mask)
            if (!absorbing_[e.src]) ++count[e.src];

    row_ptr_.assign(n_ + 1, 0);
    for (NodeId v = 0; v < n_; ++v) row_ptr_[v + 1] = row_ptr_[v] + count[v];
    const std::size_t nnz = row_ptr_[n_];
    cols_.resize(nnz);
    base_.resize(nnz);
    param_.resize(nnz);
    base_sum_.assign(n_, 0.0);

    std::vector<std::uint32_t> cursor(row_ptr_.begin(), row_ptr_.end() - 1);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Edge& e = edges[i];
        if (absorbing_[e.src]) continue;
        const double w = weights ? (*weights)[i] : 1.0;
        const std::uint32_t at = cursor[e.src]++;
        cols_[at] = e.dst;
        base_[at] = w;
        param_[at] = -1;
        base_sum_[e.src] += w;
    }
    if (include_mask)
        for (std::size_t k = 0; k < mask.size(); ++k) {
            const Edge& e = mask[k];
            if (absorbing_[e.src]) continue;
            const std::uint32_t at = cursor[e.src]++;
            cols_[at] = e.dst;
            base_[at] = 1.0;
            param_[at] = static_cast<std::int32_t>(k);
        }
}

double GroupDynamics::row_total(std::size_t i, std::span<const double> soft) const {
    double d = base_sum_[i];
    for (std::uint32_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e)
        if (param_[e] >= 0) d += soft[static_cast<std::size_t>(param_[e])];
    return d;
}

void GroupDynamics::push(std::span<const double> soft, std::span<const double> x,
                         std::span<double> out) const {
    assert(x.size() == n_ && out.size() == n_ && soft.size() == soft_count_);
    std::fill(out.begin(), out.end(), 0.0);
    for (NodeId i = 0; i < n_; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        if (absorbing_[i]) {
            out[i] += xi;
            continue;
        }
        const double d = row_total(i, soft);
        if (d == 0.0) {
            out[i] += xi;
            continue;
        }
        const double scale = xi / d;
        for (std::uint32_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) {
            const double a =
                param_[e] < 0 ? base_[e] : soft[static_cast<std::size_t>(param_[e])];
            out[cols_[e]] += scale * a;
        }
    }
}

void GroupDynamics::pull(std::span<const double> soft, std::span<const double> y,
                         std::span<double> out) const {
    assert(y.size() == n_ && out.size() == n_ && soft.size() == soft_count_);
    for (NodeId i = 0; i < n_; ++i) {
        if (absorbing_[i]) {
            out[i] = y[i];
            continue;
        }
        const double d = row_total(i, soft);
        if (d == 0.0) {
            out[i] = y[i];
            continue;
        }
        double acc = 0.0;
        for (std::uint32_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) {
            const double a =
                param_[e] < 0 ? base_[e] : soft[static_cast<std::size_t>(param_[e])];
            acc += a * y[cols_[e]];
        }
        out[i] = acc / d;
    }
}

void GroupDynamics::accumulate_outer(std::span<const double> x, std::span<const double> y,
                                     std::span<double> outer) const {
    assert(outer.size() == cols_.size());
    for (NodeId i = 0; i < n_; ++i) {
        const double xi = x[i];
        if (xi == 0.0 || absorbing_[i]) continue;
        for (std::uint32_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e)
            outer[e] += xi * y[cols_[e]];
    }
}

void GroupDynamics::backprop_to_logits(std::span<const double> soft,
                                       std::span<const double> outer, double tau,
                                       std::span<double> d_logits) const {
    assert(soft.size() == soft_count_ && d_logits.size() == soft_count_);
    for (NodeId i = 0; i < n_; ++i) {
        if (absorbing_[i] || row_ptr_[i] == row_ptr_[i + 1]) continue;
        const double d = row_total(i, soft);
        if (d == 0.0) continue; // constant self-loop row, no gradient
        // d loss / d a_e = (outer_e - sum_f outer_f * P_f) / d; only the mask
        // entries have a_e = soft, so only those reach the logits.
        double rowdot = 0.0;
        for (std::uint32_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) {
            const double a =
                param_[e] < 0 ? base_[e] : soft[static_cast<std::size_t>(param_[e])];
            rowdot += outer[e] * (a / d);
        }
        for (std::uint32_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) {
            if (param_[e] < 0) continue;
            const std::size_t k = static_cast<std::size_t>(param_[e]);
            const double sk = soft[k];
            d_logits[k] += (outer[e] - rowdot) * (sk / d) * (1.0 - sk) / tau;
        }
    }
}

Matrix GroupDynamics::dense(std::span<const double> soft) const {
    Matrix p(n_, n_);
    for (NodeId i = 0; i < n_; ++i) {
        if (absorbing_[i]) {
            p(i, i) = 1.0;
            continue;
        }
        const double d = row_total(i, soft);
        if (d == 0.0) {
            p(i, i) = 1.0;
            continue;
        }
        for (std::uint32_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) {
            const double a =
                param_[e] < 0 ? base_[e] : soft[static_cast<std::size_t>(param_[e])];
            p(i, cols_[e]) += a / d;
        }
    }
    return p;
}

double rollout_value(const GroupDynamics& dyn, std::span<const double> soft,
                     std::span<const double> reward, std::span<const double> mu,
                     int horizon, double gamma,
                     std::vector<std::vector<double>>* tape) {
    if (horizon < 1) throw ConfigError("rollout horizon must be >= 1");
    const NodeId n = dyn.n();
    std::vector<double> x(mu.begin(), mu.end());
    std::vector<double> next(n, 0.0);
    if (tape) {
        tape->clear();
        tape->reserve(static_cast<std::size_t>(horizon));
    }
    double value = 0.0;
    double disc = 1.0;
    for (int t = 0; t < horizon; ++t) {
        double hit = 0.0;
        for (NodeId v = 0; v < n; ++v) hit += reward[v] * x[v];
        value += disc * hit;
        if (tape) tape->push_back(x);
        if (t + 1 < horizon) {
            dyn.push(soft, x, next);
            x.swap(next);
            disc *= gamma;
        }
    }
    return value;
}

} // namespace eqg
