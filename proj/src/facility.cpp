#include "equigraph/facility.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "equigraph/adam.hpp"
#include "equigraph/errors.hpp"
#include "equigraph/rng.hpp"

namespace eqg::facility {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

Problem::Problem(const DiGraph& g, const std::vector<GroupSpec>& groups,
                 std::uint32_t k, const mrp::TrainConfig& cfg)
    : g_(g), groups_(groups), k_(k), cfg_(cfg) {
    cfg_.budget = static_cast<double>(k);
    cfg_.validate();
    if (groups_.empty()) throw ConfigError("at least one group is required");
    if (k_ < 1) throw ConfigError("facility.k: must be >= 1");
    if (k_ > g_.node_count())
        throw ConfigError("facility.k: must be <= node count");
    for (const GroupSpec& grp : groups_) grp.validate(g_.node_count());

    dyn_.reserve(groups_.size());
    for (const GroupSpec& grp : groups_)
        dyn_.emplace_back(g_, grp, /*include_mask=*/false, nullptr);

    w_.reserve(groups_.size());
    for (std::size_t gi = 0; gi < groups_.size(); ++gi)
        w_.push_back(occupancy(dyn_[gi], groups_[gi].mu0));
}

std::vector<double> Problem::occupancy(const GroupDynamics& dyn,
                                       std::span<const double> mu) const {
    const NodeId n = g_.node_count();
    std::vector<double> w(n, 0.0);
    std::vector<double> x(mu.begin(), mu.end());
    std::vector<double> next(n, 0.0);
    double disc = 1.0;
    for (int t = 0; t < cfg_.horizon; ++t) {
        for (NodeId v = 0; v < n; ++v) w[v] += disc * x[v];
        if (t + 1 < cfg_.horizon) {
            dyn.push({}, x, next);
            x.swap(next);
            disc *= cfg_.gamma;
        }
    }
    return w;
}

void Problem::losses_at(std::span<const double> soft,
                        const std::vector<std::span<const double>>& ws,
                        std::vector<double>& group_values, double& dev,
                        double& mean_value) const {
    group_values.assign(groups_.size(), 0.0);
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
        double v = 0.0;
        for (NodeId u = 0; u < g_.node_count(); ++u) v += soft[u] * ws[gi][u];
        group_values[gi] = v;
    }
    double sum = std::accumulate(group_values.begin(), group_values.end(), 0.0);
    mean_value = sum / static_cast<double>(groups_.size());
    dev = 0.0;
    for (double v : group_values) dev += std::abs(v - mean_value);
}

double Problem::loss(std::span<const double> logits, double tau,
                     std::span<const double> noise) const {
    const NodeId n = g_.node_count();
    if (logits.size() != n) throw DataError("logit vector does not match the nodes");
    if (!noise.empty() && noise.size() != n)
        throw DataError("noise vector does not match the nodes");
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");

    std::vector<double> soft(n);
    double mass = 0.0;
    for (NodeId v = 0; v < n; ++v) {
        const double g = noise.empty() ? 0.0 : noise[v];
        soft[v] = sigmoid((logits[v] + g) / tau);
        mass += soft[v];
    }
    std::vector<std::span<const double>> ws;
    for (const auto& w : w_) ws.emplace_back(w);
    std::vector<double> values;
    double dev = 0.0, mean = 0.0;
    losses_at(soft, ws, values, dev, mean);
    return mrp::penalized_loss(values, mass, cfg_);
}

std::vector<double> Problem::gradient(std::span<const double> logits, double tau,
                                      std::span<const double> noise) const {
    const NodeId n = g_.node_count();
    if (logits.size() != n) throw DataError("logit vector does not match the nodes");
    if (!noise.empty() && noise.size() != n)
        throw DataError("noise vector does not match the nodes");
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");

    std::vector<double> soft(n);
    double mass = 0.0;
    for (NodeId v = 0; v < n; ++v) {
        const double g = noise.empty() ? 0.0 : noise[v];
        soft[v] = sigmoid((logits[v] + g) / tau);
        mass += soft[v];
    }
    std::vector<std::span<const double>> ws;
    for (const auto& w : w_) ws.emplace_back(w);
    std::vector<double> values;
    double dev = 0.0, mean = 0.0;
    losses_at(soft, ws, values, dev, mean);

    // dL/dV_g with the full chain through the mean, sign(0) = 0.
    std::vector<double> dv(groups_.size(), -1.0);
    if (dev > 0.0) {
        const double coeff = 2.0 * cfg_.mu_equity * dev + cfg_.lambda_equity;
        std::vector<double> sign(groups_.size(), 0.0);
        double sign_sum = 0.0;
        for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
            const double diff = values[gi] - mean;
            sign[gi] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            sign_sum += sign[gi];
        }
        const double mean_sign = sign_sum / static_cast<double>(groups_.size());
        for (std::size_t gi = 0; gi < groups_.size(); ++gi)
            dv[gi] += coeff * (sign[gi] - mean_sign);
    }
    const double exc = std::max(0.0, mass - cfg_.budget);
    const double dmass = exc > 0.0 ? 2.0 * cfg_.mu_budget * exc + cfg_.lambda_budget
                                   : 0.0;

    std::vector<double> d(n, 0.0);
    for (NodeId v = 0; v < n; ++v) {
        double ds = dmass;
        for (std::size_t gi = 0; gi < groups_.size(); ++gi)
            ds += dv[gi] * ws[gi][v];
        d[v] = ds * soft[v] * (1.0 - soft[v]) / tau;
    }
    return d;
}

FacilityResult Problem::train(std::vector<mrp::EpochRecord>* progress) const {
    const NodeId n = g_.node_count();

    FacilityResult out;
    out.logits.assign(n, cfg_.logit_init);
    out.tau = cfg_.tau0;

    double lambda_eq = cfg_.lambda_equity;
    double lambda_b = cfg_.lambda_budget;
    double tau = cfg_.tau0;

    Adam adam(cfg_.learning_rate, n);
    std::vector<double> grad(n, 0.0);
    std::vector<double> noise;
    std::vector<double> soft(n);
    std::vector<double> values;

    std::vector<std::span<const double>> exact_ws;
    for (const auto& w : w_) exact_ws.emplace_back(w);

    std::vector<std::vector<double>> start_cum(groups_.size());
    std::vector<std::vector<double>> sampled_w(groups_.size());
    std::vector<double> sampled_mu(n, 0.0);
    if (!cfg_.exact_expectation)
        for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
            double total = 0.0;
            start_cum[gi].resize(n);
            for (NodeId v = 0; v < n; ++v) {
                total += groups_[gi].mu0[v];
                start_cum[gi][v] = total;
            }
        }

    std::uint64_t batch_counter = 0;
    bool constraint_step = true;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        const bool equity_on = epoch >= cfg_.equity_start_epoch;
        const bool budget_on = epoch >= cfg_.budget_start_epoch;

        for (int mb = 0; mb < cfg_.minibatches_per_epoch; ++mb, ++batch_counter) {
            if (cfg_.gumbel_noise) {
                rng::Stream ns(rng::derive(cfg_.seed, 2 * batch_counter));
                noise.resize(n);
                for (double& g : noise) g = ns.gumbel();
            } else {
                noise.clear();
            }

            std::vector<std::span<const double>> ws = exact_ws;
            if (!cfg_.exact_expectation) {
                rng::Stream ss(rng::derive(cfg_.seed, 2 * batch_counter + 1));
                for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
                    std::fill(sampled_mu.begin(), sampled_mu.end(), 0.0);
                    const double unit = 1.0 / static_cast<double>(cfg_.minibatch);
                    for (int s = 0; s < cfg_.minibatch; ++s) {
                        const std::size_t v =
                            rng::pick_cumulative(start_cum[gi], ss.uniform());
                        sampled_mu[v] += unit;
                    }
                    sampled_w[gi] = occupancy(dyn_[gi], sampled_mu);
                    ws[gi] = sampled_w[gi];
                }
            }

            const bool t_obj = !constraint_step;
            const bool t_eq = constraint_step && equity_on;
            const bool t_bu = constraint_step && budget_on;
            constraint_step = !constraint_step;

            double mass = 0.0;
            for (NodeId v = 0; v < n; ++v) {
                const double g = noise.empty() ? 0.0 : noise[v];
                soft[v] = sigmoid((out.logits[v] + g) / tau);
                mass += soft[v];
            }
            double dev = 0.0, mean = 0.0;
            losses_at(soft, ws, values, dev, mean);
            const double exc = std::max(0.0, mass - cfg_.budget);

            double step_loss = 0.0;
            if (t_obj)
                for (double v : values) step_loss -= v;
            if (t_eq) step_loss += cfg_.mu_equity * dev * dev + lambda_eq * dev;
            if (t_bu) step_loss += cfg_.mu_budget * exc * exc + lambda_b * exc;
            if (!std::isfinite(step_loss))
                throw DivergenceError("non-finite loss at epoch " +
                                      std::to_string(epoch) + ", minibatch " +
                                      std::to_string(mb));

            std::vector<double> dv(groups_.size(), 0.0);
            if (t_obj)
                for (double& d : dv) d -= 1.0;
            if (t_eq && dev > 0.0) {
                const double coeff = 2.0 * cfg_.mu_equity * dev + lambda_eq;
                std::vector<double> sign(groups_.size(), 0.0);
                double sign_sum = 0.0;
                for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
                    const double diff = values[gi] - mean;
                    sign[gi] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                    sign_sum += sign[gi];
                }
                const double mean_sign =
                    sign_sum / static_cast<double>(groups_.size());
                for (std::size_t gi = 0; gi < groups_.size(); ++gi)
                    dv[gi] += coeff * (sign[gi] - mean_sign);
            }
            const double dmass =
                t_bu && exc > 0.0 ? 2.0 * cfg_.mu_budget * exc + lambda_b : 0.0;

            for (NodeId v = 0; v < n; ++v) {
                double ds = dmass;
                for (std::size_t gi = 0; gi < groups_.size(); ++gi)
                    ds += dv[gi] * ws[gi][v];
                grad[v] = ds * soft[v] * (1.0 - soft[v]) / tau;
            }
            adam.step(grad, out.logits);
        }

        // Epoch bookkeeping on a noise-free exact-expectation evaluation.
        double mass = 0.0;
        for (NodeId v = 0; v < n; ++v) {
            soft[v] = sigmoid(out.logits[v] / tau);
            mass += soft[v];
        }
        double dev = 0.0, mean = 0.0;
        losses_at(soft, exact_ws, values, dev, mean);
        double sum_value = std::accumulate(values.begin(), values.end(), 0.0);
        if (!std::isfinite(sum_value))
            throw DivergenceError("non-finite values at epoch " +
                                  std::to_string(epoch));
        const mrp::EpochRecord rec{epoch, sum_value, dev, mass, tau, lambda_eq,
                                   lambda_b};
        out.trajectory.push_back(rec);
        if (progress) progress->push_back(rec);

        if (equity_on) lambda_eq += cfg_.mu_equity * dev;
        if (budget_on)
            lambda_b = std::max(0.0, lambda_b + cfg_.mu_budget *
                                                    (mass - cfg_.budget));
        if (epoch >= cfg_.anneal_start_epoch) tau *= cfg_.nu;
    }

    out.tau = tau;
    out.placement = discretize_topk(out.logits, k_);
    return out;
}

RewardSet discretize_topk(std::span<const double> logits, std::uint32_t k) {
    if (k > logits.size()) throw ConfigError("facility.k: must be <= node count");
    std::vector<NodeId> order(logits.size());
    std::iota(order.begin(), order.end(), NodeId{0});
    std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
        if (logits[a] != logits[b]) return logits[a] > logits[b];
        return a < b;
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    RewardSet rs;
    rs.nodes = std::move(order);
    return rs;
}

FacilityResult train_facility(const DiGraph& g, const std::vector<GroupSpec>& groups,
                              std::uint32_t k, const mrp::TrainConfig& cfg,
                              std::vector<mrp::EpochRecord>* progress) {
    return Problem(g, groups, k, cfg).train(progress);
}

} // namespace eqg::facility
