#include "equigraph/mrp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "equigraph/adam.hpp"
#include "equigraph/errors.hpp"
#include "equigraph/rng.hpp"

namespace eqg::mrp {

void TrainConfig::validate() const {
    if (!(budget >= 0.0)) throw ConfigError("train.budget: must be >= 0");
    if (horizon < 1) throw ConfigError("train.horizon: must be >= 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("train.gamma: must be in [0,1]");
    if (!(mu_equity >= 0.0)) throw ConfigError("train.mu_equity: must be >= 0");
    if (!(mu_budget >= 0.0)) throw ConfigError("train.mu_budget: must be >= 0");
    if (epochs < 0) throw ConfigError("train.epochs: must be >= 0");
    if (minibatch < 1) throw ConfigError("train.minibatch: must be >= 1");
    if (minibatches_per_epoch < 1)
        throw ConfigError("train.minibatches_per_epoch: must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate: must be > 0");
    if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("train.nu: must be in (0,1]");
    if (!(tau0 > 0.0)) throw ConfigError("train.tau0: must be > 0");
    if (equity_start_epoch < 0 || budget_start_epoch < 0 || anneal_start_epoch < 0)
        throw ConfigError("train schedule epochs must be >= 0");
    if (epochs > 0 &&
        (equity_start_epoch >= epochs || budget_start_epoch >= epochs ||
         anneal_start_epoch >= epochs))
        throw ConfigError("train schedule epochs must be < train.epochs");
}

TrainConfig TrainConfig::synthetic_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::road_defaults() {
    TrainConfig cfg;
    cfg.mu_budget = 1.0;
    cfg.epochs = 500;
    cfg.nu = 0.995;
    return cfg;
}

TrainConfig TrainConfig::social_defaults(NodeId n) {
    TrainConfig cfg;
    cfg.budget = 0.2 * static_cast<double>(n);
    cfg.horizon = 3;
    cfg.gamma = 0.7;
    cfg.mu_budget = 10000.0;
    cfg.epochs = 1000;
    cfg.nu = 0.995;
    cfg.anneal_start_epoch = 300;
    return cfg;
}

double value_rollout(const Matrix& p, std::span<const double> reward,
                     std::span<const double> s0, int horizon, double gamma) {
    const std::size_t n = p.rows;
    if (p.cols != n || reward.size() != n || s0.size() != n)
        throw DataError("value_rollout: dimension mismatch");
    if (horizon < 1) throw ConfigError("value_rollout: horizon must be >= 1");
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += p(i, j);
        if (std::abs(row - 1.0) > 1e-6)
            throw DataError("value_rollout: row " + std::to_string(i) +
                            " is not stochastic");
    }

    std::vector<double> x(s0.begin(), s0.end());
    std::vector<double> next(n, 0.0);
    double value = 0.0, disc = 1.0;
    for (int t = 0; t < horizon; ++t) {
        double hit = 0.0;
        for (std::size_t v = 0; v < n; ++v) hit += reward[v] * x[v];
        value += disc * hit;
        if (t + 1 < horizon) {
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (x[i] == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) next[j] += x[i] * p(i, j);
            }
            x.swap(next);
            disc *= gamma;
        }
    }
    return value;
}

double group_value(const Matrix& p, std::span<const double> reward,
                   std::span<const double> mu, int horizon, double gamma) {
    return value_rollout(p, reward, mu, horizon, gamma);
}

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

std::vector<double> gumbel_sigmoid_sample(const EdgeLogits& logits, std::uint64_t seed,
                                          bool noise_on) {
    if (!(logits.tau > 0.0)) throw ConfigError("tau must be > 0");
    rng::Stream rs(seed);
    std::vector<double> s(logits.values.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double g = noise_on ? rs.gumbel() : 0.0;
        s[k] = sigmoid((logits.values[k] + g) / logits.tau);
    }
    return s;
}

double penalized_loss(std::span<const double> group_values, double soft_mass,
                      const TrainConfig& cfg) {
    if (group_values.empty()) throw ConfigError("at least one group value is required");
    double sum = 0.0;
    for (double v : group_values) sum += v;
    const double mean = sum / static_cast<double>(group_values.size());
    double dev = 0.0;
    for (double v : group_values) dev += std::abs(v - mean);
    const double exc = std::max(0.0, soft_mass - cfg.budget);
    return -sum + cfg.mu_equity * dev * dev + cfg.lambda_equity * dev +
           cfg.mu_budget * exc * exc + cfg.lambda_budget * exc;
}

void update_multipliers(const TrainConfig& cfg, double dev, double mass_minus_budget,
                        double& lambda_equity, double& lambda_budget) {
    lambda_equity += cfg.mu_equity * dev;
    lambda_budget = std::max(0.0, lambda_budget + cfg.mu_budget * mass_minus_budget);
}

// ---------------------------------------------------------------------------
// Problem

struct Problem::ForwardState {
    std::vector<double> soft;
    double soft_mass = 0.0;
    double exc = 0.0;
    double dev = 0.0;
    double mean_value = 0.0;
    std::vector<double> group_values;
    std::vector<std::span<const double>> mus;
    std::vector<std::vector<std::vector<double>>> tapes; // per group, per step
};

Problem::Problem(const DiGraph& g, const std::vector<GroupSpec>& groups,
                 const RewardSet& rewards, const TrainConfig& cfg)
    : g_(g), groups_(groups), rewards_(rewards), cfg_(cfg) {
    cfg_.validate();
    if (groups_.empty()) throw ConfigError("at least one group is required");
    rewards_.validate(g_.node_count());
    for (const GroupSpec& grp : groups_) grp.validate(g_.node_count());
    if (g_.mask().empty()) throw DataError("candidate mask is empty");

    dyn_.reserve(groups_.size());
    for (const GroupSpec& grp : groups_)
        dyn_.emplace_back(g_, grp, true,
                          cfg_.absorbing_rewards ? &rewards_ : nullptr);
    reward_ind_.assign(g_.node_count(), 0.0);
    for (NodeId r : rewards_.nodes) reward_ind_[r] = 1.0;
}

void Problem::forward(std::span<const double> logits, double tau,
                      std::span<const double> noise,
                      const std::vector<std::span<const double>>& mus, bool keep_tape,
                      ForwardState& fs) const {
    const std::size_t k = param_count();
    if (logits.size() != k) throw DataError("logit vector does not match the mask");
    if (!noise.empty() && noise.size() != k)
        throw DataError("noise vector does not match the mask");

    fs.soft.resize(k);
    fs.soft_mass = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double g = noise.empty() ? 0.0 : noise[i];
        fs.soft[i] = sigmoid((logits[i] + g) / tau);
        fs.soft_mass += fs.soft[i];
    }
    fs.exc = std::max(0.0, fs.soft_mass - cfg_.budget);

    fs.mus = mus;
    fs.group_values.assign(groups_.size(), 0.0);
    fs.tapes.resize(groups_.size());
    for (std::size_t gi = 0; gi < groups_.size(); ++gi)
        fs.group_values[gi] =
            rollout_value(dyn_[gi], fs.soft, reward_ind_, mus[gi], cfg_.horizon,
                          cfg_.gamma, keep_tape ? &fs.tapes[gi] : nullptr);

    double sum = 0.0;
    for (double v : fs.group_values) sum += v;
    fs.mean_value = sum / static_cast<double>(groups_.size());
    fs.dev = 0.0;
    for (double v : fs.group_values) fs.dev += std::abs(v - fs.mean_value);
}

void Problem::backward(const ForwardState& fs, double tau, double lambda_eq,
                       double lambda_b, bool term_objective, bool term_equity,
                       bool term_budget, std::span<double> d_logits) const {
    const std::size_t k = param_count();
    const NodeId n = g_.node_count();
    std::fill(d_logits.begin(), d_logits.end(), 0.0);

    // Budget term reaches the logits through the soft mass alone.
    if (term_budget && fs.exc > 0.0) {
        const double dmass = 2.0 * cfg_.mu_budget * fs.exc + lambda_b;
        for (std::size_t i = 0; i < k; ++i)
            d_logits[i] += dmass * fs.soft[i] * (1.0 - fs.soft[i]) / tau;
    }

    // d loss / d V_g. The deviation term differentiates through the group
    // mean: dDev/dV_g = sign_g - mean(sign), with sign(0) = 0.
    std::vector<double> dv(groups_.size(), 0.0);
    if (term_objective)
        for (double& d : dv) d -= 1.0;
    if (term_equity && fs.dev > 0.0) {
        const double coeff = 2.0 * cfg_.mu_equity * fs.dev + lambda_eq;
        double sign_sum = 0.0;
        std::vector<double> sign(groups_.size(), 0.0);
        for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
            const double diff = fs.group_values[gi] - fs.mean_value;
            sign[gi] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            sign_sum += sign[gi];
        }
        const double mean_sign = sign_sum / static_cast<double>(groups_.size());
        for (std::size_t gi = 0; gi < groups_.size(); ++gi)
            dv[gi] += coeff * (sign[gi] - mean_sign);
    }

    const int T = cfg_.horizon;
    std::vector<double> y(n, 0.0), ynext(n, 0.0);
    std::vector<double> outer;
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
        if (dv[gi] == 0.0) continue;
        const auto& xs = fs.tapes[gi];
        const GroupDynamics& dyn = dyn_[gi];
        outer.assign(dyn.entry_count(), 0.0);

        // y holds d loss / d x_{t+1}; walking t downward accumulates the
        // per-entry transition gradient and pulls y back one step.
        const double top = dv[gi] * std::pow(cfg_.gamma, T - 1);
        for (NodeId v = 0; v < n; ++v) y[v] = top * reward_ind_[v];
        for (int t = T - 2; t >= 0; --t) {
            dyn.accumulate_outer(xs[static_cast<std::size_t>(t)], y, outer);
            dyn.pull(fs.soft, y, ynext);
            const double disc = dv[gi] * std::pow(cfg_.gamma, t);
            for (NodeId v = 0; v < n; ++v) ynext[v] += disc * reward_ind_[v];
            y.swap(ynext);
        }
        dyn.backprop_to_logits(fs.soft, outer, tau, d_logits);
    }
}

double Problem::loss(const EdgeLogits& logits, std::span<const double> noise) const {
    if (!(logits.tau > 0.0)) throw ConfigError("tau must be > 0");
    std::vector<std::span<const double>> mus;
    for (const GroupSpec& grp : groups_) mus.emplace_back(grp.mu0);
    ForwardState fs;
    forward(logits.values, logits.tau, noise, mus, false, fs);
    TrainConfig terms = cfg_;
    return penalized_loss(fs.group_values, fs.soft_mass, terms);
}

std::vector<double> Problem::gradient(const EdgeLogits& logits,
                                      std::span<const double> noise) const {
    if (!(logits.tau > 0.0)) throw ConfigError("tau must be > 0");
    std::vector<std::span<const double>> mus;
    for (const GroupSpec& grp : groups_) mus.emplace_back(grp.mu0);
    ForwardState fs;
    forward(logits.values, logits.tau, noise, mus, true, fs);
    std::vector<double> d(param_count(), 0.0);
    backward(fs, logits.tau, cfg_.lambda_equity, cfg_.lambda_budget, true, true, true,
             d);
    return d;
}

TrainResult Problem::train(std::vector<EpochRecord>* progress) const {
    const std::size_t k = param_count();
    const NodeId n = g_.node_count();

    TrainResult out;
    out.logits.values.assign(k, cfg_.logit_init);
    out.logits.tau = cfg_.tau0;

    double lambda_eq = cfg_.lambda_equity;
    double lambda_b = cfg_.lambda_budget;
    double tau = cfg_.tau0;

    Adam adam(cfg_.learning_rate, k);
    std::vector<double> grad(k, 0.0);
    std::vector<double> noise;
    ForwardState fs;

    std::vector<std::span<const double>> exact_mus;
    for (const GroupSpec& grp : groups_) exact_mus.emplace_back(grp.mu0);

    // Empirical start distributions for minibatch mode, refreshed per batch.
    std::vector<std::vector<double>> sampled(groups_.size(),
                                             std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> start_cum(groups_.size());
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
    bool constraint_step = true; // alternation flag, toggled every batch
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        const bool equity_on = epoch >= cfg_.equity_start_epoch;
        const bool budget_on = epoch >= cfg_.budget_start_epoch;

        for (int mb = 0; mb < cfg_.minibatches_per_epoch; ++mb, ++batch_counter) {
            if (cfg_.gumbel_noise) {
                rng::Stream ns(rng::derive(cfg_.seed, 2 * batch_counter));
                noise.resize(k);
                for (double& g : noise) g = ns.gumbel();
            } else {
                noise.clear();
            }

            std::vector<std::span<const double>> mus = exact_mus;
            if (!cfg_.exact_expectation) {
                rng::Stream ss(rng::derive(cfg_.seed, 2 * batch_counter + 1));
                for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
                    std::fill(sampled[gi].begin(), sampled[gi].end(), 0.0);
                    const double unit = 1.0 / static_cast<double>(cfg_.minibatch);
                    for (int s = 0; s < cfg_.minibatch; ++s) {
                        const std::size_t v =
                            rng::pick_cumulative(start_cum[gi], ss.uniform());
                        sampled[gi][v] += unit;
                    }
                    mus[gi] = sampled[gi];
                }
            }

            const bool t_obj = !constraint_step;
            const bool t_eq = constraint_step && equity_on;
            const bool t_bu = constraint_step && budget_on;
            constraint_step = !constraint_step;

            forward(out.logits.values, tau, noise, mus, true, fs);

            double step_loss = 0.0;
            if (t_obj)
                for (double v : fs.group_values) step_loss -= v;
            if (t_eq)
                step_loss += cfg_.mu_equity * fs.dev * fs.dev + lambda_eq * fs.dev;
            if (t_bu)
                step_loss += cfg_.mu_budget * fs.exc * fs.exc + lambda_b * fs.exc;
            if (!std::isfinite(step_loss))
                throw DivergenceError("non-finite loss at epoch " +
                                      std::to_string(epoch) + ", minibatch " +
                                      std::to_string(mb));

            backward(fs, tau, lambda_eq, lambda_b, t_obj, t_eq, t_bu, grad);
            adam.step(grad, out.logits.values);
        }

        // Epoch bookkeeping on a noise-free exact-expectation evaluation.
        forward(out.logits.values, tau, {}, exact_mus, false, fs);
        double sum_value = 0.0;
        for (double v : fs.group_values) sum_value += v;
        if (!std::isfinite(sum_value))
            throw DivergenceError("non-finite values at epoch " +
                                  std::to_string(epoch));
        const EpochRecord rec{epoch, sum_value, fs.dev, fs.soft_mass, tau,
                              lambda_eq, lambda_b};
        out.trajectory.push_back(rec);
        if (progress) progress->push_back(rec);

        if (equity_on) lambda_eq += cfg_.mu_equity * fs.dev;
        if (budget_on)
            lambda_b = std::max(0.0, lambda_b + cfg_.mu_budget *
                                                    (fs.soft_mass - cfg_.budget));
        if (epoch >= cfg_.anneal_start_epoch) tau *= cfg_.nu;
    }

    out.logits.tau = tau;
    return out;
}

EditSet discretize(const EdgeLogits& logits, const DiGraph& g, std::uint32_t budget) {
    if (logits.values.size() != g.mask().size())
        throw DataError("logit vector does not match the mask");
    std::vector<std::size_t> open;
    for (std::size_t k = 0; k < logits.values.size(); ++k)
        if (logits.values[k] > 0.0) open.push_back(k); // sigmoid(logit) > 0.5
    std::sort(open.begin(), open.end(), [&](std::size_t a, std::size_t b) {
        if (logits.values[a] != logits.values[b])
            return logits.values[a] > logits.values[b];
        return g.mask()[a] < g.mask()[b];
    });
    if (open.size() > budget) open.resize(budget);
    std::vector<Edge> picked;
    picked.reserve(open.size());
    for (std::size_t k : open) picked.push_back(g.mask()[k]);
    return EditSet::from_edges(std::move(picked));
}

double recommended_gamma(double t_adv) {
    if (!(t_adv >= 1.0)) throw ConfigError("advantage horizon must be >= 1");
    return 1.0 - 1.0 / t_adv;
}

} // namespace eqg::mrp
