#include "equigraph/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "equigraph/dynamics.hpp"
#include "equigraph/errors.hpp"
#include "equigraph/rng.hpp"

namespace eqg::metrics {

const char* hit_mode_name(HitMode m) {
    return m == HitMode::FirstHit ? "first-hit" : "accumulate";
}

HitMode hit_mode_from_name(const std::string& name) {
    if (name == "first-hit") return HitMode::FirstHit;
    if (name == "accumulate") return HitMode::Accumulate;
    throw ConfigError("eval.hit_mode: unknown mode " + name);
}

const char* pooled_mode_name(PooledMode m) {
    return m == PooledMode::Individuals ? "individuals" : "group-means";
}

PooledMode pooled_mode_from_name(const std::string& name) {
    if (name == "individuals") return PooledMode::Individuals;
    if (name == "group-means") return PooledMode::GroupMeans;
    throw ConfigError("eval.pooled: unknown mode " + name);
}

void EvalSettings::validate() const {
    if (walks < 1) throw ConfigError("eval.walks: must be >= 1");
    if (horizon < 1) throw ConfigError("eval.horizon: must be >= 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("eval.gamma: must be in [0,1]");
}

namespace {

std::vector<double> hard_soft_vector(const DiGraph& g, const EditSet& edits) {
    validate_edits(g, edits);
    std::vector<double> soft(g.mask().size(), 0.0);
    for (const Edge& e : edits.additions) soft[*g.mask_index(e)] = 1.0;
    return soft;
}

std::vector<double> reward_indicator(NodeId n, const RewardSet& rewards) {
    std::vector<double> r(n, 0.0);
    for (NodeId v : rewards.nodes) r[v] = 1.0;
    return r;
}

// Per-node cumulative weights for walk stepping: original edges at their
// group weight plus edit edges at unit weight. Built once per evaluation.
struct WalkTable {
    std::vector<std::uint32_t> offsets;
    std::vector<NodeId> targets;
    std::vector<double> cum; // per-row cumulative weights

    WalkTable(const DiGraph& g, const GroupSpec& group, const EditSet& edits) {
        const NodeId n = g.node_count();
        const std::vector<double>* weights = g.weights_for(group.id);

        std::vector<std::uint32_t> count(n, 0);
        for (const Edge& e : g.edges()) ++count[e.src];
        for (const Edge& e : edits.additions) ++count[e.src];
        offsets.assign(n + 1, 0);
        for (NodeId v = 0; v < n; ++v) offsets[v + 1] = offsets[v] + count[v];
        targets.resize(offsets[n]);
        cum.resize(offsets[n]);

        std::vector<std::uint32_t> cursor(offsets.begin(), offsets.end() - 1);
        std::vector<double> row(offsets[n], 0.0);
        for (std::size_t i = 0; i < g.edges().size(); ++i) {
            const Edge& e = g.edges()[i];
            const std::uint32_t at = cursor[e.src]++;
            targets[at] = e.dst;
            row[at] = weights ? (*weights)[i] : 1.0;
        }
        for (const Edge& e : edits.additions) {
            const std::uint32_t at = cursor[e.src]++;
            targets[at] = e.dst;
            row[at] = 1.0;
        }
        for (NodeId v = 0; v < n; ++v) {
            double total = 0.0;
            for (std::uint32_t e = offsets[v]; e < offsets[v + 1]; ++e) {
                total += row[e];
                cum[e] = total;
            }
        }
    }

    // Next node, or -1 for a sink row (walk stays put from then on).
    std::int64_t step(NodeId v, rng::Stream& rs) const {
        const std::uint32_t lo = offsets[v], hi = offsets[v + 1];
        if (lo == hi || cum[hi - 1] == 0.0) return -1;
        const std::span<const double> row(cum.data() + lo, hi - lo);
        return targets[lo + rng::pick_cumulative(row, rs.uniform())];
    }
};

} // namespace

double group_utility_exact(const DiGraph& g, const RewardSet& rewards,
                           const GroupSpec& group, const EditSet& edits) {
    group.validate(g.node_count());
    const std::vector<std::int32_t> dist = distance_to_rewards(g, rewards, edits);
    double u = 0.0;
    for (NodeId v = 0; v < g.node_count(); ++v) {
        if (group.mu0[v] == 0.0 || dist[v] == kUnreachable) continue;
        const double access = dist[v] == 0 ? 1.0 : 1.0 / static_cast<double>(dist[v]);
        u += group.mu0[v] * access;
    }
    return u;
}

std::vector<double> walk_rewards(const DiGraph& g, const RewardSet& rewards,
                                 const GroupSpec& group, const EditSet& edits,
                                 const EvalSettings& settings) {
    settings.validate();
    group.validate(g.node_count());
    rewards.validate(g.node_count());
    validate_edits(g, edits);

    const WalkTable table(g, group, edits);
    std::vector<double> start_cum(g.node_count());
    double total = 0.0;
    for (NodeId v = 0; v < g.node_count(); ++v) {
        total += group.mu0[v];
        start_cum[v] = total;
    }

    const int T = settings.horizon;
    std::vector<double> rewards_out;
    rewards_out.reserve(static_cast<std::size_t>(settings.walks));
    for (int w = 0; w < settings.walks; ++w) {
        rng::Stream rs(rng::derive(settings.seed, static_cast<std::uint64_t>(w)));
        NodeId node =
            static_cast<NodeId>(rng::pick_cumulative(start_cum, rs.uniform()));
        double r = 0.0;
        if (settings.hit_mode == HitMode::FirstHit) {
            if (rewards.contains(node)) {
                r = 1.0;
            } else {
                double disc = 1.0;
                for (int t = 1; t < T; ++t) {
                    const std::int64_t next = table.step(node, rs);
                    if (next < 0) break; // sink: the walk never progresses
                    node = static_cast<NodeId>(next);
                    disc *= settings.gamma;
                    if (rewards.contains(node)) {
                        r = disc;
                        break;
                    }
                }
            }
        } else {
            double disc = 1.0;
            for (int t = 0; t < T; ++t) {
                if (rewards.contains(node)) r += disc;
                if (t + 1 < T) {
                    const std::int64_t next = table.step(node, rs);
                    if (next >= 0) node = static_cast<NodeId>(next);
                    disc *= settings.gamma;
                }
            }
        }
        rewards_out.push_back(r);
    }
    return rewards_out;
}

namespace {

std::pair<double, double> mean_stderr(std::span<const double> xs) {
    const std::size_t n = xs.size();
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(n);
    if (n < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double var = ss / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

} // namespace

std::pair<double, double> monte_carlo_reward(const DiGraph& g, const RewardSet& rewards,
                                             const GroupSpec& group, const EditSet& edits,
                                             const EvalSettings& settings) {
    return mean_stderr(walk_rewards(g, rewards, group, edits, settings));
}

double gini(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) throw DataError("gini: empty sample");
    double total = 0.0;
    for (double x : values) {
        if (!(x >= 0.0)) throw DataError("gini: negative value");
        total += x;
    }
    if (total == 0.0) return 0.0;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) return 0.0; // constant sample
    // sum_ij |x_i - x_j| = 2 * sum_i (2i - n + 1) x_(i) over ascending order.
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += (2.0 * static_cast<double>(i) - static_cast<double>(n) + 1.0) * sorted[i];
    // acc >= 0 mathematically; rounding on near-constant samples can leave it
    // a hair under zero, so clamp at the lower bound.
    return std::max(0.0, acc / (static_cast<double>(n) * total));
}

MeanShortestPath mean_shortest_path(const DiGraph& g, const RewardSet& rewards,
                                    const GroupSpec& group, const EditSet& edits) {
    group.validate(g.node_count());
    const std::vector<std::int32_t> dist = distance_to_rewards(g, rewards, edits);
    double reach_mass = 0.0, reach_sum = 0.0, lost = 0.0;
    for (NodeId v = 0; v < g.node_count(); ++v) {
        const double m = group.mu0[v];
        if (m == 0.0) continue;
        if (dist[v] == kUnreachable) {
            lost += m;
        } else {
            reach_mass += m;
            reach_sum += m * static_cast<double>(dist[v]);
        }
    }
    if (reach_mass == 0.0)
        throw DataError("group " + group.id + ": support entirely unreachable");
    return {reach_sum / reach_mass, lost};
}

double first_hit_value(const DiGraph& g, const RewardSet& rewards, const GroupSpec& group,
                       const EditSet& edits, int horizon, double gamma) {
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    rewards.validate(g.node_count());
    group.validate(g.node_count());
    const std::vector<double> soft = hard_soft_vector(g, edits);
    const GroupDynamics dyn(g, group, true, &rewards);
    const NodeId n = g.node_count();

    std::vector<double> x(group.mu0.begin(), group.mu0.end());
    std::vector<double> next(n, 0.0);
    double value = 0.0, absorbed_prev = 0.0, disc = 1.0;
    for (int t = 0; t < horizon; ++t) {
        double absorbed = 0.0;
        for (NodeId r : rewards.nodes) absorbed += x[r];
        value += disc * (absorbed - absorbed_prev);
        absorbed_prev = absorbed;
        if (t + 1 < horizon) {
            dyn.push(soft, x, next);
            x.swap(next);
            disc *= gamma;
        }
    }
    return value;
}

double accumulate_value(const DiGraph& g, const RewardSet& rewards, const GroupSpec& group,
                        const EditSet& edits, int horizon, double gamma) {
    rewards.validate(g.node_count());
    group.validate(g.node_count());
    const std::vector<double> soft = hard_soft_vector(g, edits);
    const GroupDynamics dyn(g, group, true);
    const std::vector<double> r = reward_indicator(g.node_count(), rewards);
    return rollout_value(dyn, soft, r, group.mu0, horizon, gamma);
}

double EvalReport::mean_exact_utility() const {
    double acc = 0.0;
    for (const GroupMetrics& m : per_group) acc += m.exact_utility;
    return per_group.empty() ? 0.0 : acc / static_cast<double>(per_group.size());
}

EvalReport full_report(const DiGraph& g, const RewardSet& rewards,
                       const std::vector<GroupSpec>& groups, const EditSet& edits,
                       const EvalSettings& settings) {
    settings.validate();
    if (groups.empty()) throw ConfigError("at least one group is required");

    EvalReport report;
    report.settings = settings;
    report.walks_per_group = settings.walks;

    std::vector<double> pooled;
    std::vector<double> group_means;
    pooled.reserve(static_cast<std::size_t>(settings.walks) * groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const GroupSpec& grp = groups[gi];
        EvalSettings per = settings;
        per.seed = rng::derive(settings.seed, gi); // independent stream per group

        GroupMetrics m;
        m.exact_utility = group_utility_exact(g, rewards, grp, edits);
        const MeanShortestPath sp = mean_shortest_path(g, rewards, grp, edits);
        m.mean_shortest_path = sp.mean_hops;
        m.unreachable_mass = sp.unreachable_mass;

        const std::vector<double> samples = walk_rewards(g, rewards, grp, edits, per);
        const auto [mean, se] = mean_stderr(samples);
        m.mc_mean = mean;
        m.mc_stderr = se;
        m.walks = settings.walks;
        m.intra_gini = gini(samples);

        pooled.insert(pooled.end(), samples.begin(), samples.end());
        group_means.push_back(mean);
        report.group_ids.push_back(grp.id);
        report.per_group.push_back(m);
    }

    double pooled_sum = 0.0;
    for (double x : pooled) pooled_sum += x;
    report.pooled_mean = pooled_sum / static_cast<double>(pooled.size());
    report.pooled_gini = settings.pooled == PooledMode::Individuals
                             ? gini(pooled)
                             : gini(group_means);
    return report;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["walks_per_group"] = walks_per_group;
    j["pooled_gini"] = pooled_gini;
    j["pooled_mean"] = pooled_mean;
    j["mean_exact_utility"] = mean_exact_utility();
    j["settings"] = {{"walks", settings.walks},
                     {"horizon", settings.horizon},
                     {"gamma", settings.gamma},
                     {"seed", settings.seed},
                     {"hit_mode", hit_mode_name(settings.hit_mode)},
                     {"pooled", pooled_mode_name(settings.pooled)}};
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t i = 0; i < per_group.size(); ++i) {
        const GroupMetrics& m = per_group[i];
        per.push_back({{"group", group_ids[i]},
                       {"exact_utility", m.exact_utility},
                       {"mc_mean", m.mc_mean},
                       {"mc_stderr", m.mc_stderr},
                       {"walks", m.walks},
                       {"mean_shortest_path", m.mean_shortest_path},
                       {"unreachable_mass", m.unreachable_mass},
                       {"intra_gini", m.intra_gini}});
    }
    j["groups"] = std::move(per);
    return j.dump(2);
}

} // namespace eqg::metrics
