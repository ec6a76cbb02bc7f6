#include "equigraph/geci.hpp"

#include <algorithm>
#include <limits>

#include "equigraph/errors.hpp"

namespace eqg::geci {

void GeciConfig::validate() const {
    if (horizon < 1) throw ConfigError("geci.horizon: must be >= 1");
}

namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

std::int64_t lifted(std::int32_t d) { return d == kUnreachable ? kInf : d; }

double access(std::int64_t d) {
    if (d >= kInf) return 0.0;
    return d == 0 ? 1.0 : 1.0 / static_cast<double>(d);
}

std::vector<std::int32_t> bfs_from(const Adjacency& adj, NodeId n, NodeId source) {
    std::vector<std::int32_t> dist(n, kUnreachable);
    std::vector<NodeId> frontier{source}, next;
    dist[source] = 0;
    std::int32_t level = 0;
    while (!frontier.empty()) {
        ++level;
        next.clear();
        for (NodeId v : frontier)
            for (NodeId u : adj.out(v))
                if (dist[u] == kUnreachable) {
                    dist[u] = level;
                    next.push_back(u);
                }
        frontier.swap(next);
    }
    return dist;
}

double utility_from_dist(const GroupSpec& g, const std::vector<std::int32_t>& dist) {
    double u = 0.0;
    for (NodeId v = 0; v < dist.size(); ++v)
        if (g.mu0[v] > 0.0) u += g.mu0[v] * access(lifted(dist[v]));
    return u;
}

} // namespace

std::vector<NodeId> reward_neighborhood(const DiGraph& g, const RewardSet& rewards,
                                        const EditSet& edits, int hops) {
    const std::vector<std::int32_t> dist = distance_to_rewards(g, rewards, edits);
    std::vector<NodeId> out;
    for (NodeId v = 0; v < g.node_count(); ++v)
        if (dist[v] != kUnreachable && dist[v] <= hops) out.push_back(v);
    return out;
}

GeciResult geci_augment(const DiGraph& g, const std::vector<GroupSpec>& groups,
                        const RewardSet& rewards, const GeciConfig& config) {
    config.validate();
    if (groups.empty()) throw ConfigError("at least one group is required");
    if (g.mask().empty()) throw DataError("candidate mask is empty");
    rewards.validate(g.node_count());
    for (const GroupSpec& grp : groups) grp.validate(g.node_count());

    const NodeId n = g.node_count();
    GeciResult result;
    std::vector<char> taken(g.mask().size(), 0);

    for (std::uint32_t step = 0; step < config.budget; ++step) {
        const std::vector<std::int32_t> dist =
            distance_to_rewards(g, rewards, result.edits);

        std::size_t worst = 0;
        double worst_u = std::numeric_limits<double>::infinity();
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            const double u = utility_from_dist(groups[gi], dist);
            if (u < worst_u) { // strict: ties keep declaration order
                worst_u = u;
                worst = gi;
            }
        }
        const GroupSpec& target = groups[worst];

        // x -> u distances are shared across candidates with the same tail.
        std::vector<Edge> all(g.edges());
        all.insert(all.end(), result.edits.additions.begin(),
                   result.edits.additions.end());
        const Adjacency rev = build_adjacency(n, all, true);
        std::vector<std::vector<std::int32_t>> to_tail(n);
        std::vector<char> have_tail(n, 0);

        double best_gain = 0.0;
        std::size_t best_idx = g.mask().size();
        double best_after = worst_u;
        for (std::size_t k = 0; k < g.mask().size(); ++k) {
            if (taken[k]) continue;
            const Edge e = g.mask()[k];
            const std::int64_t dv = lifted(dist[e.dst]);
            if (dv >= kInf) continue; // head cannot reach a reward: no effect
            if (config.prune) {
                if (dv > config.horizon - 1) continue;
                const std::int64_t du = lifted(dist[e.src]);
                // An edge with du <= dv+1 cannot shorten any distance.
                if (du <= dv + 1) continue;
            }
            if (!have_tail[e.src]) {
                to_tail[e.src] = bfs_from(rev, n, e.src);
                have_tail[e.src] = 1;
            }
            const std::vector<std::int32_t>& dxu = to_tail[e.src];
            // Exact post-edit utility: a single added edge (u,v) changes the
            // distance of x to min(dist(x), d(x,u) + 1 + dist(v)).
            double after = 0.0;
            for (NodeId x = 0; x < n; ++x) {
                if (target.mu0[x] == 0.0) continue;
                const std::int64_t via = lifted(dxu[x]) + 1 + dv;
                after += target.mu0[x] * access(std::min(lifted(dist[x]), via));
            }
            const double gain = after - worst_u;
            if (gain > best_gain) { // strict: ties keep the first (lexicographic)
                best_gain = gain;
                best_idx = k;
                best_after = after;
            }
        }

        if (best_idx == g.mask().size()) break; // no candidate improves
        taken[best_idx] = 1;
        const Edge chosen = g.mask()[best_idx];
        result.edits.additions.push_back(chosen);
        std::sort(result.edits.additions.begin(), result.edits.additions.end());
        result.trace.push_back({target.id, chosen, worst_u, best_after});
    }
    return result;
}

} // namespace eqg::geci
