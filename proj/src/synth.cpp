#include "equigraph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "equigraph/errors.hpp"
#include "equigraph/rng.hpp"

namespace eqg::synth {

const char* ensemble_name(Ensemble e) {
    switch (e) {
    case Ensemble::ER: return "ER";
    case Ensemble::PA: return "PA";
    case Ensemble::CL: return "CL";
    case Ensemble::SBM: return "SBM";
    }
    return "ER";
}

Ensemble ensemble_from_name(const std::string& name) {
    if (name == "ER" || name == "er") return Ensemble::ER;
    if (name == "PA" || name == "pa") return Ensemble::PA;
    if (name == "CL" || name == "cl") return Ensemble::CL;
    if (name == "SBM" || name == "sbm") return Ensemble::SBM;
    throw ConfigError("ensemble.kind: unknown ensemble " + name);
}

void EnsembleConfig::validate() const {
    if (n < 1) throw ConfigError("ensemble.n: must be >= 1");
    switch (kind) {
    case Ensemble::ER:
        if (!(er_p >= 0.0 && er_p <= 1.0)) throw ConfigError("ensemble.p: must be in [0,1]");
        break;
    case Ensemble::PA:
        if (pa_m < 1) throw ConfigError("ensemble.m: must be >= 1");
        if (pa_m >= n) throw ConfigError("ensemble.m: must be < n");
        if (!(pa_p >= 0.0 && pa_p <= 1.0)) throw ConfigError("ensemble.p: must be in [0,1]");
        break;
    case Ensemble::CL:
        if (n < 2) throw ConfigError("ensemble.n: CL needs n >= 2");
        if (!(cl_gamma >= 0.0)) throw ConfigError("ensemble.gamma: must be >= 0");
        break;
    case Ensemble::SBM: {
        if (sbm_clusters < 1) throw ConfigError("ensemble.clusters: must be >= 1");
        if (sbm_probs.size() != sbm_clusters)
            throw ConfigError("ensemble.probs: must be a clusters x clusters matrix");
        for (const auto& row : sbm_probs) {
            if (row.size() != sbm_clusters)
                throw ConfigError("ensemble.probs: must be a clusters x clusters matrix");
            for (double p : row)
                if (!(p >= 0.0 && p <= 1.0))
                    throw ConfigError("ensemble.probs: entries must be in [0,1]");
        }
        break;
    }
    }
}

namespace {

// Emit both orientations of an undirected edge list.
std::vector<Edge> symmetrize(const std::set<std::pair<NodeId, NodeId>>& und) {
    std::vector<Edge> edges;
    edges.reserve(und.size() * 2);
    for (const auto& [a, b] : und) {
        edges.push_back({a, b});
        edges.push_back({b, a});
    }
    return edges;
}

std::set<std::pair<NodeId, NodeId>> gen_er(NodeId n, double p, rng::Stream& rs) {
    std::set<std::pair<NodeId, NodeId>> und;
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = i + 1; j < n; ++j)
            if (rs.uniform() < p) und.insert({i, j});
    return und;
}

// Holme-Kim growth: each new node makes one preferential attachment, then
// with probability p closes a triangle on the previous target, otherwise
// attaches preferentially again.
std::set<std::pair<NodeId, NodeId>> gen_pa(NodeId n, std::uint32_t m, double p,
                                           rng::Stream& rs) {
    std::set<std::pair<NodeId, NodeId>> und;
    std::vector<std::vector<NodeId>> adj(n);
    std::vector<NodeId> repeated; // nodes with multiplicity proportional to degree

    auto connected = [&](NodeId a, NodeId b) {
        return und.count({std::min(a, b), std::max(a, b)}) > 0;
    };
    auto add_edge = [&](NodeId a, NodeId b) {
        und.insert({std::min(a, b), std::max(a, b)});
        adj[a].push_back(b);
        adj[b].push_back(a);
        repeated.push_back(a);
        repeated.push_back(b);
    };

    // Node m connects to all m seed nodes; growth proceeds from there.
    for (NodeId t = 0; t < m; ++t) add_edge(m, t);

    auto preferential = [&](NodeId v) -> std::int64_t {
        for (int tries = 0; tries < 64; ++tries) {
            const NodeId cand = repeated[rs.below(repeated.size())];
            if (cand != v && !connected(v, cand)) return cand;
        }
        for (NodeId cand = 0; cand < v; ++cand) // saturated sampling, scan instead
            if (!connected(v, cand)) return cand;
        return -1;
    };

    for (NodeId v = m + 1; v < n; ++v) {
        std::int64_t last = preferential(v);
        if (last < 0) continue;
        add_edge(v, static_cast<NodeId>(last));
        for (std::uint32_t step = 1; step < m; ++step) {
            std::int64_t target = -1;
            if (rs.uniform() < p) {
                // Triangle closure: uniform unconnected neighbor of `last`.
                std::vector<NodeId> open;
                for (NodeId w : adj[static_cast<NodeId>(last)])
                    if (w != v && !connected(v, w)) open.push_back(w);
                if (!open.empty()) target = open[rs.below(open.size())];
            }
            if (target < 0) target = preferential(v);
            if (target < 0) break;
            add_edge(v, static_cast<NodeId>(target));
            last = target;
        }
    }
    return und;
}

std::set<std::pair<NodeId, NodeId>> gen_cl(NodeId n, double gamma, rng::Stream& rs) {
    // Expected degrees from a discrete power law on [1, n-1]; edge (i,j) kept
    // with probability min(1, w_i w_j / sum w). Per-pair sampling yields
    // neither self-loops nor multi-edges.
    std::vector<double> cum(n - 1);
    double total = 0.0;
    for (NodeId k = 1; k < n; ++k) {
        total += std::pow(static_cast<double>(k), -gamma);
        cum[k - 1] = total;
    }
    std::vector<double> w(n);
    double wsum = 0.0;
    for (NodeId i = 0; i < n; ++i) {
        const std::size_t idx = rng::pick_cumulative(cum, rs.uniform());
        w[i] = static_cast<double>(idx + 1);
        wsum += w[i];
    }
    std::set<std::pair<NodeId, NodeId>> und;
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = i + 1; j < n; ++j) {
            const double p = std::min(1.0, w[i] * w[j] / wsum);
            if (rs.uniform() < p) und.insert({i, j});
        }
    return und;
}

std::vector<NodeId> sbm_membership(NodeId n, std::uint32_t clusters) {
    std::vector<NodeId> cluster(n);
    const NodeId base = n / clusters;
    const NodeId extra = n % clusters;
    NodeId node = 0;
    for (std::uint32_t c = 0; c < clusters; ++c) {
        const NodeId size = base + (c < extra ? 1 : 0);
        for (NodeId k = 0; k < size; ++k) cluster[node++] = c;
    }
    return cluster;
}

std::set<std::pair<NodeId, NodeId>> gen_sbm(NodeId n, const EnsembleConfig& cfg,
                                            const std::vector<NodeId>& cluster,
                                            rng::Stream& rs) {
    std::set<std::pair<NodeId, NodeId>> und;
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = i + 1; j < n; ++j) {
            const NodeId a = std::min(cluster[i], cluster[j]);
            const NodeId b = std::max(cluster[i], cluster[j]);
            if (rs.uniform() < cfg.sbm_probs[a][b]) und.insert({i, j});
        }
    return und;
}

} // namespace

GenResult generate(const EnsembleConfig& config, std::uint64_t seed) {
    config.validate();
    rng::Stream rs(seed);
    std::set<std::pair<NodeId, NodeId>> und;
    std::vector<NodeId> cluster;
    switch (config.kind) {
    case Ensemble::ER: und = gen_er(config.n, config.er_p, rs); break;
    case Ensemble::PA: und = gen_pa(config.n, config.pa_m, config.pa_p, rs); break;
    case Ensemble::CL: und = gen_cl(config.n, config.cl_gamma, rs); break;
    case Ensemble::SBM:
        cluster = sbm_membership(config.n, config.sbm_clusters);
        und = gen_sbm(config.n, config, cluster, rs);
        break;
    }
    return GenResult{DiGraph(config.n, symmetrize(und)), std::move(cluster)};
}

std::vector<double> assign_group_weights(const DiGraph& graph, WeightRule rule) {
    if (rule == WeightRule::Explicit)
        throw ConfigError("explicit weights are data, not a rule");
    const auto& deg = graph.undirected_degrees();
    std::vector<double> w(graph.edges().size(), 1.0);
    if (rule == WeightRule::Uniform) return w;
    for (std::size_t i = 0; i < graph.edges().size(); ++i) {
        const Edge& e = graph.edges()[i];
        const double prod =
            static_cast<double>(deg[e.src]) * static_cast<double>(deg[e.dst]);
        w[i] = rule == WeightRule::DegreeProduct ? prod : 1.0 / prod;
    }
    return w;
}

const char* reward_mode_name(RewardMode m) {
    return m == RewardMode::HighDegree ? "high-degree" : "low-degree";
}

RewardMode reward_mode_from_name(const std::string& name) {
    if (name == "high-degree") return RewardMode::HighDegree;
    if (name == "low-degree") return RewardMode::LowDegree;
    throw ConfigError("rewards.mode: unknown mode " + name);
}

RewardSet place_rewards(const DiGraph& graph, std::uint32_t k, RewardMode mode,
                        std::uint64_t seed) {
    const auto& deg = graph.undirected_degrees();
    std::vector<NodeId> eligible;
    for (NodeId v = 0; v < graph.node_count(); ++v)
        if (deg[v] > 0) eligible.push_back(v);
    if (k < 1) throw ConfigError("rewards.k: must be >= 1");
    if (k > eligible.size())
        throw ConfigError("rewards.k: " + std::to_string(k) + " exceeds the " +
                          std::to_string(eligible.size()) + " non-isolated nodes");

    std::vector<double> w(eligible.size());
    for (std::size_t i = 0; i < eligible.size(); ++i) {
        const double d = static_cast<double>(deg[eligible[i]]);
        w[i] = mode == RewardMode::HighDegree ? d : 1.0 / d;
    }

    rng::Stream rs(seed);
    std::vector<NodeId> chosen;
    std::vector<double> cum(eligible.size());
    for (std::uint32_t draw = 0; draw < k; ++draw) {
        double total = 0.0;
        for (std::size_t i = 0; i < eligible.size(); ++i) {
            total += w[i];
            cum[i] = total;
        }
        const std::size_t idx = rng::pick_cumulative(cum, rs.uniform());
        chosen.push_back(eligible[idx]);
        // Without replacement: drop the drawn node and renormalize next round.
        eligible.erase(eligible.begin() + static_cast<std::ptrdiff_t>(idx));
        w.erase(w.begin() + static_cast<std::ptrdiff_t>(idx));
        cum.pop_back();
    }
    std::sort(chosen.begin(), chosen.end());
    return RewardSet{std::move(chosen)};
}

std::vector<double> random_initial_distribution(NodeId n) {
    return uniform_distribution(n);
}

} // namespace eqg::synth
