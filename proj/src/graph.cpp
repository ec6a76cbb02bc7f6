#include "equigraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "equigraph/errors.hpp"

namespace eqg {

const char* weight_rule_name(WeightRule rule) {
    switch (rule) {
    case WeightRule::Uniform: return "uniform";
    case WeightRule::DegreeProduct: return "degree-product";
    case WeightRule::InverseDegreeProduct: return "inverse-degree-product";
    case WeightRule::Explicit: return "explicit";
    }
    return "uniform";
}

WeightRule weight_rule_from_name(const std::string& name) {
    if (name == "uniform") return WeightRule::Uniform;
    if (name == "degree-product") return WeightRule::DegreeProduct;
    if (name == "inverse-degree-product") return WeightRule::InverseDegreeProduct;
    if (name == "explicit") return WeightRule::Explicit;
    throw ConfigError("unknown weight rule: " + name);
}

void GroupSpec::validate(NodeId n) const {
    if (id.empty()) throw DataError("group id must be non-empty");
    if (mu0.size() != n)
        throw DataError("group " + id + ": mu0 has " + std::to_string(mu0.size()) +
                        " entries, graph has " + std::to_string(n) + " nodes");
    double total = 0.0;
    for (double p : mu0) {
        if (!(p >= 0.0)) throw DataError("group " + id + ": negative mu0 entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw DataError("group " + id + ": mu0 sums to " + std::to_string(total));
}

void RewardSet::validate(NodeId n) const {
    if (nodes.empty()) throw DataError("reward set must be non-empty");
    if (!std::is_sorted(nodes.begin(), nodes.end()))
        throw DataError("reward set must be sorted");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i] >= n)
            throw DataError("reward node " + std::to_string(nodes[i]) + " out of range");
        if (i > 0 && nodes[i] == nodes[i - 1])
            throw DataError("duplicate reward node " + std::to_string(nodes[i]));
    }
}

bool RewardSet::contains(NodeId v) const {
    return std::binary_search(nodes.begin(), nodes.end(), v);
}

EditSet EditSet::from_edges(std::vector<Edge> edges) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return EditSet{std::move(edges)};
}

bool EditSet::contains(const Edge& e) const {
    return std::binary_search(additions.begin(), additions.end(), e);
}

namespace {

void check_edge_list(NodeId n, const std::vector<Edge>& edges, const char* what,
                     bool allow_self_loops) {
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Edge& e = edges[i];
        if (e.src >= n || e.dst >= n)
            throw DataError(std::string(what) + " (" + std::to_string(e.src) + "," +
                            std::to_string(e.dst) + ") out of range");
        if (!allow_self_loops && e.src == e.dst)
            throw DataError(std::string(what) + " (" + std::to_string(e.src) + "," +
                            std::to_string(e.dst) + ") is a self-loop");
        if (i > 0 && edges[i] == edges[i - 1])
            throw DataError("duplicate " + std::string(what) + " (" +
                            std::to_string(e.src) + "," + std::to_string(e.dst) + ")");
    }
}

} // namespace

DiGraph::DiGraph(NodeId n, std::vector<Edge> edges, std::vector<Edge> mask,
                 std::map<std::string, std::vector<double>> group_weights,
                 bool allow_self_loops)
    : n_(n), edges_(std::move(edges)), mask_(std::move(mask)),
      group_weights_(std::move(group_weights)) {
    if (n_ == 0) throw DataError("graph must have at least one node");
    std::sort(edges_.begin(), edges_.end());
    std::sort(mask_.begin(), mask_.end());
    check_edge_list(n_, edges_, "edge", allow_self_loops);
    check_edge_list(n_, mask_, "mask edge", allow_self_loops);

    // Mask and edge set must be disjoint.
    for (const Edge& e : mask_)
        if (std::binary_search(edges_.begin(), edges_.end(), e))
            throw DataError("mask edge (" + std::to_string(e.src) + "," +
                            std::to_string(e.dst) + ") already present as an edge");

    for (const auto& [gid, w] : group_weights_) {
        if (w.size() != edges_.size())
            throw DataError("group " + gid + ": " + std::to_string(w.size()) +
                            " weights for " + std::to_string(edges_.size()) + " edges");
        for (double x : w)
            if (!(x > 0.0))
                throw DataError("group " + gid + ": non-positive edge weight");
    }

    // Undirected support degrees: count distinct neighbors regardless of
    // orientation.
    std::set<std::pair<NodeId, NodeId>> support;
    for (const Edge& e : edges_) {
        if (e.src == e.dst) continue;
        support.insert({std::min(e.src, e.dst), std::max(e.src, e.dst)});
    }
    udeg_.assign(n_, 0);
    for (const auto& [a, b] : support) {
        ++udeg_[a];
        ++udeg_[b];
    }
}

bool DiGraph::has_edge(const Edge& e) const {
    return std::binary_search(edges_.begin(), edges_.end(), e);
}

bool DiGraph::has_mask_edge(const Edge& e) const {
    return std::binary_search(mask_.begin(), mask_.end(), e);
}

std::optional<std::size_t> DiGraph::edge_index(const Edge& e) const {
    auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
    if (it == edges_.end() || *it != e) return std::nullopt;
    return static_cast<std::size_t>(it - edges_.begin());
}

std::optional<std::size_t> DiGraph::mask_index(const Edge& e) const {
    auto it = std::lower_bound(mask_.begin(), mask_.end(), e);
    if (it == mask_.end() || *it != e) return std::nullopt;
    return static_cast<std::size_t>(it - mask_.begin());
}

const std::vector<double>* DiGraph::weights_for(const std::string& group_id) const {
    auto it = group_weights_.find(group_id);
    if (it == group_weights_.end()) return nullptr;
    return &it->second;
}

Adjacency build_adjacency(NodeId n, std::span<const Edge> edges, bool reversed) {
    Adjacency adj;
    adj.offsets.assign(n + 1, 0);
    for (const Edge& e : edges) {
        const NodeId from = reversed ? e.dst : e.src;
        ++adj.offsets[from + 1];
    }
    for (NodeId v = 0; v < n; ++v) adj.offsets[v + 1] += adj.offsets[v];
    adj.targets.resize(edges.size());
    std::vector<std::uint32_t> cursor(adj.offsets.begin(), adj.offsets.end() - 1);
    for (const Edge& e : edges) {
        const NodeId from = reversed ? e.dst : e.src;
        const NodeId to = reversed ? e.src : e.dst;
        adj.targets[cursor[from]++] = to;
    }
    return adj;
}

void validate_edits(const DiGraph& g, const EditSet& edits) {
    for (const Edge& e : edits.additions) {
        if (!g.has_mask_edge(e))
            throw DataError("edit (" + std::to_string(e.src) + "," +
                            std::to_string(e.dst) + ") is not in the candidate mask");
        if (g.has_edge(e))
            throw DataError("edit (" + std::to_string(e.src) + "," +
                            std::to_string(e.dst) + ") duplicates an existing edge");
    }
}

std::vector<std::int32_t> distance_to_rewards(const DiGraph& g, const RewardSet& rewards,
                                              const EditSet& edits) {
    rewards.validate(g.node_count());
    validate_edits(g, edits);

    std::vector<Edge> all(g.edges());
    all.insert(all.end(), edits.additions.begin(), edits.additions.end());
    // BFS from the reward set over reversed edges gives, for each node, the
    // forward hop distance to its nearest reward.
    const Adjacency rev = build_adjacency(g.node_count(), all, true);

    std::vector<std::int32_t> dist(g.node_count(), kUnreachable);
    std::vector<NodeId> frontier;
    for (NodeId r : rewards.nodes) {
        dist[r] = 0;
        frontier.push_back(r);
    }
    std::int32_t level = 0;
    std::vector<NodeId> next;
    while (!frontier.empty()) {
        ++level;
        next.clear();
        for (NodeId v : frontier)
            for (NodeId u : rev.out(v))
                if (dist[u] == kUnreachable) {
                    dist[u] = level;
                    next.push_back(u);
                }
        frontier.swap(next);
    }
    return dist;
}

Matrix transition_matrix(const DiGraph& g, std::span<const double> soft_on_mask,
                         const GroupSpec& group) {
    const NodeId n = g.node_count();
    if (soft_on_mask.size() != g.mask().size())
        throw DataError("soft edit vector has " + std::to_string(soft_on_mask.size()) +
                        " entries, mask has " + std::to_string(g.mask().size()));
    for (double s : soft_on_mask)
        if (!(s >= 0.0)) throw DataError("negative soft edit value");

    const std::vector<double>* weights = g.weights_for(group.id);

    Matrix p(n, n);
    std::vector<double> rowsum(n, 0.0);
    const auto& edges = g.edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const double w = weights ? (*weights)[i] : 1.0;
        p(edges[i].src, edges[i].dst) += w;
        rowsum[edges[i].src] += w;
    }
    const auto& mask = g.mask();
    for (std::size_t k = 0; k < mask.size(); ++k) {
        p(mask[k].src, mask[k].dst) += soft_on_mask[k];
        rowsum[mask[k].src] += soft_on_mask[k];
    }
    for (NodeId i = 0; i < n; ++i) {
        if (rowsum[i] == 0.0) {
            p(i, i) = 1.0; // dangling row: stay put
            continue;
        }
        for (NodeId j = 0; j < n; ++j) p(i, j) /= rowsum[i];
    }
    return p;
}

std::size_t hamming(const EditSet& a, const EditSet& b) {
    std::size_t common = 0;
    auto ia = a.additions.begin();
    auto ib = b.additions.begin();
    while (ia != a.additions.end() && ib != b.additions.end()) {
        if (*ia < *ib)
            ++ia;
        else if (*ib < *ia)
            ++ib;
        else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    return a.additions.size() + b.additions.size() - 2 * common;
}

std::vector<Edge> complement_mask(NodeId n, std::span<const Edge> edges) {
    std::vector<Edge> sorted(edges.begin(), edges.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<Edge> out;
    out.reserve(static_cast<std::size_t>(n) * (n - 1) - sorted.size());
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = 0; j < n; ++j) {
            if (i == j) continue;
            const Edge e{i, j};
            if (!std::binary_search(sorted.begin(), sorted.end(), e)) out.push_back(e);
        }
    return out;
}

std::vector<double> uniform_distribution(NodeId n) {
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

std::vector<double> uniform_over(NodeId n, std::span<const NodeId> support) {
    if (support.empty()) throw DataError("uniform_over: empty support");
    std::vector<double> mu(n, 0.0);
    const double p = 1.0 / static_cast<double>(support.size());
    for (NodeId v : support) {
        if (v >= n) throw DataError("uniform_over: node out of range");
        mu[v] = p;
    }
    return mu;
}

} // namespace eqg
