#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "equigraph/matrix.hpp"

namespace eqg {

using NodeId = std::uint32_t;

struct Edge {
    NodeId src = 0;
    NodeId dst = 0;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Hop distance marker for "no path". Kept as an explicit sentinel; consumers
// branch on it rather than relying on a large finite stand-in.
inline constexpr std::int32_t kUnreachable = -1;

enum class WeightRule {
    Uniform,              // every edge weight 1
    DegreeProduct,        // w(i,j) = deg(i) * deg(j), symmetrized degrees
    InverseDegreeProduct, // w(i,j) = 1 / (deg(i) * deg(j))
    Explicit,             // weights supplied directly
};

const char* weight_rule_name(WeightRule rule);
WeightRule weight_rule_from_name(const std::string& name);

// One population of walkers: an id, a start distribution over nodes, and the
// rule that produced its edge weights.
struct GroupSpec {
    std::string id;
    std::vector<double> mu0;                      // start distribution, sums to 1
    WeightRule weight_rule = WeightRule::Uniform;

    // Throws DataError unless mu0 is a distribution over n nodes (entries
    // non-negative, total within 1e-9 of 1).
    void validate(NodeId n) const;
};

struct RewardSet {
    std::vector<NodeId> nodes; // sorted, unique, non-empty

    void validate(NodeId n) const;
    bool contains(NodeId v) const;
};

// Edges to add, all drawn from the graph's candidate mask.
struct EditSet {
    std::vector<Edge> additions; // sorted, unique

    static EditSet from_edges(std::vector<Edge> edges);
    std::size_t size() const { return additions.size(); }
    bool contains(const Edge& e) const;
};

// Immutable directed graph with an explicit candidate mask and optional
// per-group edge weights. Construction validates every invariant; after that
// all operations are const and safe to share across threads.
class DiGraph {
public:
    DiGraph(NodeId n, std::vector<Edge> edges, std::vector<Edge> mask = {},
            std::map<std::string, std::vector<double>> group_weights = {},
            bool allow_self_loops = false);

    NodeId node_count() const { return n_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<Edge>& mask() const { return mask_; }

    bool has_edge(const Edge& e) const;
    bool has_mask_edge(const Edge& e) const;
    // Position of e in edges() / mask(); nullopt when absent.
    std::optional<std::size_t> edge_index(const Edge& e) const;
    std::optional<std::size_t> mask_index(const Edge& e) const;

    // Weight vector aligned with edges() for a group id, or nullptr when the
    // group uses unit weights.
    const std::vector<double>* weights_for(const std::string& group_id) const;
    const std::map<std::string, std::vector<double>>& group_weights() const {
        return group_weights_;
    }

    // Degree in the undirected support: number of distinct neighbors over
    // edges taken without orientation.
    const std::vector<std::uint32_t>& undirected_degrees() const { return udeg_; }

private:
    NodeId n_;
    std::vector<Edge> edges_;
    std::vector<Edge> mask_;
    std::map<std::string, std::vector<double>> group_weights_;
    std::vector<std::uint32_t> udeg_;
};

// Forward-star adjacency over an edge list.
struct Adjacency {
    std::vector<std::uint32_t> offsets; // size n+1
    std::vector<NodeId> targets;

    std::span<const NodeId> out(NodeId v) const {
        return {targets.data() + offsets[v], targets.data() + offsets[v + 1]};
    }
};

Adjacency build_adjacency(NodeId n, std::span<const Edge> edges, bool reversed);

// Throws DataError if any addition lies outside the mask or duplicates an
// existing edge.
void validate_edits(const DiGraph& g, const EditSet& edits);

// Hop distance from every node to the nearest reward node over
// edges() plus edits. Unreachable nodes get kUnreachable.
std::vector<std::int32_t> distance_to_rewards(const DiGraph& g, const RewardSet& rewards,
                                              const EditSet& edits = {});

// Dense row-stochastic transition matrix for one group. Original edges
// contribute their group weight, mask edges contribute soft_on_mask[k] times a
// unit weight, rows with zero total weight fall back to a self-loop.
// soft_on_mask is aligned with g.mask(); entries must be non-negative.
Matrix transition_matrix(const DiGraph& g, std::span<const double> soft_on_mask,
                         const GroupSpec& group);

// Size of the symmetric difference between two addition sets.
std::size_t hamming(const EditSet& a, const EditSet& b);

// All ordered pairs (i,j), i != j, that are not edges: the default candidate
// mask for synthetic experiments.
std::vector<Edge> complement_mask(NodeId n, std::span<const Edge> edges);

// mu0 helpers used when assembling experiment bundles.
std::vector<double> uniform_distribution(NodeId n);
std::vector<double> uniform_over(NodeId n, std::span<const NodeId> support);

} // namespace eqg
