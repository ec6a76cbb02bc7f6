#pragma once

#include <span>
#include <string>
#include <vector>

#include "equigraph/graph.hpp"

namespace eqg::ingest {

// Geographic position in decimal degrees.
struct Coord {
    double lat = 0.0;
    double lon = 0.0;
    friend bool operator==(const Coord&, const Coord&) = default;
};

// A dataset on disk: graph structure, group start distributions, reward
// nodes, and optionally one coordinate per node. Edge weights are not part of
// the on-disk contract; they are derived (by rule or from distances) when an
// experiment assembles its transition dynamics.
struct Bundle {
    DiGraph graph;
    std::vector<GroupSpec> groups; // sorted by id
    RewardSet rewards;
    std::vector<Coord> coords; // empty, or exactly one per node

    bool has_coords() const { return !coords.empty(); }
};

// Reads the JSON manifest naming the CSV files (paths relative to the
// manifest) and loads them. Manifest keys: nodes, edges, mask, groups,
// rewards, and optionally coordinates. Malformed rows are reported as
// file:line. Group distributions within 1e-6 of total 1 are renormalized;
// anything further off is an error.
Bundle load_bundle(const std::string& manifest_path);

// Writes manifest.json plus the CSV files into dir (created if absent).
// Output is canonical: sorted rows, shortest round-trip number formatting, so
// equal bundles serialize byte-identically.
void save_bundle(const Bundle& b, const std::string& dir);

// Great-circle distance in meters on a sphere of radius 6 371 000 m.
double haversine_m(const Coord& a, const Coord& b);

// Adds one node per facility, linked bidirectionally to its k_nn nearest
// transport nodes by great-circle distance (ties by node id). The facility
// nodes replace the reward set; group start distributions extend with zeros;
// the candidate mask is kept; derived edge weights are dropped.
Bundle attach_facilities(const Bundle& b, std::span<const Coord> facilities,
                         int k_nn = 2);

// Per-edge weights 1 / max(distance_m, 1) aligned with g.edges(). Every node
// must carry a coordinate.
std::vector<double> distance_weights(const DiGraph& g, std::span<const Coord> coords);

} // namespace eqg::ingest
