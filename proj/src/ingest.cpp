#include "equigraph/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "equigraph/errors.hpp"

namespace eqg::ingest {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string loc(const std::string& file, std::size_t line) {
    return fs::path(file).filename().string() + ":" + std::to_string(line);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (std::string& f : out) {
        const auto a = f.find_first_not_of(" \t");
        const auto b = f.find_last_not_of(" \t");
        f = a == std::string::npos ? std::string() : f.substr(a, b - a + 1);
    }
    return out;
}

std::uint32_t parse_u32(const std::string& field, const std::string& file,
                        std::size_t line, const char* what) {
    std::uint32_t v = 0;
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || p != field.data() + field.size())
        throw DataError(loc(file, line) + ": bad " + what + " '" + field + "'");
    return v;
}

double parse_double(const std::string& field, const std::string& file,
                    std::size_t line, const char* what) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || p != field.data() + field.size() || !std::isfinite(v))
        throw DataError(loc(file, line) + ": bad " + what + " '" + field + "'");
    return v;
}

// Visits each data row as (line number, fields), after checking the header.
template <typename Fn>
void read_csv(const std::string& path, const std::string& header, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    bool saw_header = false;
    const std::size_t ncols = split_fields(header).size();
    while (std::getline(in, line)) {
        ++lineno;
        if (!saw_header) {
            std::string h = line;
            if (!h.empty() && h.back() == '\r') h.pop_back();
            if (h != header)
                throw DataError(loc(path, lineno) + ": expected header '" + header +
                                "'");
            saw_header = true;
            continue;
        }
        if (line.empty() || line == "\r") continue;
        auto fields = split_fields(line);
        if (fields.size() != ncols)
            throw DataError(loc(path, lineno) + ": expected " +
                            std::to_string(ncols) + " fields, got " +
                            std::to_string(fields.size()));
        fn(lineno, fields);
    }
    if (!saw_header) throw DataError(loc(path, 1) + ": missing header");
}

std::vector<Edge> read_edge_csv(const std::string& path, NodeId n, const char* what) {
    std::vector<Edge> edges;
    std::set<Edge> seen;
    read_csv(path, "src,dst", [&](std::size_t lineno, const auto& f) {
        Edge e{parse_u32(f[0], path, lineno, "src"), parse_u32(f[1], path, lineno, "dst")};
        if (e.src >= n || e.dst >= n)
            throw DataError(loc(path, lineno) + ": " + what + " (" +
                            std::to_string(e.src) + "," + std::to_string(e.dst) +
                            ") references a node outside [0," + std::to_string(n) +
                            ")");
        if (e.src == e.dst)
            throw DataError(loc(path, lineno) + ": self-loop (" +
                            std::to_string(e.src) + "," + std::to_string(e.dst) + ")");
        if (!seen.insert(e).second)
            throw DataError(loc(path, lineno) + ": duplicate " + what + " (" +
                            std::to_string(e.src) + "," + std::to_string(e.dst) + ")");
        edges.push_back(e);
    });
    return edges;
}

} // namespace

Bundle load_bundle(const std::string& path) {
    // A directory is shorthand for the manifest.json inside it.
    std::string manifest_path = path;
    std::error_code ec;
    if (fs::is_directory(fs::path(path), ec))
        manifest_path = (fs::path(path) / "manifest.json").string();
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open " + manifest_path);
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("manifest: ") + e.what());
    }

    const fs::path base = fs::path(manifest_path).parent_path();
    auto file_of = [&](const char* key) {
        if (!m.contains(key) || !m[key].is_string())
            throw DataError(std::string("manifest: missing file entry '") + key + "'");
        return (base / m[key].get<std::string>()).string();
    };

    if (!m.contains("nodes") || !m["nodes"].is_number_unsigned())
        throw DataError("manifest: missing node count 'nodes'");
    const NodeId n = m["nodes"].get<NodeId>();
    if (n == 0) throw DataError("manifest: node count must be positive");

    std::vector<Edge> edges = read_edge_csv(file_of("edges"), n, "edge");
    std::vector<Edge> mask = read_edge_csv(file_of("mask"), n, "mask edge");
    {
        std::set<Edge> edge_set(edges.begin(), edges.end());
        for (const Edge& e : mask)
            if (edge_set.count(e))
                throw DataError("mask edge (" + std::to_string(e.src) + "," +
                                std::to_string(e.dst) + ") already in the edge list");
    }

    const std::string groups_path = file_of("groups");
    std::map<std::string, std::vector<double>> raw_groups;
    read_csv(groups_path, "group_id,node,probability",
             [&](std::size_t lineno, const auto& f) {
                 if (f[0].empty())
                     throw DataError(loc(groups_path, lineno) + ": empty group id");
                 const NodeId v = parse_u32(f[1], groups_path, lineno, "node");
                 if (v >= n)
                     throw DataError(loc(groups_path, lineno) + ": node " +
                                     std::to_string(v) + " outside [0," +
                                     std::to_string(n) + ")");
                 const double p =
                     parse_double(f[2], groups_path, lineno, "probability");
                 if (p < 0.0)
                     throw DataError(loc(groups_path, lineno) +
                                     ": negative probability");
                 auto& mu = raw_groups[f[0]];
                 mu.resize(n, 0.0);
                 if (mu[v] != 0.0)
                     throw DataError(loc(groups_path, lineno) + ": node " +
                                     std::to_string(v) + " listed twice for group " +
                                     f[0]);
                 mu[v] = p;
             });
    if (raw_groups.empty()) throw DataError(groups_path + ": no groups");

    std::vector<GroupSpec> groups;
    for (auto& [gid, mu] : raw_groups) {
        mu.resize(n, 0.0);
        double total = 0.0;
        for (double p : mu) total += p;
        if (std::abs(total - 1.0) > 1e-6)
            throw DataError("group " + gid + ": probabilities sum to " +
                            std::to_string(total));
        if (total != 1.0)
            for (double& p : mu) p /= total;
        groups.push_back(GroupSpec{gid, std::move(mu), WeightRule::Uniform});
    }

    const std::string rewards_path = file_of("rewards");
    std::vector<NodeId> reward_nodes;
    std::set<NodeId> reward_seen;
    read_csv(rewards_path, "node", [&](std::size_t lineno, const auto& f) {
        const NodeId v = parse_u32(f[0], rewards_path, lineno, "node");
        if (v >= n)
            throw DataError(loc(rewards_path, lineno) + ": node " + std::to_string(v) +
                            " outside [0," + std::to_string(n) + ")");
        if (!reward_seen.insert(v).second)
            throw DataError(loc(rewards_path, lineno) + ": duplicate reward node " +
                            std::to_string(v));
        reward_nodes.push_back(v);
    });
    if (reward_nodes.empty()) throw DataError(rewards_path + ": no reward nodes");
    std::sort(reward_nodes.begin(), reward_nodes.end());

    std::vector<Coord> coords;
    if (m.contains("coordinates")) {
        const std::string coords_path = file_of("coordinates");
        coords.resize(n);
        std::vector<char> have(n, 0);
        read_csv(coords_path, "node,lat,lon", [&](std::size_t lineno, const auto& f) {
            const NodeId v = parse_u32(f[0], coords_path, lineno, "node");
            if (v >= n)
                throw DataError(loc(coords_path, lineno) + ": node " +
                                std::to_string(v) + " outside [0," +
                                std::to_string(n) + ")");
            if (have[v])
                throw DataError(loc(coords_path, lineno) + ": node " +
                                std::to_string(v) + " listed twice");
            const double lat = parse_double(f[1], coords_path, lineno, "lat");
            const double lon = parse_double(f[2], coords_path, lineno, "lon");
            if (lat < -90.0 || lat > 90.0)
                throw DataError(loc(coords_path, lineno) + ": lat out of [-90,90]");
            if (lon < -180.0 || lon > 180.0)
                throw DataError(loc(coords_path, lineno) + ": lon out of [-180,180]");
            coords[v] = Coord{lat, lon};
            have[v] = 1;
        });
        for (NodeId v = 0; v < n; ++v)
            if (!have[v])
                throw DataError(coords_path + ": node " + std::to_string(v) +
                                " has no coordinate");
    }

    Bundle b{DiGraph(n, std::move(edges), std::move(mask)), std::move(groups),
             RewardSet{std::move(reward_nodes)}, std::move(coords)};
    for (const GroupSpec& grp : b.groups) grp.validate(n);
    b.rewards.validate(n);
    return b;
}

void save_bundle(const Bundle& b, const std::string& dir) {
    fs::create_directories(dir);
    const NodeId n = b.graph.node_count();
    auto open_out = [&](const char* name) {
        std::ofstream out(fs::path(dir) / name, std::ios::trunc);
        if (!out) throw DataError(std::string("cannot write ") + name + " in " + dir);
        return out;
    };

    {
        std::ofstream out = open_out("edges.csv");
        out << "src,dst\n";
        for (const Edge& e : b.graph.edges()) out << e.src << ',' << e.dst << '\n';
    }
    {
        std::ofstream out = open_out("mask.csv");
        out << "src,dst\n";
        for (const Edge& e : b.graph.mask()) out << e.src << ',' << e.dst << '\n';
    }
    {
        std::ofstream out = open_out("groups.csv");
        out << "group_id,node,probability\n";
        std::vector<const GroupSpec*> order;
        for (const GroupSpec& g : b.groups) order.push_back(&g);
        std::sort(order.begin(), order.end(),
                  [](const GroupSpec* a, const GroupSpec* b) { return a->id < b->id; });
        for (const GroupSpec* g : order)
            for (NodeId v = 0; v < n; ++v)
                if (g->mu0[v] != 0.0)
                    out << g->id << ',' << v << ',' << fmt_double(g->mu0[v]) << '\n';
    }
    {
        std::ofstream out = open_out("rewards.csv");
        out << "node\n";
        for (NodeId v : b.rewards.nodes) out << v << '\n';
    }
    if (b.has_coords()) {
        std::ofstream out = open_out("coordinates.csv");
        out << "node,lat,lon\n";
        for (NodeId v = 0; v < n; ++v)
            out << v << ',' << fmt_double(b.coords[v].lat) << ','
                << fmt_double(b.coords[v].lon) << '\n';
    }

    nlohmann::json m;
    m["nodes"] = n;
    m["edges"] = "edges.csv";
    m["mask"] = "mask.csv";
    m["groups"] = "groups.csv";
    m["rewards"] = "rewards.csv";
    if (b.has_coords()) m["coordinates"] = "coordinates.csv";
    std::ofstream out = open_out("manifest.json");
    out << m.dump(2) << '\n';
}

double haversine_m(const Coord& a, const Coord& b) {
    constexpr double kRadius = 6371000.0;
    constexpr double kDeg = std::numbers::pi / 180.0;
    const double phi1 = a.lat * kDeg, phi2 = b.lat * kDeg;
    const double dphi = (b.lat - a.lat) * kDeg;
    const double dlam = (b.lon - a.lon) * kDeg;
    const double s1 = std::sin(dphi / 2.0), s2 = std::sin(dlam / 2.0);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kRadius * std::atan2(std::sqrt(h), std::sqrt(std::max(0.0, 1.0 - h)));
}

Bundle attach_facilities(const Bundle& b, std::span<const Coord> facilities,
                         int k_nn) {
    if (!b.has_coords())
        throw DataError("facility attachment requires node coordinates");
    if (facilities.empty()) throw DataError("no facilities to attach");
    if (k_nn < 1) throw ConfigError("k_nn must be >= 1");
    const NodeId n = b.graph.node_count();
    if (static_cast<NodeId>(k_nn) > n)
        throw DataError("k_nn exceeds the transport node count");
    for (const Coord& c : facilities)
        if (c.lat < -90.0 || c.lat > 90.0 || c.lon < -180.0 || c.lon > 180.0)
            throw DataError("facility coordinate out of range");

    std::vector<Edge> edges = b.graph.edges();
    std::vector<Coord> coords = b.coords;
    std::vector<NodeId> reward_nodes;
    std::vector<std::pair<double, NodeId>> dist(n);
    for (std::size_t fi = 0; fi < facilities.size(); ++fi) {
        const NodeId fnode = n + static_cast<NodeId>(fi);
        for (NodeId v = 0; v < n; ++v)
            dist[v] = {haversine_m(b.coords[v], facilities[fi]), v};
        std::partial_sort(dist.begin(), dist.begin() + k_nn, dist.end());
        for (int k = 0; k < k_nn; ++k) {
            const NodeId v = dist[static_cast<std::size_t>(k)].second;
            edges.push_back(Edge{fnode, v});
            edges.push_back(Edge{v, fnode});
        }
        coords.push_back(facilities[fi]);
        reward_nodes.push_back(fnode);
    }

    const NodeId n2 = n + static_cast<NodeId>(facilities.size());
    std::vector<GroupSpec> groups = b.groups;
    for (GroupSpec& g : groups) g.mu0.resize(n2, 0.0);

    return Bundle{DiGraph(n2, std::move(edges), b.graph.mask()), std::move(groups),
                  RewardSet{std::move(reward_nodes)}, std::move(coords)};
}

std::vector<double> distance_weights(const DiGraph& g, std::span<const Coord> coords) {
    if (coords.size() != g.node_count())
        throw DataError("coordinates cover " + std::to_string(coords.size()) +
                        " of " + std::to_string(g.node_count()) + " nodes");
    std::vector<double> w;
    w.reserve(g.edges().size());
    for (const Edge& e : g.edges())
        w.push_back(1.0 / std::max(haversine_m(coords[e.src], coords[e.dst]), 1.0));
    return w;
}

} // namespace eqg::ingest
