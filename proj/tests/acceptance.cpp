// Acceptance gate: eight numbered end-to-end checks of the headline
// behaviors, from gradient exactness up to full synthetic sweeps. Each check
// prints exactly one "[PASS] criterion N: ..." or "[FAIL] criterion N: ..."
// line; the process exits nonzero when any requested check fails. Run with
// no arguments for all eight, or with criterion numbers to run a subset.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "equigraph/errors.hpp"
#include "equigraph/evaluate.hpp"
#include "equigraph/experiment.hpp"
#include "equigraph/geci.hpp"
#include "equigraph/graph.hpp"
#include "equigraph/mrp.hpp"
#include "equigraph/rng.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace eqg;

namespace {

struct Outcome {
    bool ok = false;
    std::string detail;
};

fs::path scratch_root(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "eqg_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double median3(const std::array<double, 3>& xs) {
    std::array<double, 3> s = xs;
    std::sort(s.begin(), s.end());
    return s[1];
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

// Random reward set of one or two distinct nodes.
RewardSet random_rewards(rng::Stream& rs, NodeId n) {
    RewardSet rewards;
    rewards.nodes.push_back(static_cast<NodeId>(rs.below(n)));
    if (rs.uniform() < 0.5) {
        const NodeId extra = static_cast<NodeId>(rs.below(n));
        if (extra != rewards.nodes[0]) rewards.nodes.push_back(extra);
    }
    std::sort(rewards.nodes.begin(), rewards.nodes.end());
    return rewards;
}

// ---------------------------------------------------------------------------
// Criterion 1: the hand-rolled reverse-mode gradient of the full penalized
// loss matches central finite differences (step 1e-5, relative error < 1e-4,
// absolute floor 1e-8) on 100 random configurations of up to 20 nodes.

Outcome criterion1() {
    double worst_rel = 0.0;
    const double h = 1e-5;
    for (int c = 0; c < 100; ++c) {
        std::uint64_t gseed = 9000 + static_cast<std::uint64_t>(c);
        const NodeId n = static_cast<NodeId>(6 + (c % 15)); // 6..20
        DiGraph g = tu::random_graph(gseed, n, 0.15, 0.2);
        while (g.mask().empty()) g = tu::random_graph(++gseed, n, 0.15, 0.2);

        rng::Stream rs(500 + static_cast<std::uint64_t>(c));
        const RewardSet rewards = random_rewards(rs, n);
        const int ngroups = 1 + static_cast<int>(rs.below(3));
        std::vector<GroupSpec> groups;
        for (int gi = 0; gi < ngroups; ++gi)
            groups.push_back({"g" + std::to_string(gi),
                              tu::random_distribution(rs.next_u64(), n),
                              WeightRule::Uniform});

        // All Lagrangian terms active, budget far below the generic soft mass
        // so the excess hinge stays away from its kink.
        mrp::TrainConfig cfg;
        cfg.budget = 0.05;
        cfg.horizon = 6;
        cfg.gamma = 0.9;
        cfg.mu_equity = 0.7;
        cfg.lambda_equity = 0.3;
        cfg.mu_budget = 0.9;
        cfg.lambda_budget = 0.2;
        const mrp::Problem prob(g, groups, rewards, cfg);

        mrp::EdgeLogits logits;
        logits.tau = (c % 2 == 0) ? 1.0 : 0.4;
        for (std::size_t i = 0; i < g.mask().size(); ++i)
            logits.values.push_back(rs.uniform() * 5.0 - 4.0);
        std::vector<double> noise(g.mask().size());
        for (double& x : noise) x = rs.gumbel();

        const std::vector<double> grad = prob.gradient(logits, noise);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            mrp::EdgeLogits hi = logits, lo = logits;
            hi.values[i] += h;
            lo.values[i] -= h;
            const double fd = (prob.loss(hi, noise) - prob.loss(lo, noise)) / (2.0 * h);
            const double abs_err = std::abs(grad[i] - fd);
            if (abs_err < 1e-8) continue;
            const double rel = abs_err / std::max(std::abs(grad[i]), std::abs(fd));
            worst_rel = std::max(worst_rel, rel);
            if (rel >= 1e-4)
                return {false, fmt("gradient coordinate %zu of configuration %d "
                                   "disagrees with central differences "
                                   "(relative error %.2e)",
                                   i, c, rel)};
        }
    }
    return {true, fmt("reverse-mode gradient matches central differences on "
                      "100 random configurations (worst relative error %.1e)",
                      worst_rel)};
}

// ---------------------------------------------------------------------------
// Criterion 2: the analytic discounted first-arrival value agrees with a
// 5000-walk Monte Carlo estimate within three standard errors on 20 random
// graphs of up to 20 nodes.

Outcome criterion2() {
    double worst_z = 0.0;
    for (int c = 0; c < 20; ++c) {
        const NodeId n = static_cast<NodeId>(6 + (c % 15));
        const DiGraph g = tu::random_graph(7100 + static_cast<std::uint64_t>(c), n, 0.2, 0.0);
        rng::Stream rs(7500 + static_cast<std::uint64_t>(c));
        const RewardSet rewards = random_rewards(rs, n);
        const GroupSpec group{"g", tu::random_distribution(rs.next_u64(), n),
                              WeightRule::Uniform};

        const int horizon = 10;
        const double gamma = 0.9;
        const double analytic =
            metrics::first_hit_value(g, rewards, group, {}, horizon, gamma);

        metrics::EvalSettings es;
        es.walks = 5000;
        es.horizon = horizon;
        es.gamma = gamma;
        es.seed = 8300 + static_cast<std::uint64_t>(c);
        es.hit_mode = metrics::HitMode::FirstHit;
        const auto [mean, se] = metrics::monte_carlo_reward(g, rewards, group, {}, es);

        const double gap = std::abs(analytic - mean);
        if (gap > 3.0 * se + 1e-9)
            return {false, fmt("graph %d: analytic %.6f vs Monte Carlo %.6f "
                               "(%.1f standard errors apart)",
                               c, analytic, mean, se > 0.0 ? gap / se : 999.0)};
        if (se > 0.0) worst_z = std::max(worst_z, gap / se);
    }
    return {true, fmt("analytic first-arrival value within 3 standard errors "
                      "of 5000-walk Monte Carlo on 20 graphs (worst gap %.2f "
                      "standard errors)",
                      worst_z)};
}

// ---------------------------------------------------------------------------
// Criterion 3: on the toy chain 0->1->2->3 (groups A at node 1 and B at
// node 0, reward {3}, budget 1) the greedy picks exactly (0,3), and relaxed
// training in exact-expectation mode discretizes to an edit set that lowers
// the group-value deviation.

Outcome criterion3() {
    const tu::Toy toy;

    geci::GeciConfig gc;
    gc.budget = 1;
    gc.horizon = 10;
    const geci::GeciResult greedy =
        geci::geci_augment(toy.g, toy.groups, toy.rewards, gc);
    if (greedy.edits.additions != std::vector<Edge>{{0, 3}})
        return {false, fmt("greedy chose %zu edit(s), not the single edge (0,3)",
                           greedy.edits.additions.size())};

    mrp::TrainConfig tc = mrp::TrainConfig::synthetic_defaults();
    tc.budget = 1.0;
    tc.epochs = 400;
    tc.equity_start_epoch = 0;
    tc.budget_start_epoch = 0;
    tc.anneal_start_epoch = 100;
    tc.nu = 0.99;
    tc.gumbel_noise = false;
    tc.exact_expectation = true;
    tc.mu_equity = 1.0;
    tc.minibatch = 8;
    tc.seed = experiment::role_seed(1, experiment::SeedRole::Train);
    const mrp::Problem prob(toy.g, toy.groups, toy.rewards, tc);
    const mrp::TrainResult trained = prob.train();
    const EditSet edits = mrp::discretize(trained.logits, toy.g, 1);
    if (edits.size() != 1)
        return {false, fmt("training discretized to %zu edits instead of 1",
                           edits.size())};

    // Group-value deviation sum_g |V_g - mean| under the hard edit at unit
    // weight, with the toy horizon and discount.
    const auto deviation = [&](const EditSet& e) {
        std::vector<double> soft(toy.g.mask().size(), 0.0);
        for (const Edge& ed : e.additions) soft[*toy.g.mask_index(ed)] = 1.0;
        std::vector<double> reward_ind(toy.g.node_count(), 0.0);
        for (NodeId v : toy.rewards.nodes) reward_ind[v] = 1.0;
        std::vector<double> values;
        for (const GroupSpec& grp : toy.groups) {
            const Matrix p = transition_matrix(toy.g, soft, grp);
            values.push_back(mrp::group_value(p, reward_ind, grp.mu0, 10, 0.99));
        }
        const double mean = (values[0] + values[1]) / 2.0;
        return std::abs(values[0] - mean) + std::abs(values[1] - mean);
    };
    const double before = deviation({});
    const double after = deviation(edits);
    if (!(after < before))
        return {false, fmt("trained edit set left the deviation at %.4f "
                           "(was %.4f)",
                           after, before)};
    return {true, fmt("greedy adds (0,3); trained edit (%u,%u) cuts the "
                      "group-value deviation %.3f -> %.4f",
                      edits.additions[0].src, edits.additions[0].dst, before,
                      after)};
}

// ---------------------------------------------------------------------------
// Criterion 4: synthetic sweep over 4 ensembles x {high-degree, low-degree}
// rewards at 100 nodes, 3 rewards, 3 seeds. Relaxed training at budget 20
// must not lose pooled utility on any configuration (median over seeds) and
// must lower pooled Gini on at least 6 of 8; greedy utility must be
// non-decreasing in budget over {5, 10, 20} on every (configuration, seed).

const char* kFrozenTrain =
    "\"train\":{\"defaults\":\"synthetic\",\"epochs\":1000,"
    "\"equity_start_epoch\":0,\"budget_start_epoch\":0,"
    "\"anneal_start_epoch\":300,\"nu\":0.995,\"absorbing_rewards\":true,"
    "\"gumbel_noise\":false,\"exact_expectation\":true,\"logit_init\":-6.0,"
    "\"minibatch\":32}";

const char* kEval = "\"eval\":{\"walks\":500,\"horizon\":10,\"gamma\":0.99,"
                    "\"hit_mode\":\"first-hit\",\"pooled\":\"individuals\"}";

std::string ensemble_source(const std::string& kind) {
    if (kind == "ER") return "{\"kind\":\"ER\",\"n\":100,\"p\":0.05}";
    if (kind == "PA") return "{\"kind\":\"PA\",\"n\":100,\"m\":3,\"triangle_p\":0.3}";
    if (kind == "CL") return "{\"kind\":\"CL\",\"n\":100,\"gamma\":2.5}";
    return "{\"kind\":\"SBM\",\"n\":100,\"clusters\":2,"
           "\"probs\":[[0.12,0.01],[0.01,0.12]]}";
}

std::string cluster_groups(const std::string& kind) {
    if (kind != "SBM") return ""; // default advantaged/disadvantaged pair
    return ",\"groups\":[{\"id\":\"advantaged\",\"weight_rule\":\"degree-product\","
           "\"cluster\":0},{\"id\":\"disadvantaged\","
           "\"weight_rule\":\"inverse-degree-product\",\"cluster\":1}]";
}

std::string sweep_config(const std::string& kind, const std::string& mode,
                         std::uint64_t seed, const std::string& optimizer,
                         std::uint32_t budget) {
    return "{\"seed\":" + std::to_string(seed) +
           ",\"source\":{\"ensemble\":" + ensemble_source(kind) + "}," +
           "\"rewards\":{\"k\":3,\"mode\":\"" + mode + "\"}," +
           "\"optimizer\":\"" + optimizer +
           "\",\"budget\":" + std::to_string(budget) + "," + kFrozenTrain + "," +
           kEval + cluster_groups(kind) + "}";
}

Outcome criterion4() {
    const fs::path root = scratch_root("criterion4");
    const std::array<const char*, 4> kinds{"ER", "PA", "CL", "SBM"};
    const std::array<const char*, 2> modes{"high-degree", "low-degree"};

    int gini_improved = 0;
    for (const char* kind : kinds)
        for (const char* mode : modes) {
            std::array<double, 3> du{}, dg{};
            for (std::uint64_t seed = 1; seed <= 3; ++seed) {
                const auto cfg = experiment::parse_config(
                    sweep_config(kind, mode, seed, "mrp", 20));
                const fs::path dir = root / (std::string(kind) + "_" + mode +
                                             "_" + std::to_string(seed));
                const json s = json::parse(experiment::run_optimize(cfg, dir.string()));
                if (s.at("status") != "ok")
                    return {false, fmt("%s/%s seed %llu ended with status %s",
                                       kind, mode,
                                       static_cast<unsigned long long>(seed),
                                       s.at("status").dump().c_str())};
                du[seed - 1] = s.at("utility_after").get<double>() -
                               s.at("utility_before").get<double>();
                dg[seed - 1] = s.at("gini_after").get<double>() -
                               s.at("gini_before").get<double>();
            }
            if (median3(du) < 0.0)
                return {false, fmt("%s/%s: median utility change %.4f < 0 at "
                                   "budget 20",
                                   kind, mode, median3(du))};
            if (median3(dg) <= 0.0) ++gini_improved;
        }
    if (gini_improved < 6)
        return {false, fmt("pooled Gini improved on only %d of 8 "
                           "configurations (need >= 6)",
                           gini_improved)};

    int monotone_runs = 0;
    for (const char* kind : kinds)
        for (const char* mode : modes)
            for (std::uint64_t seed = 1; seed <= 3; ++seed) {
                const auto cfg = experiment::parse_config(
                    sweep_config(kind, mode, seed, "geci", 20));
                const experiment::Instance inst =
                    experiment::build_instance(cfg, cfg.seed);
                double prev = -1.0;
                for (const std::uint32_t budget : {5u, 10u, 20u}) {
                    geci::GeciConfig gc;
                    gc.budget = budget;
                    gc.horizon = cfg.eval.horizon;
                    const geci::GeciResult r =
                        geci::geci_augment(inst.graph, inst.groups, inst.rewards, gc);
                    double u = 0.0;
                    for (const GroupSpec& grp : inst.groups)
                        u += metrics::group_utility_exact(inst.graph, inst.rewards,
                                                          grp, r.edits);
                    u /= static_cast<double>(inst.groups.size());
                    if (u + 1e-12 < prev)
                        return {false,
                                fmt("greedy utility fell from %.6f to %.6f "
                                    "between budgets on %s/%s seed %llu",
                                    prev, u, kind, mode,
                                    static_cast<unsigned long long>(seed))};
                    prev = u;
                }
                ++monotone_runs;
            }
    return {true, fmt("median utility change >= 0 on 8/8 configurations at "
                      "budget 20, pooled Gini improved on %d/8 (>= 6 "
                      "required), greedy utility non-decreasing in budget on "
                      "%d/24 runs",
                      gini_improved, monotone_runs)};
}

// ---------------------------------------------------------------------------
// Criterion 5: every optimizer output respects the budget and the candidate
// mask, and identical (config, seed) reruns are byte-identical across the
// generator, both optimizers, and the sweep driver.

EditSet read_edits_csv(const fs::path& path) {
    std::istringstream in(slurp(path));
    std::string line;
    std::vector<Edge> edges;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("src,", 0) == 0) continue;
        unsigned src = 0, dst = 0;
        if (std::sscanf(line.c_str(), "%u,%u", &src, &dst) == 2)
            edges.push_back({static_cast<NodeId>(src), static_cast<NodeId>(dst)});
    }
    return EditSet::from_edges(std::move(edges));
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
    std::set<std::string> rel_a, rel_b;
    for (const auto& entry : fs::recursive_directory_iterator(a))
        if (entry.is_regular_file())
            rel_a.insert(fs::relative(entry.path(), a).string());
    for (const auto& entry : fs::recursive_directory_iterator(b))
        if (entry.is_regular_file())
            rel_b.insert(fs::relative(entry.path(), b).string());
    if (rel_a != rel_b) {
        why = "directory listings differ";
        return false;
    }
    for (const std::string& rel : rel_a)
        if (slurp(a / rel) != slurp(b / rel)) {
            why = rel + " differs between reruns";
            return false;
        }
    return true;
}

Outcome criterion5() {
    const fs::path root = scratch_root("criterion5");
    const std::string source =
        "\"source\":{\"ensemble\":{\"kind\":\"ER\",\"n\":40,\"p\":0.08}},"
        "\"rewards\":{\"k\":2,\"mode\":\"high-degree\"}";
    const std::string eval_small =
        "\"eval\":{\"walks\":200,\"horizon\":10,\"gamma\":0.99,"
        "\"hit_mode\":\"first-hit\",\"pooled\":\"individuals\"}";
    std::string why;

    // Generator.
    const auto gen_cfg =
        experiment::parse_config("{\"seed\":11," + source + "}");
    const std::string gen1 = experiment::run_generate(gen_cfg, (root / "gen1").string());
    const std::string gen2 = experiment::run_generate(gen_cfg, (root / "gen2").string());
    if (gen1 != gen2) return {false, "generator summaries differ between reruns"};
    if (!same_tree(root / "gen1", root / "gen2", why))
        return {false, "generator: " + why};

    // Greedy optimizer.
    const auto geci_cfg = experiment::parse_config(
        "{\"seed\":11," + source + ",\"optimizer\":\"geci\",\"budget\":5," +
        eval_small + "}");
    const std::string go1 = experiment::run_optimize(geci_cfg, (root / "geci1").string());
    const std::string go2 = experiment::run_optimize(geci_cfg, (root / "geci2").string());
    if (go1 != go2) return {false, "greedy summaries differ between reruns"};
    if (!same_tree(root / "geci1", root / "geci2", why))
        return {false, "greedy: " + why};

    const experiment::Instance inst = experiment::build_instance(geci_cfg, geci_cfg.seed);
    const EditSet geci_edits = read_edits_csv(root / "geci1" / "edits.csv");
    if (geci_edits.size() == 0 || geci_edits.size() > 5)
        return {false, fmt("greedy produced %zu edits under budget 5",
                           geci_edits.size())};
    try {
        validate_edits(inst.graph, geci_edits);
    } catch (const DataError& e) {
        return {false, std::string("greedy edits violate the mask: ") + e.what()};
    }

    // Relaxed optimizer, on a configuration whose schedule is known to
    // concentrate mass into discrete choices.
    const auto mrp_cfg =
        experiment::parse_config(sweep_config("ER", "high-degree", 1, "mrp", 20));
    const std::string mo1 = experiment::run_optimize(mrp_cfg, (root / "mrp1").string());
    const std::string mo2 = experiment::run_optimize(mrp_cfg, (root / "mrp2").string());
    if (mo1 != mo2) return {false, "trained summaries differ between reruns"};
    if (!same_tree(root / "mrp1", root / "mrp2", why))
        return {false, "trained: " + why};

    const EditSet mrp_edits = read_edits_csv(root / "mrp1" / "edits.csv");
    if (mrp_edits.size() == 0 || mrp_edits.size() > 20)
        return {false, fmt("trained run produced %zu edits under budget 20",
                           mrp_edits.size())};
    const experiment::Instance mrp_inst =
        experiment::build_instance(mrp_cfg, mrp_cfg.seed);
    try {
        validate_edits(mrp_inst.graph, mrp_edits);
    } catch (const DataError& e) {
        return {false, std::string("trained edits violate the mask: ") + e.what()};
    }

    // Sweep driver.
    const auto sweep_cfg = experiment::parse_config(
        "{\"seed\":11," + source + ",\"optimizer\":\"geci\",\"budget\":2," +
        eval_small +
        ",\"sweep\":{\"budgets\":[2,4],\"seeds\":[11,12],"
        "\"optimizers\":[\"geci\"],\"jobs\":1}}");
    const std::string sw1 = experiment::run_sweep(sweep_cfg, (root / "sweep1").string());
    const std::string sw2 = experiment::run_sweep(sweep_cfg, (root / "sweep2").string());
    if (sw1 != sw2) return {false, "sweep summaries differ between reruns"};
    if (!same_tree(root / "sweep1", root / "sweep2", why))
        return {false, "sweep: " + why};
    if (json::parse(sw1).at("ok_rows") != 4)
        return {false, "sweep did not complete all 4 rows"};

    return {true, fmt("edits stayed within mask and budget (%zu and %zu "
                      "edits); generator, both optimizers, and a 4-row sweep "
                      "rerun byte-identical",
                      geci_edits.size(), mrp_edits.size())};
}

// ---------------------------------------------------------------------------
// Criterion 6: metric properties over randomized inputs. Gini lies in
// [0, 1-1/n], is scale-invariant, and is zero on constant samples; exact
// utility is monotone under edge addition; transition rows sum to one.

Outcome criterion6() {
    rng::Stream rs(6100);
    for (int c = 0; c < 60; ++c) {
        const std::size_t n = 2 + static_cast<std::size_t>(rs.below(40));
        std::vector<double> xs(n);
        for (double& x : xs) x = (rs.uniform() < 0.2) ? 0.0 : rs.uniform() * 10.0;
        const double g = metrics::gini(xs);
        if (!(g >= 0.0 && g <= 1.0 - 1.0 / static_cast<double>(n) + 1e-12))
            return {false, fmt("Gini %.6f outside [0, 1-1/%zu]", g, n)};

        const double scale = 0.01 + rs.uniform() * 99.0;
        std::vector<double> ys = xs;
        for (double& y : ys) y *= scale;
        if (std::abs(metrics::gini(ys) - g) > 1e-9)
            return {false, fmt("Gini not scale-invariant at factor %.3f", scale)};

        const std::vector<double> constant(n, 0.5 + rs.uniform());
        if (metrics::gini(constant) != 0.0)
            return {false, "Gini nonzero on a constant sample"};
    }

    for (int c = 0; c < 20; ++c) {
        const DiGraph g = tu::random_graph(6200 + static_cast<std::uint64_t>(c),
                                           14, 0.12, 0.25);
        rng::Stream rs2(6300 + static_cast<std::uint64_t>(c));
        const RewardSet rewards = random_rewards(rs2, 14);
        const GroupSpec grp{"g", tu::random_distribution(rs2.next_u64(), 14),
                            WeightRule::Uniform};

        std::vector<Edge> pool = g.mask();
        for (std::size_t i = pool.size(); i > 1; --i)
            std::swap(pool[i - 1], pool[rs2.below(i)]);
        if (pool.size() > 15) pool.resize(15);

        double prev = metrics::group_utility_exact(g, rewards, grp, {});
        std::vector<Edge> added;
        for (const Edge& e : pool) {
            added.push_back(e);
            const double u = metrics::group_utility_exact(
                g, rewards, grp, EditSet::from_edges(added));
            if (u + 1e-12 < prev)
                return {false, fmt("exact utility fell %.6f -> %.6f after "
                                   "adding an edge",
                                   prev, u)};
            prev = u;
        }
    }

    for (int c = 0; c < 20; ++c) {
        const DiGraph base = tu::random_graph(6400 + static_cast<std::uint64_t>(c),
                                              12, 0.2, 0.2);
        rng::Stream rs3(6500 + static_cast<std::uint64_t>(c));
        std::vector<double> weights(base.edges().size());
        for (double& w : weights) w = 0.1 + rs3.uniform() * 5.0;
        const DiGraph g(12, base.edges(), base.mask(), {{"W", weights}});

        std::vector<double> soft(g.mask().size());
        for (double& s : soft) s = rs3.uniform();
        for (const std::string& id : {std::string("W"), std::string("plain")}) {
            const GroupSpec grp{id, tu::random_distribution(rs3.next_u64(), 12),
                                WeightRule::Uniform};
            const Matrix p = transition_matrix(g, soft, grp);
            for (NodeId i = 0; i < 12; ++i) {
                double row = 0.0;
                for (NodeId j = 0; j < 12; ++j) row += p(i, j);
                if (std::abs(row - 1.0) > 1e-9)
                    return {false, fmt("transition row %u sums to %.12f", i, row)};
            }
        }
    }

    return {true, "Gini bounds, scale invariance, and constant-sample zero; "
                  "exact utility monotone under edge addition; transition "
                  "rows sum to 1 within 1e-9"};
}

// ---------------------------------------------------------------------------
// Criterion 7: facility placement on a 200-node preferential-attachment
// graph. Median over 3 seeds, the 15-facility placement must beat the
// 3-facility placement on both pooled utility and pooled Gini.

std::string facility_config(std::uint64_t seed, std::uint32_t k) {
    return "{\"seed\":" + std::to_string(seed) +
           ",\"source\":{\"ensemble\":{\"kind\":\"PA\",\"n\":200,\"m\":3}},"
           "\"rewards\":{\"k\":3,\"mode\":\"high-degree\"},"
           "\"optimizer\":\"mrp\",\"budget\":5,\"facility\":{\"k\":" +
           std::to_string(k) +
           "},\"train\":{\"defaults\":\"synthetic\",\"epochs\":600,"
           "\"equity_start_epoch\":0,\"budget_start_epoch\":0,"
           "\"anneal_start_epoch\":200,\"nu\":0.995,\"gumbel_noise\":false,"
           "\"exact_expectation\":true,\"minibatch\":32}," +
           std::string(kEval) + "}";
}

Outcome criterion7() {
    const fs::path root = scratch_root("criterion7");
    std::array<double, 3> u3{}, g3{}, u15{}, g15{};
    for (std::uint64_t seed = 1; seed <= 3; ++seed)
        for (const std::uint32_t k : {3u, 15u}) {
            const auto cfg = experiment::parse_config(facility_config(seed, k));
            const fs::path dir =
                root / ("k" + std::to_string(k) + "_" + std::to_string(seed));
            const json s = json::parse(experiment::run_facility(cfg, dir.string()));
            if (s.at("status") != "ok")
                return {false, fmt("facility run k=%u seed %llu ended with "
                                   "status %s",
                                   k, static_cast<unsigned long long>(seed),
                                   s.at("status").dump().c_str())};
            if (k == 3) {
                u3[seed - 1] = s.at("utility").get<double>();
                g3[seed - 1] = s.at("pooled_gini").get<double>();
            } else {
                u15[seed - 1] = s.at("utility").get<double>();
                g15[seed - 1] = s.at("pooled_gini").get<double>();
            }
        }
    const double mu3 = median3(u3), mg3 = median3(g3);
    const double mu15 = median3(u15), mg15 = median3(g15);
    if (!(mu15 > mu3))
        return {false, fmt("median utility at 15 facilities (%.4f) does not "
                           "beat 3 facilities (%.4f)",
                           mu15, mu3)};
    if (!(mg15 < mg3))
        return {false, fmt("median Gini at 15 facilities (%.4f) is not below "
                           "3 facilities (%.4f)",
                           mg15, mg3)};
    return {true, fmt("median utility %.3f -> %.3f and median Gini "
                      "%.3f -> %.3f going from 3 to 15 facilities (3 seeds)",
                      mu3, mu15, mg3, mg15)};
}

// ---------------------------------------------------------------------------
// Criterion 8: training-schedule behavior on the two-cluster configuration
// with a binding equity penalty activating at epoch 100. The recorded equity
// deviation after the final epoch must sit strictly below its value at the
// activation epoch, median over 3 seeds.

std::string schedule_config(std::uint64_t seed) {
    return "{\"seed\":" + std::to_string(seed) +
           ",\"source\":{\"ensemble\":" + ensemble_source("SBM") + "}" +
           cluster_groups("SBM") +
           ",\"rewards\":{\"k\":3,\"mode\":\"high-degree\"},"
           "\"optimizer\":\"mrp\",\"budget\":20,"
           "\"train\":{\"defaults\":\"synthetic\",\"epochs\":1000,"
           "\"equity_start_epoch\":100,\"budget_start_epoch\":0,"
           "\"anneal_start_epoch\":300,\"nu\":0.995,"
           "\"absorbing_rewards\":true,\"gumbel_noise\":false,"
           "\"exact_expectation\":true,\"logit_init\":-6.0,"
           "\"mu_equity\":0.5,\"minibatch\":32}," +
           std::string(kEval) + "}";
}

std::map<int, double> read_trajectory_dev(const fs::path& path) {
    std::istringstream in(slurp(path));
    std::string line;
    std::map<int, double> dev_by_epoch;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("epoch,", 0) == 0) continue;
        int epoch = 0;
        double sum_value = 0.0, dev = 0.0;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf", &epoch, &sum_value, &dev) == 3)
            dev_by_epoch[epoch] = dev;
    }
    return dev_by_epoch;
}

Outcome criterion8() {
    const fs::path root = scratch_root("criterion8");
    std::array<double, 3> at_activation{}, at_end{};
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto cfg = experiment::parse_config(schedule_config(seed));
        const fs::path dir = root / std::to_string(seed);
        const json s = json::parse(experiment::run_optimize(cfg, dir.string()));
        if (s.at("status") != "ok")
            return {false, fmt("seed %llu ended with status %s",
                               static_cast<unsigned long long>(seed),
                               s.at("status").dump().c_str())};
        const std::map<int, double> dev = read_trajectory_dev(dir / "trajectory.csv");
        const auto act = dev.find(100);
        if (act == dev.end() || dev.empty())
            return {false, "trajectory lacks a record at the activation epoch"};
        at_activation[seed - 1] = act->second;
        at_end[seed - 1] = dev.rbegin()->second;
    }
    const double m_act = median3(at_activation), m_end = median3(at_end);
    if (!(m_end < m_act))
        return {false, fmt("median equity deviation %.4f at activation vs "
                           "%.4f after the final epoch",
                           m_act, m_end)};
    return {true, fmt("median equity deviation %.3f at the activation epoch "
                      "-> %.4f after the final epoch (3 seeds)",
                      m_act, m_end)};
}

Outcome run_criterion(int number) {
    switch (number) {
    case 1: return criterion1();
    case 2: return criterion2();
    case 3: return criterion3();
    case 4: return criterion4();
    case 5: return criterion5();
    case 6: return criterion6();
    case 7: return criterion7();
    case 8: return criterion8();
    }
    return {false, "unknown criterion"};
}

// Wall-clock budgets that are part of the checks themselves.
double time_limit_seconds(int number) {
    switch (number) {
    case 1: return 60.0;
    case 2: return 60.0;
    case 3: return 120.0;
    case 4: return 1800.0;
    case 7: return 900.0;
    }
    return 0.0; // unlimited
}

} // namespace

int main(int argc, char** argv) {
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
    if (wanted.empty()) wanted = {1, 2, 3, 4, 5, 6, 7, 8};

    bool all_ok = true;
    for (const int number : wanted) {
        if (number < 1 || number > 8) {
            std::fprintf(stderr, "unknown criterion %d (valid: 1..8)\n", number);
            return 2;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = run_criterion(number);
        } catch (const std::exception& e) {
            outcome = {false, std::string("unexpected exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        const double limit = time_limit_seconds(number);
        if (outcome.ok && limit > 0.0 && secs > limit) {
            outcome.ok = false;
            outcome.detail += fmt(" [exceeded the %.0fs budget]", limit);
        }
        std::printf("[%s] criterion %d: %s (%.1fs)\n", outcome.ok ? "PASS" : "FAIL",
                    number, outcome.detail.c_str(), secs);
        std::fflush(stdout);
        all_ok = all_ok && outcome.ok;
    }
    return all_ok ? 0 : 1;
}
