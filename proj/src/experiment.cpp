#include "equigraph/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include <json.hpp>

#include "equigraph/errors.hpp"
#include "equigraph/facility.hpp"
#include "equigraph/geci.hpp"
#include "equigraph/rng.hpp"

namespace eqg::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t role_seed(std::uint64_t master, SeedRole role) {
    return rng::derive(master, static_cast<std::uint64_t>(role));
}

const char* optimizer_name(Optimizer o) {
    switch (o) {
    case Optimizer::None: return "none";
    case Optimizer::Geci: return "geci";
    case Optimizer::Mrp: return "mrp";
    }
    return "none";
}

Optimizer optimizer_from_name(const std::string& name) {
    if (name == "none") return Optimizer::None;
    if (name == "geci") return Optimizer::Geci;
    if (name == "mrp") return Optimizer::Mrp;
    throw ConfigError("optimizer: unknown name '" + name + "'");
}

std::string ExperimentConfig::source_name() const {
    return has_ensemble ? synth::ensemble_name(ensemble.kind) : "bundle";
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
    throw ConfigError(path + ": " + msg);
}

void expect_keys(const json& obj, const std::string& path,
                 std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known)
            bad(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
    }
}

std::uint64_t as_u64(const json& v, const std::string& path) {
    if (!v.is_number_unsigned()) bad(path, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

std::uint32_t as_u32(const json& v, const std::string& path) {
    const std::uint64_t x = as_u64(v, path);
    if (x > 0xffffffffull) bad(path, "value too large");
    return static_cast<std::uint32_t>(x);
}

int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) bad(path, "expected an integer");
    return v.get<int>();
}

double as_double(const json& v, const std::string& path) {
    if (!v.is_number()) bad(path, "expected a number");
    return v.get<double>();
}

bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) bad(path, "expected true or false");
    return v.get<bool>();
}

std::string as_str(const json& v, const std::string& path) {
    if (!v.is_string()) bad(path, "expected a string");
    return v.get<std::string>();
}

void parse_ensemble(const json& e, synth::EnsembleConfig& out) {
    expect_keys(e, "source.ensemble",
                {"kind", "n", "p", "m", "triangle_p", "gamma", "clusters", "probs"});
    if (!e.contains("kind")) bad("source.ensemble.kind", "required");
    out.kind = synth::ensemble_from_name(as_str(e["kind"], "source.ensemble.kind"));
    if (!e.contains("n")) bad("source.ensemble.n", "required");
    out.n = as_u32(e["n"], "source.ensemble.n");
    if (e.contains("p")) out.er_p = as_double(e["p"], "source.ensemble.p");
    if (e.contains("m")) out.pa_m = as_u32(e["m"], "source.ensemble.m");
    if (e.contains("triangle_p"))
        out.pa_p = as_double(e["triangle_p"], "source.ensemble.triangle_p");
    if (e.contains("gamma")) out.cl_gamma = as_double(e["gamma"], "source.ensemble.gamma");
    if (e.contains("clusters"))
        out.sbm_clusters = as_u32(e["clusters"], "source.ensemble.clusters");
    if (e.contains("probs")) {
        const json& p = e["probs"];
        if (!p.is_array()) bad("source.ensemble.probs", "expected an array of arrays");
        out.sbm_probs.clear();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const std::string rp = "source.ensemble.probs[" + std::to_string(i) + "]";
            if (!p[i].is_array()) bad(rp, "expected an array");
            std::vector<double> row;
            for (std::size_t jx = 0; jx < p[i].size(); ++jx)
                row.push_back(as_double(p[i][jx], rp + "[" + std::to_string(jx) + "]"));
            out.sbm_probs.push_back(std::move(row));
        }
    }
    out.validate();
}

void parse_train(const json& t, mrp::TrainConfig& out) {
    expect_keys(t, "train",
                {"defaults", "horizon", "gamma", "mu_equity", "mu_budget",
                 "lambda_equity", "lambda_budget", "epochs", "minibatch",
                 "minibatches_per_epoch", "learning_rate", "nu", "tau0",
                 "equity_start_epoch", "budget_start_epoch", "anneal_start_epoch",
                 "exact_expectation", "gumbel_noise", "absorbing_rewards",
                 "logit_init"});
    if (t.contains("defaults")) {
        const std::string d = as_str(t["defaults"], "train.defaults");
        if (d == "synthetic")
            out = mrp::TrainConfig::synthetic_defaults();
        else if (d == "road")
            out = mrp::TrainConfig::road_defaults();
        else if (d == "social")
            out = mrp::TrainConfig::social_defaults(5); // budget resolved later
        else
            bad("train.defaults", "expected synthetic, road, or social");
    }
    if (t.contains("horizon")) out.horizon = as_int(t["horizon"], "train.horizon");
    if (t.contains("gamma")) out.gamma = as_double(t["gamma"], "train.gamma");
    if (t.contains("mu_equity"))
        out.mu_equity = as_double(t["mu_equity"], "train.mu_equity");
    if (t.contains("mu_budget"))
        out.mu_budget = as_double(t["mu_budget"], "train.mu_budget");
    if (t.contains("lambda_equity"))
        out.lambda_equity = as_double(t["lambda_equity"], "train.lambda_equity");
    if (t.contains("lambda_budget"))
        out.lambda_budget = as_double(t["lambda_budget"], "train.lambda_budget");
    if (t.contains("epochs")) out.epochs = as_int(t["epochs"], "train.epochs");
    if (t.contains("minibatch")) out.minibatch = as_int(t["minibatch"], "train.minibatch");
    if (t.contains("minibatches_per_epoch"))
        out.minibatches_per_epoch =
            as_int(t["minibatches_per_epoch"], "train.minibatches_per_epoch");
    if (t.contains("learning_rate"))
        out.learning_rate = as_double(t["learning_rate"], "train.learning_rate");
    if (t.contains("nu")) out.nu = as_double(t["nu"], "train.nu");
    if (t.contains("tau0")) out.tau0 = as_double(t["tau0"], "train.tau0");
    if (t.contains("equity_start_epoch"))
        out.equity_start_epoch =
            as_int(t["equity_start_epoch"], "train.equity_start_epoch");
    if (t.contains("budget_start_epoch"))
        out.budget_start_epoch =
            as_int(t["budget_start_epoch"], "train.budget_start_epoch");
    if (t.contains("anneal_start_epoch"))
        out.anneal_start_epoch =
            as_int(t["anneal_start_epoch"], "train.anneal_start_epoch");
    if (t.contains("exact_expectation"))
        out.exact_expectation = as_bool(t["exact_expectation"], "train.exact_expectation");
    if (t.contains("gumbel_noise"))
        out.gumbel_noise = as_bool(t["gumbel_noise"], "train.gumbel_noise");
    if (t.contains("absorbing_rewards"))
        out.absorbing_rewards = as_bool(t["absorbing_rewards"], "train.absorbing_rewards");
    if (t.contains("logit_init"))
        out.logit_init = as_double(t["logit_init"], "train.logit_init");
}

json resolved_json(const ExperimentConfig& cfg) {
    json r;
    r["seed"] = cfg.seed;
    if (cfg.has_ensemble) {
        json e;
        e["kind"] = synth::ensemble_name(cfg.ensemble.kind);
        e["n"] = cfg.ensemble.n;
        switch (cfg.ensemble.kind) {
        case synth::Ensemble::ER: e["p"] = cfg.ensemble.er_p; break;
        case synth::Ensemble::PA:
            e["m"] = cfg.ensemble.pa_m;
            e["triangle_p"] = cfg.ensemble.pa_p;
            break;
        case synth::Ensemble::CL: e["gamma"] = cfg.ensemble.cl_gamma; break;
        case synth::Ensemble::SBM:
            e["clusters"] = cfg.ensemble.sbm_clusters;
            e["probs"] = cfg.ensemble.sbm_probs;
            break;
        }
        r["source"]["ensemble"] = std::move(e);
        json gs = json::array();
        for (const GroupConfig& g : cfg.groups) {
            json item;
            item["id"] = g.id;
            item["weight_rule"] = weight_rule_name(g.weight_rule);
            if (g.cluster >= 0) item["cluster"] = g.cluster;
            gs.push_back(std::move(item));
        }
        r["groups"] = std::move(gs);
        r["rewards"]["k"] = cfg.reward_k;
        r["rewards"]["mode"] = synth::reward_mode_name(cfg.reward_mode);
    } else {
        r["source"]["bundle"] = cfg.bundle_path;
        r["weights"] = cfg.bundle_weights;
    }
    r["optimizer"] = optimizer_name(cfg.optimizer);
    r["budget"] = cfg.budget;
    const mrp::TrainConfig& t = cfg.train;
    json tj;
    tj["horizon"] = t.horizon;
    tj["gamma"] = t.gamma;
    tj["mu_equity"] = t.mu_equity;
    tj["mu_budget"] = t.mu_budget;
    tj["lambda_equity"] = t.lambda_equity;
    tj["lambda_budget"] = t.lambda_budget;
    tj["epochs"] = t.epochs;
    tj["minibatch"] = t.minibatch;
    tj["minibatches_per_epoch"] = t.minibatches_per_epoch;
    tj["learning_rate"] = t.learning_rate;
    tj["nu"] = t.nu;
    tj["tau0"] = t.tau0;
    tj["equity_start_epoch"] = t.equity_start_epoch;
    tj["budget_start_epoch"] = t.budget_start_epoch;
    tj["anneal_start_epoch"] = t.anneal_start_epoch;
    tj["exact_expectation"] = t.exact_expectation;
    tj["gumbel_noise"] = t.gumbel_noise;
    tj["absorbing_rewards"] = t.absorbing_rewards;
    tj["logit_init"] = t.logit_init;
    r["train"] = std::move(tj);
    r["geci"]["prune"] = cfg.geci_prune;
    r["eval"]["walks"] = cfg.eval.walks;
    r["eval"]["horizon"] = cfg.eval.horizon;
    r["eval"]["gamma"] = cfg.eval.gamma;
    r["eval"]["hit_mode"] = metrics::hit_mode_name(cfg.eval.hit_mode);
    r["eval"]["pooled"] = metrics::pooled_mode_name(cfg.eval.pooled);
    if (cfg.facility_k > 0) r["facility"]["k"] = cfg.facility_k;
    json sw;
    sw["budgets"] = cfg.sweep_budgets;
    sw["seeds"] = cfg.sweep_seeds;
    json opts = json::array();
    for (Optimizer o : cfg.sweep_optimizers) opts.push_back(optimizer_name(o));
    sw["optimizers"] = std::move(opts);
    sw["jobs"] = cfg.sweep_jobs;
    r["sweep"] = std::move(sw);
    return r;
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    expect_keys(j, "",
                {"seed", "source", "groups", "rewards", "weights", "optimizer",
                 "budget", "train", "geci", "eval", "facility", "sweep"});

    ExperimentConfig cfg;
    if (!j.contains("seed"))
        throw ConfigError("seed: required (all randomness must be explicit)");
    cfg.seed = as_u64(j["seed"], "seed");

    if (!j.contains("source") || !j["source"].is_object())
        throw ConfigError("source: required object");
    const json& src = j["source"];
    expect_keys(src, "source", {"ensemble", "bundle"});
    const bool has_e = src.contains("ensemble");
    const bool has_b = src.contains("bundle");
    if (has_e == has_b)
        throw ConfigError("source: exactly one of ensemble or bundle is required");
    if (has_e) {
        if (!src["ensemble"].is_object()) bad("source.ensemble", "expected an object");
        cfg.has_ensemble = true;
        parse_ensemble(src["ensemble"], cfg.ensemble);
    } else {
        cfg.bundle_path = as_str(src["bundle"], "source.bundle");
        if (cfg.bundle_path.empty()) bad("source.bundle", "empty path");
    }

    if (cfg.has_ensemble) {
        if (j.contains("weights"))
            bad("weights", "only for bundle sources; synthetic weights are "
                           "per-group rules");
        if (j.contains("groups")) {
            const json& gs = j["groups"];
            if (!gs.is_array() || gs.empty())
                bad("groups", "expected a non-empty array");
            std::set<std::string> seen;
            for (std::size_t i = 0; i < gs.size(); ++i) {
                const std::string gp = "groups[" + std::to_string(i) + "]";
                if (!gs[i].is_object()) bad(gp, "expected an object");
                expect_keys(gs[i], gp, {"id", "weight_rule", "cluster"});
                GroupConfig gc;
                if (!gs[i].contains("id")) bad(gp + ".id", "required");
                gc.id = as_str(gs[i]["id"], gp + ".id");
                if (gc.id.empty()) bad(gp + ".id", "empty id");
                if (!seen.insert(gc.id).second) bad(gp + ".id", "duplicate id");
                if (gs[i].contains("weight_rule")) {
                    gc.weight_rule =
                        weight_rule_from_name(as_str(gs[i]["weight_rule"],
                                                     gp + ".weight_rule"));
                    if (gc.weight_rule == WeightRule::Explicit)
                        bad(gp + ".weight_rule", "explicit weights come from data "
                                                 "files, not a rule");
                }
                if (gs[i].contains("cluster")) {
                    gc.cluster = as_int(gs[i]["cluster"], gp + ".cluster");
                    if (gc.cluster < 0) bad(gp + ".cluster", "must be >= 0");
                    if (cfg.ensemble.kind != synth::Ensemble::SBM)
                        bad(gp + ".cluster", "cluster starts require the sbm "
                                             "ensemble");
                    if (static_cast<std::uint32_t>(gc.cluster) >=
                        cfg.ensemble.sbm_clusters)
                        bad(gp + ".cluster", "cluster index out of range");
                }
                cfg.groups.push_back(std::move(gc));
            }
        } else {
            cfg.groups = {GroupConfig{"advantaged", WeightRule::DegreeProduct, -1},
                          GroupConfig{"disadvantaged",
                                      WeightRule::InverseDegreeProduct, -1}};
        }
        if (j.contains("rewards")) {
            const json& rw = j["rewards"];
            if (!rw.is_object()) bad("rewards", "expected an object");
            expect_keys(rw, "rewards", {"k", "mode"});
            if (rw.contains("k")) cfg.reward_k = as_u32(rw["k"], "rewards.k");
            if (cfg.reward_k < 1) bad("rewards.k", "must be >= 1");
            if (rw.contains("mode"))
                cfg.reward_mode =
                    synth::reward_mode_from_name(as_str(rw["mode"], "rewards.mode"));
        }
    } else {
        if (j.contains("groups")) bad("groups", "comes from the bundle files");
        if (j.contains("rewards")) bad("rewards", "comes from the bundle files");
        if (j.contains("weights")) {
            cfg.bundle_weights = as_str(j["weights"], "weights");
            if (cfg.bundle_weights != "distance") {
                const WeightRule r = weight_rule_from_name(cfg.bundle_weights);
                if (r == WeightRule::Explicit)
                    bad("weights", "explicit weights come from data files");
            }
        }
    }

    if (j.contains("optimizer"))
        cfg.optimizer = optimizer_from_name(as_str(j["optimizer"], "optimizer"));
    if (j.contains("budget")) cfg.budget = as_u32(j["budget"], "budget");

    cfg.train = mrp::TrainConfig::synthetic_defaults();
    if (j.contains("train")) {
        if (!j["train"].is_object()) bad("train", "expected an object");
        parse_train(j["train"], cfg.train);
    }
    cfg.train.budget = static_cast<double>(cfg.budget);
    cfg.train.validate();

    if (j.contains("geci")) {
        if (!j["geci"].is_object()) bad("geci", "expected an object");
        expect_keys(j["geci"], "geci", {"prune"});
        if (j["geci"].contains("prune"))
            cfg.geci_prune = as_bool(j["geci"]["prune"], "geci.prune");
    }

    if (j.contains("eval")) {
        const json& ev = j["eval"];
        if (!ev.is_object()) bad("eval", "expected an object");
        expect_keys(ev, "eval", {"walks", "horizon", "gamma", "hit_mode", "pooled"});
        if (ev.contains("walks")) cfg.eval.walks = as_int(ev["walks"], "eval.walks");
        if (ev.contains("horizon"))
            cfg.eval.horizon = as_int(ev["horizon"], "eval.horizon");
        if (ev.contains("gamma")) cfg.eval.gamma = as_double(ev["gamma"], "eval.gamma");
        if (ev.contains("hit_mode"))
            cfg.eval.hit_mode =
                metrics::hit_mode_from_name(as_str(ev["hit_mode"], "eval.hit_mode"));
        if (ev.contains("pooled"))
            cfg.eval.pooled =
                metrics::pooled_mode_from_name(as_str(ev["pooled"], "eval.pooled"));
    }
    cfg.eval.validate();

    if (j.contains("facility")) {
        const json& fc = j["facility"];
        if (!fc.is_object()) bad("facility", "expected an object");
        expect_keys(fc, "facility", {"k"});
        if (!fc.contains("k")) bad("facility.k", "required");
        cfg.facility_k = as_u32(fc["k"], "facility.k");
        if (cfg.facility_k < 1) bad("facility.k", "must be >= 1");
    }

    cfg.sweep_budgets = {cfg.budget};
    cfg.sweep_seeds = {cfg.seed};
    cfg.sweep_optimizers = {cfg.optimizer};
    if (j.contains("sweep")) {
        const json& sw = j["sweep"];
        if (!sw.is_object()) bad("sweep", "expected an object");
        expect_keys(sw, "sweep", {"budgets", "seeds", "optimizers", "jobs"});
        if (sw.contains("budgets")) {
            if (!sw["budgets"].is_array() || sw["budgets"].empty())
                bad("sweep.budgets", "expected a non-empty array");
            cfg.sweep_budgets.clear();
            for (std::size_t i = 0; i < sw["budgets"].size(); ++i)
                cfg.sweep_budgets.push_back(
                    as_u32(sw["budgets"][i], "sweep.budgets[" + std::to_string(i) + "]"));
        }
        if (sw.contains("seeds")) {
            if (!sw["seeds"].is_array() || sw["seeds"].empty())
                bad("sweep.seeds", "expected a non-empty array");
            cfg.sweep_seeds.clear();
            for (std::size_t i = 0; i < sw["seeds"].size(); ++i)
                cfg.sweep_seeds.push_back(
                    as_u64(sw["seeds"][i], "sweep.seeds[" + std::to_string(i) + "]"));
        }
        if (sw.contains("optimizers")) {
            if (!sw["optimizers"].is_array() || sw["optimizers"].empty())
                bad("sweep.optimizers", "expected a non-empty array");
            cfg.sweep_optimizers.clear();
            for (std::size_t i = 0; i < sw["optimizers"].size(); ++i)
                cfg.sweep_optimizers.push_back(optimizer_from_name(as_str(
                    sw["optimizers"][i], "sweep.optimizers[" + std::to_string(i) + "]")));
        }
        if (sw.contains("jobs")) {
            cfg.sweep_jobs = as_int(sw["jobs"], "sweep.jobs");
            if (cfg.sweep_jobs < 1) bad("sweep.jobs", "must be >= 1");
        }
    }

    cfg.raw_json = resolved_json(cfg).dump();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return parse_config(text);
}

// ---------------------------------------------------------------------------
// Instance assembly

Instance build_instance(const ExperimentConfig& cfg, std::uint64_t master_seed,
                        bool want_mask) {
    if (cfg.has_ensemble) {
        synth::GenResult gen =
            synth::generate(cfg.ensemble, role_seed(master_seed, SeedRole::Graph));
        const NodeId n = gen.graph.node_count();
        std::vector<Edge> mask =
            want_mask ? complement_mask(n, gen.graph.edges()) : std::vector<Edge>{};

        std::map<std::string, std::vector<double>> weights;
        std::vector<GroupSpec> groups;
        for (const GroupConfig& gc : cfg.groups) {
            GroupSpec gs;
            gs.id = gc.id;
            gs.weight_rule = gc.weight_rule;
            if (gc.cluster >= 0) {
                std::vector<NodeId> members;
                for (NodeId v = 0; v < n; ++v)
                    if (gen.cluster[v] == static_cast<NodeId>(gc.cluster))
                        members.push_back(v);
                if (members.empty())
                    throw DataError("cluster " + std::to_string(gc.cluster) +
                                    " has no nodes");
                gs.mu0 = uniform_over(n, members);
            } else {
                gs.mu0 = uniform_distribution(n);
            }
            if (gc.weight_rule != WeightRule::Uniform)
                weights[gs.id] = synth::assign_group_weights(gen.graph, gc.weight_rule);
            groups.push_back(std::move(gs));
        }

        DiGraph weighted(n, gen.graph.edges(), std::move(mask), std::move(weights));
        RewardSet rewards = synth::place_rewards(
            weighted, cfg.reward_k, cfg.reward_mode, role_seed(master_seed, SeedRole::Rewards));
        return Instance{std::move(weighted), std::move(groups), std::move(rewards), {}};
    }

    ingest::Bundle b = ingest::load_bundle(cfg.bundle_path);
    std::map<std::string, std::vector<double>> weights;
    WeightRule rule = WeightRule::Uniform;
    if (cfg.bundle_weights == "distance") {
        if (!b.has_coords())
            throw DataError("weights: distance weighting requires coordinates");
        std::vector<double> w = ingest::distance_weights(b.graph, b.coords);
        for (const GroupSpec& g : b.groups) weights[g.id] = w;
        rule = WeightRule::Explicit;
    } else {
        rule = weight_rule_from_name(cfg.bundle_weights);
        if (rule != WeightRule::Uniform)
            for (const GroupSpec& g : b.groups)
                weights[g.id] = synth::assign_group_weights(b.graph, rule);
    }
    std::vector<GroupSpec> groups = b.groups;
    for (GroupSpec& g : groups) g.weight_rule = rule;
    DiGraph weighted(b.graph.node_count(), b.graph.edges(), b.graph.mask(),
                     std::move(weights));
    return Instance{std::move(weighted), std::move(groups), b.rewards,
                    std::move(b.coords)};
}

// ---------------------------------------------------------------------------
// Output helpers

namespace {

std::string fmtd(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.string());
    out << text;
}

std::string provenance(const ExperimentConfig& cfg) {
    return "# config: " + cfg.raw_json + "\n# seed: " + std::to_string(cfg.seed) +
           "\n";
}

json report_to_json(const metrics::EvalReport& rep) {
    return json::parse(rep.to_json());
}

json wrap_report(const ExperimentConfig& cfg, const metrics::EvalReport& rep) {
    json out;
    out["config"] = json::parse(cfg.raw_json);
    out["seed"] = cfg.seed;
    out["report"] = report_to_json(rep);
    return out;
}

std::string trajectory_csv(const ExperimentConfig& cfg,
                           const std::vector<mrp::EpochRecord>& recs) {
    std::string out = provenance(cfg);
    out += "epoch,sum_value,equity_dev,soft_mass,tau,lambda_equity,lambda_budget\n";
    for (const mrp::EpochRecord& r : recs) {
        out += std::to_string(r.epoch);
        out += ',';
        out += fmtd(r.sum_value);
        out += ',';
        out += fmtd(r.equity_dev);
        out += ',';
        out += fmtd(r.soft_mass);
        out += ',';
        out += fmtd(r.tau);
        out += ',';
        out += fmtd(r.lambda_equity);
        out += ',';
        out += fmtd(r.lambda_budget);
        out += '\n';
    }
    return out;
}

std::string edits_csv(const ExperimentConfig& cfg, const EditSet& edits) {
    std::string out = provenance(cfg);
    out += "src,dst\n";
    for (const Edge& e : edits.additions)
        out += std::to_string(e.src) + "," + std::to_string(e.dst) + "\n";
    return out;
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

// Runs the configured optimizer for one (budget, master seed) pair.
EditSet optimize_edits(const ExperimentConfig& cfg, const Instance& inst,
                       Optimizer opt, std::uint32_t budget, std::uint64_t master,
                       std::vector<mrp::EpochRecord>* trajectory,
                       std::vector<geci::GeciStep>* trace) {
    switch (opt) {
    case Optimizer::None: return {};
    case Optimizer::Geci: {
        geci::GeciConfig gc{budget, cfg.train.horizon, cfg.geci_prune};
        geci::GeciResult res = geci::geci_augment(inst.graph, inst.groups,
                                                  inst.rewards, gc);
        if (trace) *trace = std::move(res.trace);
        return std::move(res.edits);
    }
    case Optimizer::Mrp: {
        mrp::TrainConfig tc = cfg.train;
        tc.budget = static_cast<double>(budget);
        tc.seed = role_seed(master, SeedRole::Train);
        mrp::Problem prob(inst.graph, inst.groups, inst.rewards, tc);
        mrp::TrainResult res = prob.train(trajectory);
        return mrp::discretize(res.logits, inst.graph, budget);
    }
    }
    return {};
}

} // namespace

// ---------------------------------------------------------------------------
// Commands

std::string run_generate(const ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    Instance inst = build_instance(cfg, cfg.seed);
    ingest::Bundle b{inst.graph, inst.groups, inst.rewards, inst.coords};
    ingest::save_bundle(b, (fs::path(out_dir) / "bundle").string());

    json summary;
    summary["command"] = "generate";
    summary["status"] = "ok";
    summary["seed"] = cfg.seed;
    summary["source"] = cfg.source_name();
    summary["nodes"] = inst.graph.node_count();
    summary["edges"] = inst.graph.edges().size();
    summary["mask"] = inst.graph.mask().size();
    json gids = json::array();
    for (const GroupSpec& g : inst.groups) gids.push_back(g.id);
    summary["groups"] = std::move(gids);
    summary["rewards"] = inst.rewards.nodes.size();
    summary["files"]["bundle"] = "bundle/manifest.json";
    summary["config"] = json::parse(cfg.raw_json);
    const std::string text = summary.dump(2) + "\n";
    write_text(fs::path(out_dir) / "summary.json", text);
    return text;
}

std::string run_optimize(const ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    Instance inst = build_instance(cfg, cfg.seed);
    metrics::EvalSettings es = cfg.eval;
    es.seed = role_seed(cfg.seed, SeedRole::Eval);

    metrics::EvalReport before =
        metrics::full_report(inst.graph, inst.rewards, inst.groups, {}, es);
    write_text(fs::path(out_dir) / "before.json", wrap_report(cfg, before).dump(2) + "\n");

    std::vector<mrp::EpochRecord> trajectory;
    std::vector<geci::GeciStep> trace;
    EditSet edits;
    try {
        edits = optimize_edits(cfg, inst, cfg.optimizer, cfg.budget, cfg.seed,
                               &trajectory, &trace);
    } catch (const DivergenceError&) {
        // Keep the partial trajectory on disk so the run can be diagnosed.
        write_text(fs::path(out_dir) / "trajectory.csv",
                   trajectory_csv(cfg, trajectory));
        json summary;
        summary["command"] = "optimize";
        summary["status"] = "diverged";
        summary["seed"] = cfg.seed;
        summary["optimizer"] = optimizer_name(cfg.optimizer);
        summary["budget"] = cfg.budget;
        summary["epochs_completed"] = trajectory.size();
        summary["config"] = json::parse(cfg.raw_json);
        write_text(fs::path(out_dir) / "summary.json", summary.dump(2) + "\n");
        throw;
    }

    write_text(fs::path(out_dir) / "edits.csv", edits_csv(cfg, edits));
    if (cfg.optimizer == Optimizer::Mrp)
        write_text(fs::path(out_dir) / "trajectory.csv",
                   trajectory_csv(cfg, trajectory));

    metrics::EvalReport after =
        metrics::full_report(inst.graph, inst.rewards, inst.groups, edits, es);
    write_text(fs::path(out_dir) / "after.json", wrap_report(cfg, after).dump(2) + "\n");

    json summary;
    summary["command"] = "optimize";
    summary["status"] = "ok";
    summary["seed"] = cfg.seed;
    summary["optimizer"] = optimizer_name(cfg.optimizer);
    summary["budget"] = cfg.budget;
    summary["edit_count"] = edits.size();
    summary["utility_before"] = before.pooled_mean;
    summary["utility_after"] = after.pooled_mean;
    summary["gini_before"] = before.pooled_gini;
    summary["gini_after"] = after.pooled_gini;
    if (cfg.optimizer == Optimizer::Geci) {
        json steps = json::array();
        for (const geci::GeciStep& s : trace) {
            json step;
            step["group"] = s.group_id;
            step["src"] = s.edge.src;
            step["dst"] = s.edge.dst;
            step["utility_before"] = s.utility_before;
            step["utility_after"] = s.utility_after;
            steps.push_back(std::move(step));
        }
        summary["geci_steps"] = std::move(steps);
    }
    if (cfg.optimizer == Optimizer::Mrp) summary["epochs"] = trajectory.size();
    summary["files"]["edits"] = "edits.csv";
    summary["files"]["before"] = "before.json";
    summary["files"]["after"] = "after.json";
    if (cfg.optimizer == Optimizer::Mrp) summary["files"]["trajectory"] = "trajectory.csv";
    summary["config"] = json::parse(cfg.raw_json);
    const std::string text = summary.dump(2) + "\n";
    write_text(fs::path(out_dir) / "summary.json", text);
    return text;
}

std::string run_evaluate(const ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    Instance inst = build_instance(cfg, cfg.seed);
    metrics::EvalSettings es = cfg.eval;
    es.seed = role_seed(cfg.seed, SeedRole::Eval);
    metrics::EvalReport rep =
        metrics::full_report(inst.graph, inst.rewards, inst.groups, {}, es);
    write_text(fs::path(out_dir) / "report.json", wrap_report(cfg, rep).dump(2) + "\n");

    json summary;
    summary["command"] = "evaluate";
    summary["status"] = "ok";
    summary["seed"] = cfg.seed;
    summary["pooled_utility"] = rep.pooled_mean;
    summary["pooled_gini"] = rep.pooled_gini;
    summary["files"]["report"] = "report.json";
    summary["config"] = json::parse(cfg.raw_json);
    const std::string text = summary.dump(2) + "\n";
    write_text(fs::path(out_dir) / "summary.json", text);
    return text;
}

namespace {

struct SweepRow {
    std::string optimizer;
    std::uint32_t budget = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double utility = 0.0, gini = 0.0;
    std::vector<double> group_utility, group_exact;
    double utility_before = 0.0, gini_before = 0.0;
    std::size_t edit_count = 0;
};

SweepRow sweep_one(const ExperimentConfig& cfg, Optimizer opt, std::uint32_t budget,
                   std::uint64_t seed) {
    SweepRow row;
    row.optimizer = optimizer_name(opt);
    row.budget = budget;
    row.seed = seed;
    try {
        Instance inst = build_instance(cfg, seed);
        metrics::EvalSettings es = cfg.eval;
        es.seed = role_seed(seed, SeedRole::Eval);
        EditSet edits = optimize_edits(cfg, inst, opt, budget, seed, nullptr, nullptr);
        metrics::EvalReport before =
            metrics::full_report(inst.graph, inst.rewards, inst.groups, {}, es);
        metrics::EvalReport after =
            metrics::full_report(inst.graph, inst.rewards, inst.groups, edits, es);
        row.utility = after.pooled_mean;
        row.gini = after.pooled_gini;
        for (const metrics::GroupMetrics& gm : after.per_group) {
            row.group_utility.push_back(gm.mc_mean);
            row.group_exact.push_back(gm.exact_utility);
        }
        row.utility_before = before.pooled_mean;
        row.gini_before = before.pooled_gini;
        row.edit_count = edits.size();
        row.ok = true;
    } catch (const std::exception& e) {
        row.error = sanitize(e.what());
    }
    return row;
}

} // namespace

std::string run_sweep(const ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);

    // Group ids fix the CSV header; they depend only on the config.
    std::vector<std::string> gids;
    if (cfg.has_ensemble)
        for (const GroupConfig& g : cfg.groups) gids.push_back(g.id);
    else
        for (const GroupSpec& g : ingest::load_bundle(cfg.bundle_path).groups)
            gids.push_back(g.id);

    struct JobKey {
        Optimizer opt;
        std::uint32_t budget;
        std::uint64_t seed;
    };
    std::vector<JobKey> jobs;
    for (Optimizer o : cfg.sweep_optimizers)
        for (std::uint32_t b : cfg.sweep_budgets)
            for (std::uint64_t s : cfg.sweep_seeds) jobs.push_back({o, b, s});

    std::vector<SweepRow> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();)
            rows[i] = sweep_one(cfg, jobs[i].opt, jobs[i].budget, jobs[i].seed);
    };
    const int nthreads =
        std::min<int>(cfg.sweep_jobs, static_cast<int>(jobs.size()));
    if (nthreads <= 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < nthreads; ++t) threads.emplace_back(work);
        for (std::thread& t : threads) t.join();
    }

    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.optimizer != b.optimizer) return a.optimizer < b.optimizer;
        if (a.budget != b.budget) return a.budget < b.budget;
        return a.seed < b.seed;
    });

    std::string csv = provenance(cfg);
    csv += "ensemble,budget,seed,optimizer,utility,pooled_gini";
    for (const std::string& gid : gids) csv += ",utility_" + gid;
    for (const std::string& gid : gids) csv += ",exact_" + gid;
    csv += ",utility_before,pooled_gini_before,edits,status\n";
    std::size_t ok_count = 0;
    const std::string source = cfg.source_name();
    for (const SweepRow& r : rows) {
        csv += source + "," + std::to_string(r.budget) + "," + std::to_string(r.seed) +
               "," + r.optimizer;
        if (r.ok) {
            csv += "," + fmtd(r.utility) + "," + fmtd(r.gini);
            for (double u : r.group_utility) csv += "," + fmtd(u);
            for (double u : r.group_exact) csv += "," + fmtd(u);
            csv += "," + fmtd(r.utility_before) + "," + fmtd(r.gini_before) + "," +
                   std::to_string(r.edit_count) + ",ok\n";
            ++ok_count;
        } else {
            csv += ",,";
            for (std::size_t i = 0; i < 2 * gids.size(); ++i) csv += ",";
            csv += ",,,error: " + r.error + "\n";
        }
    }
    write_text(fs::path(out_dir) / "sweep.csv", csv);

    json summary;
    summary["command"] = "sweep";
    summary["status"] = ok_count == rows.size() ? "ok" : "partial";
    summary["seed"] = cfg.seed;
    summary["rows"] = rows.size();
    summary["ok_rows"] = ok_count;
    summary["files"]["sweep"] = "sweep.csv";
    summary["config"] = json::parse(cfg.raw_json);
    const std::string text = summary.dump(2) + "\n";
    write_text(fs::path(out_dir) / "summary.json", text);
    return text;
}

std::string run_facility(const ExperimentConfig& cfg, const std::string& out_dir) {
    if (cfg.facility_k < 1)
        throw ConfigError("facility.k: required for the facility command");
    fs::create_directories(out_dir);
    Instance inst = build_instance(cfg, cfg.seed, /*want_mask=*/false);
    metrics::EvalSettings es = cfg.eval;
    es.seed = role_seed(cfg.seed, SeedRole::Eval);

    mrp::TrainConfig tc = cfg.train;
    tc.seed = role_seed(cfg.seed, SeedRole::Train);
    std::vector<mrp::EpochRecord> trajectory;
    facility::FacilityResult res;
    try {
        res = facility::train_facility(inst.graph, inst.groups, cfg.facility_k, tc,
                                       &trajectory);
    } catch (const DivergenceError&) {
        write_text(fs::path(out_dir) / "trajectory.csv",
                   trajectory_csv(cfg, trajectory));
        json summary;
        summary["command"] = "facility";
        summary["status"] = "diverged";
        summary["seed"] = cfg.seed;
        summary["k"] = cfg.facility_k;
        summary["epochs_completed"] = trajectory.size();
        summary["config"] = json::parse(cfg.raw_json);
        write_text(fs::path(out_dir) / "summary.json", summary.dump(2) + "\n");
        throw;
    }
    write_text(fs::path(out_dir) / "trajectory.csv", trajectory_csv(cfg, res.trajectory));

    std::string placement = provenance(cfg);
    placement += "node\n";
    for (NodeId v : res.placement.nodes) placement += std::to_string(v) + "\n";
    write_text(fs::path(out_dir) / "placement.csv", placement);

    metrics::EvalReport learned =
        metrics::full_report(inst.graph, res.placement, inst.groups, {}, es);
    write_text(fs::path(out_dir) / "report.json",
               wrap_report(cfg, learned).dump(2) + "\n");

    // Comparison point: k facilities placed uniformly at random.
    const NodeId n = inst.graph.node_count();
    std::vector<NodeId> pool(n);
    for (NodeId v = 0; v < n; ++v) pool[v] = v;
    rng::Stream rs(role_seed(cfg.seed, SeedRole::Rewards));
    for (std::uint32_t i = 0; i < cfg.facility_k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rs.below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(cfg.facility_k);
    std::sort(pool.begin(), pool.end());
    RewardSet random_placement{std::move(pool)};
    metrics::EvalReport baseline =
        metrics::full_report(inst.graph, random_placement, inst.groups, {}, es);
    write_text(fs::path(out_dir) / "baseline.json",
               wrap_report(cfg, baseline).dump(2) + "\n");

    json summary;
    summary["command"] = "facility";
    summary["status"] = "ok";
    summary["seed"] = cfg.seed;
    summary["k"] = cfg.facility_k;
    json placed = json::array();
    for (NodeId v : res.placement.nodes) placed.push_back(v);
    summary["placement"] = std::move(placed);
    summary["utility"] = learned.pooled_mean;
    summary["pooled_gini"] = learned.pooled_gini;
    summary["baseline_utility"] = baseline.pooled_mean;
    summary["baseline_gini"] = baseline.pooled_gini;
    summary["files"]["placement"] = "placement.csv";
    summary["files"]["trajectory"] = "trajectory.csv";
    summary["files"]["report"] = "report.json";
    summary["files"]["baseline"] = "baseline.json";
    summary["config"] = json::parse(cfg.raw_json);
    const std::string text = summary.dump(2) + "\n";
    write_text(fs::path(out_dir) / "summary.json", text);
    return text;
}

std::string run_command(const std::string& command, const ExperimentConfig& cfg,
                        const std::string& out_dir) {
    if (command == "generate") return run_generate(cfg, out_dir);
    if (command == "optimize") return run_optimize(cfg, out_dir);
    if (command == "evaluate") return run_evaluate(cfg, out_dir);
    if (command == "sweep") return run_sweep(cfg, out_dir);
    if (command == "facility") return run_facility(cfg, out_dir);
    throw ConfigError("unknown command '" + command + "'");
}

} // namespace eqg::experiment
