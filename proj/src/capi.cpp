#include "equigraph.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include <json.hpp>

#include "equigraph/errors.hpp"
#include "equigraph/experiment.hpp"
#include "equigraph/facility.hpp"
#include "equigraph/geci.hpp"
#include "equigraph/ingest.hpp"
#include "equigraph/mrp.hpp"

using nlohmann::json;
namespace ex = eqg::experiment;

struct eqg_bundle {
    ex::Instance inst;
};

struct eqg_result {
    json edits;
    json detail;
    std::string trajectory;
};

namespace {

thread_local std::string t_error = "no error";

void set_error(const char* what) { t_error = what ? what : "unknown error"; }

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p) std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

template <typename Fn>
eqg_status guarded(Fn&& fn) noexcept {
    try {
        fn();
        return EQG_OK;
    } catch (const eqg::ConfigError& e) {
        set_error(e.what());
        return EQG_ERR_CONFIG;
    } catch (const eqg::DataError& e) {
        set_error(e.what());
        return EQG_ERR_DATA;
    } catch (const eqg::DivergenceError& e) {
        set_error(e.what());
        return EQG_ERR_DIVERGED;
    } catch (const std::exception& e) {
        set_error(e.what());
        return EQG_ERR_INTERNAL;
    } catch (...) {
        set_error("unknown error");
        return EQG_ERR_INTERNAL;
    }
}

eqg_status need(bool ok, const char* msg) {
    if (ok) return EQG_OK;
    set_error(msg);
    return EQG_ERR_CONFIG;
}

eqg::EditSet parse_edits_json(const eqg::DiGraph& g, const char* edits_json) {
    if (!edits_json || !*edits_json) return {};
    json j;
    try {
        j = json::parse(edits_json);
    } catch (const json::parse_error& e) {
        throw eqg::DataError(std::string("edits: ") + e.what());
    }
    if (!j.is_array()) throw eqg::DataError("edits: expected a JSON array");
    std::vector<eqg::Edge> edges;
    for (const json& item : j) {
        if (!item.is_array() || item.size() != 2 || !item[0].is_number_unsigned() ||
            !item[1].is_number_unsigned())
            throw eqg::DataError("edits: each entry must be [src,dst]");
        edges.push_back({item[0].get<eqg::NodeId>(), item[1].get<eqg::NodeId>()});
    }
    eqg::EditSet edits = eqg::EditSet::from_edges(std::move(edges));
    eqg::validate_edits(g, edits);
    return edits;
}

std::string trajectory_csv_plain(const std::vector<eqg::mrp::EpochRecord>& recs) {
    std::string out =
        "epoch,sum_value,equity_dev,soft_mass,tau,lambda_equity,lambda_budget\n";
    for (const auto& r : recs) {
        out += std::to_string(r.epoch);
        for (double v : {r.sum_value, r.equity_dev, r.soft_mass, r.tau,
                         r.lambda_equity, r.lambda_budget})
            out += "," + json(v).dump();
        out += "\n";
    }
    return out;
}

} // namespace

extern "C" {

const char* eqg_version(void) { return "0.1.0"; }

const char* eqg_last_error(void) { return t_error.c_str(); }

void eqg_string_free(char* s) { std::free(s); }

eqg_status eqg_bundle_load(const char* manifest_path, eqg_bundle** out) {
    if (eqg_status s = need(manifest_path && out, "null argument")) return s;
    *out = nullptr;
    return guarded([&] {
        eqg::ingest::Bundle b = eqg::ingest::load_bundle(manifest_path);
        *out = new eqg_bundle{ex::Instance{std::move(b.graph), std::move(b.groups),
                                            std::move(b.rewards),
                                            std::move(b.coords)}};
    });
}

eqg_status eqg_bundle_generate(const char* config_json, eqg_bundle** out) {
    if (eqg_status s = need(config_json && out, "null argument")) return s;
    *out = nullptr;
    return guarded([&] {
        ex::ExperimentConfig cfg = ex::parse_config(config_json);
        *out = new eqg_bundle{ex::build_instance(cfg, cfg.seed)};
    });
}

eqg_status eqg_bundle_save(const eqg_bundle* b, const char* dir) {
    if (eqg_status s = need(b && dir, "null argument")) return s;
    return guarded([&] {
        eqg::ingest::Bundle bundle{b->inst.graph, b->inst.groups, b->inst.rewards,
                                   b->inst.coords};
        eqg::ingest::save_bundle(bundle, dir);
    });
}

uint32_t eqg_bundle_nodes(const eqg_bundle* b) {
    return b ? b->inst.graph.node_count() : 0;
}

uint64_t eqg_bundle_edge_count(const eqg_bundle* b) {
    return b ? b->inst.graph.edges().size() : 0;
}

uint64_t eqg_bundle_mask_count(const eqg_bundle* b) {
    return b ? b->inst.graph.mask().size() : 0;
}

uint32_t eqg_bundle_group_count(const eqg_bundle* b) {
    return b ? static_cast<uint32_t>(b->inst.groups.size()) : 0;
}

uint32_t eqg_bundle_reward_count(const eqg_bundle* b) {
    return b ? static_cast<uint32_t>(b->inst.rewards.nodes.size()) : 0;
}

eqg_status eqg_bundle_info_json(const eqg_bundle* b, char** out) {
    if (eqg_status s = need(b && out, "null argument")) return s;
    *out = nullptr;
    return guarded([&] {
        json info;
        info["nodes"] = b->inst.graph.node_count();
        info["edges"] = b->inst.graph.edges().size();
        info["mask"] = b->inst.graph.mask().size();
        json gids = json::array();
        for (const eqg::GroupSpec& g : b->inst.groups) gids.push_back(g.id);
        info["groups"] = std::move(gids);
        info["rewards"] = b->inst.rewards.nodes;
        info["has_coordinates"] = !b->inst.coords.empty();
        *out = dup_string(info.dump(2));
    });
}

void eqg_bundle_free(eqg_bundle* b) { delete b; }

eqg_status eqg_optimize_geci(const eqg_bundle* b, const char* config_json,
                             eqg_result** out) {
    if (eqg_status s = need(b && config_json && out, "null argument")) return s;
    *out = nullptr;
    return guarded([&] {
        ex::ExperimentConfig cfg = ex::parse_config(config_json);
        eqg::geci::GeciConfig gc{cfg.budget, cfg.train.horizon, cfg.geci_prune};
        eqg::geci::GeciResult res =
            eqg::geci::geci_augment(b->inst.graph, b->inst.groups, b->inst.rewards, gc);
        auto r = std::make_unique<eqg_result>();
        r->edits = json::array();
        for (const eqg::Edge& e : res.edits.additions)
            r->edits.push_back({e.src, e.dst});
        json steps = json::array();
        for (const eqg::geci::GeciStep& s : res.trace) {
            json step;
            step["group"] = s.group_id;
            step["src"] = s.edge.src;
            step["dst"] = s.edge.dst;
            step["utility_before"] = s.utility_before;
            step["utility_after"] = s.utility_after;
            steps.push_back(std::move(step));
        }
        r->detail = {{"optimizer", "geci"}, {"steps", std::move(steps)}};
        *out = r.release();
    });
}

eqg_status eqg_optimize_mrp(const eqg_bundle* b, const char* config_json,
                            eqg_result** out) {
    if (eqg_status s = need(b && config_json && out, "null argument")) return s;
    *out = nullptr;
    return guarded([&] {
        ex::ExperimentConfig cfg = ex::parse_config(config_json);
        eqg::mrp::TrainConfig tc = cfg.train;
        tc.budget = static_cast<double>(cfg.budget);
        tc.seed = ex::role_seed(cfg.seed, ex::SeedRole::Train);
        eqg::mrp::Problem prob(b->inst.graph, b->inst.groups, b->inst.rewards, tc);
        eqg::mrp::TrainResult res = prob.train();
        eqg::EditSet edits = eqg::mrp::discretize(res.logits, b->inst.graph, cfg.budget);
        auto r = std::make_unique<eqg_result>();
        r->edits = json::array();
        for (const eqg::Edge& e : edits.additions) r->edits.push_back({e.src, e.dst});
        r->detail = {{"optimizer", "mrp"},
                     {"epochs", res.trajectory.size()},
                     {"tau_final", res.logits.tau},
                     {"soft_mass_final",
                      res.trajectory.empty() ? 0.0
                                             : res.trajectory.back().soft_mass}};
        r->trajectory = trajectory_csv_plain(res.trajectory);
        *out = r.release();
    });
}

eqg_status eqg_optimize_facility(const eqg_bundle* b, const char* config_json,
                                 eqg_result** out) {
    if (eqg_status s = need(b && config_json && out, "null argument")) return s;
    *out = nullptr;
    return guarded([&] {
        ex::ExperimentConfig cfg = ex::parse_config(config_json);
        if (cfg.facility_k < 1)
            throw eqg::ConfigError("facility.k: required for facility optimization");
        eqg::mrp::TrainConfig tc = cfg.train;
        tc.seed = ex::role_seed(cfg.seed, ex::SeedRole::Train);
        eqg::facility::FacilityResult res = eqg::facility::train_facility(
            b->inst.graph, b->inst.groups, cfg.facility_k, tc);
        auto r = std::make_unique<eqg_result>();
        r->edits = json(res.placement.nodes);
        r->detail = {{"optimizer", "facility"},
                     {"k", cfg.facility_k},
                     {"epochs", res.trajectory.size()},
                     {"tau_final", res.tau}};
        r->trajectory = trajectory_csv_plain(res.trajectory);
        *out = r.release();
    });
}

eqg_status eqg_result_edits_json(const eqg_result* r, char** out) {
    if (eqg_status s = need(r && out, "null argument")) return s;
    *out = nullptr;
    return guarded([&] { *out = dup_string(r->edits.dump()); });
}

eqg_status eqg_result_detail_json(const eqg_result* r, char** out) {
    if (eqg_status s = need(r && out, "null argument")) return s;
    *out = nullptr;
    return guarded([&] { *out = dup_string(r->detail.dump(2)); });
}

eqg_status eqg_result_trajectory_csv(const eqg_result* r, char** out) {
    if (eqg_status s = need(r && out, "null argument")) return s;
    *out = nullptr;
    return guarded([&] { *out = dup_string(r->trajectory); });
}

void eqg_result_free(eqg_result* r) { delete r; }

eqg_status eqg_evaluate(const eqg_bundle* b, const char* config_json,
                        const char* edits_json, char** report_json) {
    if (eqg_status s = need(b && config_json && report_json, "null argument"))
        return s;
    *report_json = nullptr;
    return guarded([&] {
        ex::ExperimentConfig cfg = ex::parse_config(config_json);
        eqg::EditSet edits = parse_edits_json(b->inst.graph, edits_json);
        eqg::metrics::EvalSettings es = cfg.eval;
        es.seed = ex::role_seed(cfg.seed, ex::SeedRole::Eval);
        eqg::metrics::EvalReport rep = eqg::metrics::full_report(
            b->inst.graph, b->inst.rewards, b->inst.groups, edits, es);
        *report_json = dup_string(rep.to_json());
    });
}

eqg_status eqg_run(const char* command, const char* config_json,
                   const char* out_dir, char** summary_json) {
    if (eqg_status s = need(command && config_json && out_dir, "null argument"))
        return s;
    if (summary_json) *summary_json = nullptr;
    return guarded([&] {
        ex::ExperimentConfig cfg = ex::parse_config(config_json);
        std::string summary = ex::run_command(command, cfg, out_dir);
        if (summary_json) *summary_json = dup_string(summary);
    });
}

} // extern "C"
