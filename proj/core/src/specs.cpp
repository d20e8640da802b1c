// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON ingestion and validation for the cluster/model/job documents.

#include "strata/specs.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "strata/error.hpp"

namespace strata {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& doc, const std::string& message) {
    throw SpecError(doc + ": " + message);
}

json parse_document(const std::string& doc, std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        fail(doc, std::string("parse error: ") + e.what());
    }
}

void require_object(const std::string& doc, const json& j, const std::string& path) {
    if (!j.is_object()) fail(doc, path + ": expected an object");
}

/// Unknown keys are a hard error: typos must not silently become defaults.
void check_keys(const std::string& doc, const json& j, const std::string& path,
                const std::set<std::string>& allowed) {
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key()))
            fail(doc, path + ": unknown key \"" + item.key() + "\"");
    }
}

const json& require_key(const std::string& doc, const json& j, const std::string& path,
                        const std::string& key) {
    auto it = j.find(key);
    if (it == j.end()) fail(doc, path + "." + key + ": missing");
    return *it;
}

double get_number(const std::string& doc, const json& j, const std::string& path,
                  const std::string& key) {
    const json& v = require_key(doc, j, path, key);
    if (!v.is_number()) fail(doc, path + "." + key + ": expected a number");
    return v.get<double>();
}

std::int64_t get_integer(const std::string& doc, const json& j, const std::string& path,
                         const std::string& key) {
    const json& v = require_key(doc, j, path, key);
    if (!v.is_number_integer())
        fail(doc, path + "." + key + ": expected an integer");
    return v.get<std::int64_t>();
}

LinkSpec parse_link(const std::string& doc, const json& j, const std::string& path) {
    require_object(doc, j, path);
    check_keys(doc, j, path, {"bandwidth_bps", "latency_s"});
    LinkSpec link;
    link.bandwidth_bps = get_number(doc, j, path, "bandwidth_bps");
    link.latency_s = get_number(doc, j, path, "latency_s");
    if (!(link.bandwidth_bps > 0)) fail(doc, path + ".bandwidth_bps: must be > 0");
    if (link.latency_s < 0) fail(doc, path + ".latency_s: must be >= 0");
    return link;
}

json link_to_json(const LinkSpec& link) {
    return json{{"bandwidth_bps", link.bandwidth_bps}, {"latency_s", link.latency_s}};
}

}  // namespace

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::attention: return "attention";
        case LayerKind::mlp: return "mlp";
        case LayerKind::embedding: return "embedding";
        case LayerKind::other: return "other";
    }
    return "other";
}

LayerKind layer_kind_from_string(std::string_view name) {
    if (name == "attention") return LayerKind::attention;
    if (name == "mlp") return LayerKind::mlp;
    if (name == "embedding") return LayerKind::embedding;
    if (name == "other") return LayerKind::other;
    throw SpecError("unknown layer kind \"" + std::string(name) + "\"");
}

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::stage_slowdown: return "stage_slowdown";
        case EventKind::bandwidth_drop: return "bandwidth_drop";
        case EventKind::restore: return "restore";
    }
    return "restore";
}

std::string_view to_string(LinkId link) {
    return link == LinkId::intra ? "intra" : "inter";
}

std::int64_t ModelSpec::total_params() const {
    std::int64_t total = 0;
    for (const auto& layer : layers) total += layer.param_count;
    return total;
}

ClusterSpec parse_cluster_spec(std::string_view text) {
    const std::string doc = "cluster spec";
    json j = parse_document(doc, text);
    require_object(doc, j, "$");
    check_keys(doc, j, "$",
               {"node_count", "gpus_per_node", "device_memory_bytes",
                "device_peak_flops", "device_efficiency", "intra_node", "inter_node"});

    ClusterSpec c;
    c.node_count = static_cast<int>(get_integer(doc, j, "$", "node_count"));
    c.gpus_per_node = static_cast<int>(get_integer(doc, j, "$", "gpus_per_node"));
    c.device_memory_bytes = static_cast<std::int64_t>(get_number(doc, j, "$", "device_memory_bytes"));
    c.device_peak_flops = get_number(doc, j, "$", "device_peak_flops");
    c.device_efficiency = get_number(doc, j, "$", "device_efficiency");
    c.intra_node = parse_link(doc, require_key(doc, j, "$", "intra_node"), "$.intra_node");
    c.inter_node = parse_link(doc, require_key(doc, j, "$", "inter_node"), "$.inter_node");

    if (c.node_count < 1) fail(doc, "node_count: must satisfy node_count >= 1");
    if (c.gpus_per_node < 1) fail(doc, "gpus_per_node: must satisfy gpus_per_node >= 1");
    if (c.device_memory_bytes <= 0) fail(doc, "device_memory_bytes: must be > 0");
    if (!(c.device_peak_flops > 0)) fail(doc, "device_peak_flops: must be > 0");
    if (!(c.device_efficiency > 0 && c.device_efficiency <= 1))
        fail(doc, "device_efficiency: must be in (0, 1]");
    return c;
}

ModelSpec parse_model_spec(std::string_view text) {
    const std::string doc = "model spec";
    json j = parse_document(doc, text);
    require_object(doc, j, "$");
    check_keys(doc, j, "$", {"layers"});

    const json& layers = require_key(doc, j, "$", "layers");
    if (!layers.is_array() || layers.empty())
        fail(doc, "layers: expected a non-empty array");

    ModelSpec m;
    m.layers.reserve(layers.size());
    int idx = 0;
    for (const json& lj : layers) {
        const std::string path = "layers[" + std::to_string(idx) + "]";
        require_object(doc, lj, path);
        check_keys(doc, lj, path,
                   {"kind", "param_count", "flops_fwd_per_sample",
                    "activation_bytes_per_sample", "hidden_size", "seq_len"});
        LayerSpec layer;
        const json& kind = require_key(doc, lj, path, "kind");
        if (!kind.is_string()) fail(doc, path + ".kind: expected a string");
        try {
            layer.kind = layer_kind_from_string(kind.get<std::string>());
        } catch (const SpecError& e) {
            fail(doc, path + ".kind: " + e.what());
        }
        layer.param_count = get_integer(doc, lj, path, "param_count");
        if (layer.param_count < 0) fail(doc, path + ".param_count: must be >= 0");
        if (lj.contains("flops_fwd_per_sample")) {
            if (!lj["flops_fwd_per_sample"].is_number())
                fail(doc, path + ".flops_fwd_per_sample: expected a number");
            layer.flops_fwd_per_sample = lj["flops_fwd_per_sample"].get<double>();
            if (*layer.flops_fwd_per_sample < 0)
                fail(doc, path + ".flops_fwd_per_sample: must be >= 0");
        }
        if (lj.contains("activation_bytes_per_sample")) {
            layer.activation_bytes_per_sample =
                get_integer(doc, lj, path, "activation_bytes_per_sample");
            if (*layer.activation_bytes_per_sample < 0)
                fail(doc, path + ".activation_bytes_per_sample: must be >= 0");
        }
        if (lj.contains("hidden_size")) {
            layer.hidden_size = get_integer(doc, lj, path, "hidden_size");
            if (*layer.hidden_size <= 0) fail(doc, path + ".hidden_size: must be > 0");
        }
        if (lj.contains("seq_len")) {
            layer.seq_len = get_integer(doc, lj, path, "seq_len");
            if (*layer.seq_len <= 0) fail(doc, path + ".seq_len: must be > 0");
        }
        const bool formula_kind =
            layer.kind == LayerKind::attention || layer.kind == LayerKind::mlp;
        if (!layer.flops_fwd_per_sample &&
            !(formula_kind && layer.hidden_size && layer.seq_len)) {
            fail(doc, path + ": needs flops_fwd_per_sample, or hidden_size+seq_len "
                            "for attention/mlp layers");
        }
        m.layers.push_back(layer);
        ++idx;
    }
    return m;
}

namespace {

ScenarioEvent parse_event(const std::string& doc, const json& ej, const std::string& path,
                          std::int64_t target_steps) {
    require_object(doc, ej, path);
    check_keys(doc, ej, path, {"at_step", "kind", "target", "multiplier"});
    ScenarioEvent e;
    e.at_step = get_integer(doc, ej, path, "at_step");
    if (e.at_step < 0 || e.at_step > target_steps)
        fail(doc, path + ".at_step: must be within [0, target_steps]");

    const json& kind = require_key(doc, ej, path, "kind");
    if (!kind.is_string()) fail(doc, path + ".kind: expected a string");
    const std::string kind_s = kind.get<std::string>();
    if (kind_s == "stage_slowdown") e.kind = EventKind::stage_slowdown;
    else if (kind_s == "bandwidth_drop") e.kind = EventKind::bandwidth_drop;
    else if (kind_s == "restore") e.kind = EventKind::restore;
    else fail(doc, path + ".kind: unknown kind \"" + kind_s + "\"");

    const json& target = require_key(doc, ej, path, "target");
    if (target.is_number_integer()) {
        int stage = target.get<int>();
        if (stage < 0) fail(doc, path + ".target: stage index must be >= 0");
        e.target = stage;
    } else if (target.is_string()) {
        const std::string t = target.get<std::string>();
        if (t == "intra") e.target = LinkId::intra;
        else if (t == "inter") e.target = LinkId::inter;
        else fail(doc, path + ".target: link id must be \"intra\" or \"inter\"");
    } else {
        fail(doc, path + ".target: expected a stage index or a link id");
    }
    if (e.kind == EventKind::stage_slowdown && !std::holds_alternative<int>(e.target))
        fail(doc, path + ".target: stage_slowdown targets a stage index");
    if (e.kind == EventKind::bandwidth_drop && !std::holds_alternative<LinkId>(e.target))
        fail(doc, path + ".target: bandwidth_drop targets a link id");

    if (ej.contains("multiplier")) {
        if (!ej["multiplier"].is_number())
            fail(doc, path + ".multiplier: expected a number");
        e.multiplier = ej["multiplier"].get<double>();
    }
    if (!(e.multiplier > 0)) fail(doc, path + ".multiplier: must be > 0");
    return e;
}

SelectorConfig parse_selector_block(const std::string& doc, const json& sj,
                                    const std::string& path) {
    require_object(doc, sj, path);
    check_keys(doc, sj, path,
               {"comm_fraction_max", "min_utilization", "headroom_max",
                "imbalance_max", "hysteresis_steps", "monitor_interval", "window",
                "gain_margin", "min_relative_gain", "full_search"});
    SelectorConfig s;
    auto num = [&](const char* key, double& out) {
        if (sj.contains(key)) {
            if (!sj[key].is_number()) fail(doc, path + "." + key + ": expected a number");
            out = sj[key].get<double>();
        }
    };
    auto integer = [&](const char* key, std::int64_t& out) {
        if (sj.contains(key)) {
            if (!sj[key].is_number_integer())
                fail(doc, path + "." + key + ": expected an integer");
            out = sj[key].get<std::int64_t>();
            if (out < 0) fail(doc, path + "." + key + ": must be >= 0");
        }
    };
    num("comm_fraction_max", s.comm_fraction_max);
    num("min_utilization", s.min_utilization);
    num("headroom_max", s.headroom_max);
    num("imbalance_max", s.imbalance_max);
    integer("hysteresis_steps", s.hysteresis_steps);
    integer("monitor_interval", s.monitor_interval);
    integer("window", s.window);
    num("gain_margin", s.gain_margin);
    num("min_relative_gain", s.min_relative_gain);
    if (sj.contains("full_search")) {
        if (!sj["full_search"].is_boolean())
            fail(doc, path + ".full_search: expected a boolean");
        s.full_search = sj["full_search"].get<bool>();
    }
    if (s.monitor_interval < 1) fail(doc, path + ".monitor_interval: must be >= 1");
    if (s.window < 1) fail(doc, path + ".window: must be >= 1");
    return s;
}

}  // namespace

JobSpec parse_job_spec(std::string_view text) {
    const std::string doc = "job spec";
    json j = parse_document(doc, text);
    require_object(doc, j, "$");
    check_keys(doc, j, "$",
               {"global_batch_size", "target_steps", "precision_bytes", "optimizer",
                "zero_stage_allowed", "loader_max_throughput", "adaptation_enabled",
                "seed", "scenario_events", "selector"});

    JobSpec job;
    job.global_batch_size = get_integer(doc, j, "$", "global_batch_size");
    job.target_steps = get_integer(doc, j, "$", "target_steps");
    if (job.global_batch_size < 1) fail(doc, "global_batch_size: must be >= 1");
    if (job.target_steps < 1) fail(doc, "target_steps: must be >= 1");

    if (j.contains("precision_bytes")) {
        job.precision_bytes = static_cast<int>(get_integer(doc, j, "$", "precision_bytes"));
        if (job.precision_bytes < 1) fail(doc, "precision_bytes: must be >= 1");
    }
    if (j.contains("optimizer")) {
        if (!j["optimizer"].is_string()) fail(doc, "optimizer: expected a string");
        job.optimizer = j["optimizer"].get<std::string>();
        if (job.optimizer != "adam")
            fail(doc, "optimizer: only \"adam\" is supported");
    }
    if (j.contains("zero_stage_allowed")) {
        job.zero_stage_allowed =
            static_cast<int>(get_integer(doc, j, "$", "zero_stage_allowed"));
        if (job.zero_stage_allowed < 0 || job.zero_stage_allowed > 3)
            fail(doc, "zero_stage_allowed: must be in {0,1,2,3}");
    }
    if (j.contains("loader_max_throughput")) {
        job.loader_max_throughput = get_number(doc, j, "$", "loader_max_throughput");
        if (!(job.loader_max_throughput > 0))
            fail(doc, "loader_max_throughput: must be > 0");
    }
    if (j.contains("adaptation_enabled")) {
        if (!j["adaptation_enabled"].is_boolean())
            fail(doc, "adaptation_enabled: expected a boolean");
        job.adaptation_enabled = j["adaptation_enabled"].get<bool>();
    }
    if (j.contains("seed")) {
        std::int64_t seed = get_integer(doc, j, "$", "seed");
        job.seed = static_cast<std::uint64_t>(seed);
    }
    if (j.contains("scenario_events")) {
        const json& events = j["scenario_events"];
        if (!events.is_array()) fail(doc, "scenario_events: expected an array");
        int idx = 0;
        for (const json& ej : events) {
            job.scenario_events.push_back(parse_event(
                doc, ej, "scenario_events[" + std::to_string(idx) + "]",
                job.target_steps));
            ++idx;
        }
    }
    if (j.contains("selector"))
        job.selector = parse_selector_block(doc, j["selector"], "$.selector");
    return job;
}

std::string to_json(const ClusterSpec& cluster) {
    json j{{"node_count", cluster.node_count},
           {"gpus_per_node", cluster.gpus_per_node},
           {"device_memory_bytes", cluster.device_memory_bytes},
           {"device_peak_flops", cluster.device_peak_flops},
           {"device_efficiency", cluster.device_efficiency},
           {"intra_node", link_to_json(cluster.intra_node)},
           {"inter_node", link_to_json(cluster.inter_node)}};
    return j.dump(2);
}

std::string to_json(const ModelSpec& model) {
    json layers = json::array();
    for (const auto& layer : model.layers) {
        json lj{{"kind", std::string(to_string(layer.kind))},
                {"param_count", layer.param_count}};
        if (layer.flops_fwd_per_sample) lj["flops_fwd_per_sample"] = *layer.flops_fwd_per_sample;
        if (layer.activation_bytes_per_sample)
            lj["activation_bytes_per_sample"] = *layer.activation_bytes_per_sample;
        if (layer.hidden_size) lj["hidden_size"] = *layer.hidden_size;
        if (layer.seq_len) lj["seq_len"] = *layer.seq_len;
        layers.push_back(std::move(lj));
    }
    return json{{"layers", std::move(layers)}}.dump(2);
}

std::string to_json(const JobSpec& job) {
    json events = json::array();
    for (const auto& e : job.scenario_events) {
        json ej{{"at_step", e.at_step}, {"kind", std::string(to_string(e.kind))}};
        if (std::holds_alternative<int>(e.target))
            ej["target"] = std::get<int>(e.target);
        else
            ej["target"] = std::string(to_string(std::get<LinkId>(e.target)));
        ej["multiplier"] = e.multiplier;
        events.push_back(std::move(ej));
    }
    json j{{"global_batch_size", job.global_batch_size},
           {"target_steps", job.target_steps},
           {"precision_bytes", job.precision_bytes},
           {"optimizer", job.optimizer},
           {"zero_stage_allowed", job.zero_stage_allowed},
           {"loader_max_throughput", job.loader_max_throughput},
           {"adaptation_enabled", job.adaptation_enabled},
           {"seed", static_cast<std::int64_t>(job.seed)},
           {"scenario_events", std::move(events)}};
    if (job.selector != SelectorConfig{}) {
        j["selector"] = json{{"comm_fraction_max", job.selector.comm_fraction_max},
                             {"min_utilization", job.selector.min_utilization},
                             {"headroom_max", job.selector.headroom_max},
                             {"imbalance_max", job.selector.imbalance_max},
                             {"hysteresis_steps", job.selector.hysteresis_steps},
                             {"monitor_interval", job.selector.monitor_interval},
                             {"window", job.selector.window},
                             {"gain_margin", job.selector.gain_margin},
                             {"min_relative_gain", job.selector.min_relative_gain},
                             {"full_search", job.selector.full_search}};
    }
    return j.dump(2);
}

}  // namespace strata
