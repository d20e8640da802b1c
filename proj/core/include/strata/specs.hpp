// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// Declarative input documents: cluster, model and job descriptions.
// Everything downstream (profilers, planner, simulator) consumes these
// parsed structs, never raw JSON.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace strata {

/// One interconnect class (bandwidth/latency pair).
struct LinkSpec {
    double bandwidth_bps = 0.0;
    double latency_s = 0.0;

    bool operator==(const LinkSpec&) const = default;
};

struct ClusterSpec {
    int node_count = 0;
    int gpus_per_node = 0;
    std::int64_t device_memory_bytes = 0;
    double device_peak_flops = 0.0;
    double device_efficiency = 0.0;  // fraction of peak actually attainable
    LinkSpec intra_node;
    LinkSpec inter_node;

    int total_gpus() const { return node_count * gpus_per_node; }

    bool operator==(const ClusterSpec&) const = default;
};

enum class LayerKind { attention, mlp, embedding, other };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct LayerSpec {
    LayerKind kind = LayerKind::other;
    std::int64_t param_count = 0;
    std::optional<double> flops_fwd_per_sample;
    std::optional<std::int64_t> activation_bytes_per_sample;
    std::optional<std::int64_t> hidden_size;
    std::optional<std::int64_t> seq_len;

    bool operator==(const LayerSpec&) const = default;
};

struct ModelSpec {
    std::vector<LayerSpec> layers;

    std::int64_t total_params() const;

    bool operator==(const ModelSpec&) const = default;
};

enum class EventKind { stage_slowdown, bandwidth_drop, restore };

enum class LinkId { intra, inter };

std::string_view to_string(EventKind kind);
std::string_view to_string(LinkId link);

/// Target of a scenario event: a pipeline stage index or a link class.
using EventTarget = std::variant<int, LinkId>;

/// Synthetic drift injected into a simulated run. `restore` resets the
/// target's multiplier to 1.
struct ScenarioEvent {
    std::int64_t at_step = 0;
    EventKind kind = EventKind::stage_slowdown;
    EventTarget target = 0;
    double multiplier = 1.0;

    bool operator==(const ScenarioEvent&) const = default;
};

/// Runtime-adaptation knobs. Defaults are chosen so the narrative
/// scenarios trigger exactly one transition each; all overridable via
/// the job document's optional `selector` block.
struct SelectorConfig {
    double comm_fraction_max = 0.30;
    double min_utilization = 0.60;
    double headroom_max = 0.40;
    double imbalance_max = 0.15;
    std::int64_t hysteresis_steps = 200;
    std::int64_t monitor_interval = 50;
    std::int64_t window = 50;
    double gain_margin = 0.05;
    double min_relative_gain = 0.05;
    bool full_search = false;

    bool operator==(const SelectorConfig&) const = default;
};

struct JobSpec {
    std::int64_t global_batch_size = 0;
    std::int64_t target_steps = 0;
    int precision_bytes = 2;
    std::string optimizer = "adam";
    int zero_stage_allowed = 0;
    double loader_max_throughput = 1e12;  // samples/s; "uncapped" default
    bool adaptation_enabled = true;
    std::uint64_t seed = 0;
    std::vector<ScenarioEvent> scenario_events;
    SelectorConfig selector;

    bool operator==(const JobSpec&) const = default;
};

// Parsing. Unknown keys are a hard error; invariant violations name the
// offending field. All throw SpecError.
ClusterSpec parse_cluster_spec(std::string_view text);
ModelSpec parse_model_spec(std::string_view text);
JobSpec parse_job_spec(std::string_view text);

// Serialization (round-trips through the parsers).
std::string to_json(const ClusterSpec& cluster);
std::string to_json(const ModelSpec& model);
std::string to_json(const JobSpec& job);

/// Cross-spec validation. Returns a list of human-readable violations;
/// empty means the triple is plannable by the strategy search.
std::vector<std::string> validate(const ClusterSpec& cluster,
                                  const ModelSpec& model,
                                  const JobSpec& job);

}  // namespace strata
