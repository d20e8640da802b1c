// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic per-iteration cost and memory model for a hybrid
// (data, tensor, pipeline) parallel configuration.
//
// Modeling conventions, fixed here and relied on by the search oracle:
//  - alpha-beta ring all-reduce: 2(n-1)/n * S/B + 2(n-1)*alpha per message.
//  - GPipe-style synchronous pipeline; span = (m + pp - 1) * max stage time.
//  - 4 activation all-reduces per tensor-parallel layer per micro-batch
//    (2 forward + 2 backward); embeddings shard for free (no collectives).
//  - Stage-to-stage transfers are sized by the largest layer activation,
//    so the p2p term does not depend on where the cuts fall.
//  - Gradient sync volume uses the balanced-shard idealization: the
//    per-device share is the shardability-sharded total divided by pp,
//    independent of the chosen per-layer modes and cuts. Memory
//    accounting (memory_footprint) stays stage- and mode-accurate.
//  - Device grid order is (pp, dp, tp) with tp fastest-varying; link
//    classes for collectives follow from that placement.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strata/profiles.hpp"
#include "strata/specs.hpp"

namespace strata {

enum class LayerMode { data_replicated, tensor_parallel };

std::string_view to_string(LayerMode mode);
LayerMode layer_mode_from_string(std::string_view name);

struct ParallelismConfig {
    int dp = 1;
    int tp = 1;
    int pp = 1;
    std::int64_t micro_batch_size = 1;
    std::int64_t num_micro_batches = 1;  // = global_batch / (dp * micro_batch)
    std::vector<int> stage_boundaries;   // pp+1 indices, 0 .. layer count
    std::vector<LayerMode> layer_strategies;  // one per layer
    int zero_stage = 0;

    int devices_used() const { return dp * tp * pp; }
    int stage_of_layer(int layer) const;
    /// Compact deterministic identifier, e.g. "dp2-tp2-pp4-mb8-z1-b6.12.18".
    std::string id() const;

    bool operator==(const ParallelismConfig&) const = default;
};

/// Throws SpecError if the config violates its structural invariants.
/// Search results additionally require devices_used == total_gpus; the
/// simulator accepts devices_used <= total_gpus (idle devices).
void validate_config(const ParallelismConfig& config, const ModelProfile& model,
                     const HardwareProfile& hw, std::int64_t global_batch,
                     bool require_all_devices);

struct CostBreakdown {
    double compute_s = 0.0;
    double tp_comm_s = 0.0;   // activation collectives + mode-conversion resharding
    double dp_sync_s = 0.0;   // exposed (post-overlap) gradient sync
    double p2p_s = 0.0;       // pipeline stage-to-stage transfers
    double bubble_s = 0.0;    // pipeline fill/drain idle
    double transition_s = 0.0;
    double total_s = 0.0;     // exact sum of the six components
    double throughput = 0.0;  // samples/s, capped by the dataset profile
    double comm_fraction = 0.0;
};

struct MemoryFootprint {
    std::int64_t model_state_bytes = 0;  // weights + grads + optimizer states
    std::int64_t activation_bytes = 0;
    std::int64_t total_bytes = 0;
    double headroom_fraction = 0.0;  // (device_memory - total) / device_memory
};

/// Gradient-sync message shaping (the communication optimizer's output).
struct CommPlan {
    bool fusion_enabled = false;
    std::int64_t bucket_bytes = 25'000'000;
    bool overlap_enabled = false;
    double overlap_factor = 0.0;

    /// Messages per gradient sync: tensor count unfused, bucket count fused.
    std::int64_t message_count(std::int64_t gradient_tensor_count,
                               std::int64_t total_bytes) const;
};

/// Per-link / per-layer drift multipliers (scenario events). Compute
/// multipliers scale a layer's time; bandwidth multipliers scale a link
/// class's bandwidth.
struct DriftState {
    std::vector<double> layer_compute_mult;  // empty = all 1.0
    double intra_bw_mult = 1.0;
    double inter_bw_mult = 1.0;

    double layer_mult(int layer) const {
        return layer_compute_mult.empty() ? 1.0 : layer_compute_mult[layer];
    }
    bool is_identity() const;
};

// --- Primitive cost operations -------------------------------------------

double ring_allreduce_time(std::int64_t bytes, int participants, const LinkSpec& link);

double p2p_time(std::int64_t bytes, const LinkSpec& link);

/// Forward+backward compute seconds for one layer over one micro-batch.
/// `drift_mult` scales the layer's time (scenario slowdowns).
double layer_compute_time(const LayerProfile& layer, LayerMode mode, int tp,
                          std::int64_t micro_batch, const HardwareProfile& hw,
                          double drift_mult = 1.0);

/// Activation collectives for one tensor-parallel layer over one
/// micro-batch: 4 ring all-reduces across the tp group. Zero for
/// data_replicated layers, tp == 1, and embeddings.
double tp_activation_comm_time(const LayerProfile& layer, LayerMode mode, int tp,
                               std::int64_t micro_batch, const LinkSpec& link);

/// Exposed gradient all-reduce time across the dp group. `raw` uses the
/// fusion-adjusted message count for the latency term; overlap subtracts
/// overlap_factor x backward_compute_s, clamped at zero.
double dp_gradient_sync_time(std::int64_t grad_bytes, int dp, const LinkSpec& link,
                             const CommPlan& plan, std::int64_t gradient_tensor_count,
                             double backward_compute_s);

/// GPipe fill/drain fraction: (pp - 1) / (m + pp - 1).
double pipeline_bubble_fraction(int pp, std::int64_t num_micro_batches);

/// Worst-stage per-device memory. Model-state bytes/param (mixed
/// precision, Adam): zero 0 -> 16, 1 -> 4 + 12/dp, 2 -> 2 + 14/dp,
/// 3 -> 16/dp. Activations hold pp in-flight micro-batches.
MemoryFootprint memory_footprint(const ParallelismConfig& config,
                                 const ModelProfile& model, const JobSpec& job,
                                 const HardwareProfile& hw);

/// CostBreakdown plus the per-stage detail the simulator reports on.
struct IterationEstimate {
    CostBreakdown cost;
    std::vector<double> stage_time_s;  // per micro-batch, drift applied
    int bottleneck_stage = 0;          // ties -> lowest index
};

struct EstimateInputs {
    const HardwareProfile& hw;
    const ModelProfile& model;
    const DatasetProfile& dataset;
    const CommPlan& comm_plan;
    int precision_bytes = 2;
    double transition_s = 0.0;
    const DriftState* drift = nullptr;  // optional
};

IterationEstimate estimate_iteration(const ParallelismConfig& config,
                                     const EstimateInputs& in);

/// Resharding cost charged between adjacent same-stage layers whose modes
/// disagree: half an all-reduce of the boundary activation.
double mode_conversion_time(const LayerProfile& boundary_layer, int tp,
                            std::int64_t micro_batch, const LinkSpec& link);

/// Drift-adjusted link pair; the search and the estimator share it so
/// their per-layer numbers agree bit-exactly.
struct EffectiveLinks {
    LinkSpec intra;
    LinkSpec inter;

    const LinkSpec& pick(const HardwareProfile& hw, int a, int b) const {
        return hw.same_node(a, b) ? intra : inter;
    }
};
EffectiveLinks effective_links(const HardwareProfile& hw, const DriftState* drift);

// Link-class selection for a config under the (pp, dp, tp) device grid.
const LinkSpec& tp_group_link(const ParallelismConfig& config, const HardwareProfile& hw);
const LinkSpec& dp_group_link(const ParallelismConfig& config, const HardwareProfile& hw);
const LinkSpec& pp_stage_link(const ParallelismConfig& config, const HardwareProfile& hw);

}  // namespace strata
