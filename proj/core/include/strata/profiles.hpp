// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hardware / model / dataset profiling: the derived views the planner
// works with.

#pragma once

#include <cstdint>
#include <vector>

#include "strata/specs.hpp"

namespace strata {

struct HardwareProfile {
    int total_gpus = 0;
    int gpus_per_node = 0;
    std::int64_t device_memory_bytes = 0;
    double effective_flops = 0.0;  // peak x efficiency
    LinkSpec intra_node;
    LinkSpec inter_node;

    bool same_node(int a, int b) const {
        return a / gpus_per_node == b / gpus_per_node;
    }
    /// Intra-node link iff both devices share a node, else inter-node.
    const LinkSpec& link(int a, int b) const {
        return same_node(a, b) ? intra_node : inter_node;
    }
};

struct LayerProfile {
    int index = 0;
    LayerKind kind = LayerKind::other;
    std::int64_t param_count = 0;
    double flops_fwd = 0.0;  // per sample, forward
    double flops_bwd = 0.0;  // = 2 x flops_fwd
    std::int64_t activation_bytes = 0;  // per sample
    bool tp_shardable = false;
};

struct ModelProfile {
    std::vector<LayerProfile> layers;
    std::int64_t total_params = 0;
    double total_flops_fwd = 0.0;
};

struct DatasetProfile {
    double max_input_throughput = 0.0;  // samples/s
    std::int64_t global_batch_size = 0;
};

HardwareProfile profile_hardware(const ClusterSpec& cluster);

/// Forward FLOPs per sample for one layer. An explicit value wins;
/// otherwise attention -> 8*s*h^2 + 4*s^2*h and mlp -> 16*s*h^2
/// (4h expansion, two matmuls). Throws SpecError when neither path is
/// available.
double layer_flops(const LayerSpec& layer);

/// Builds per-layer profiles. Backward FLOPs are 2x forward; activation
/// bytes default to seq*hidden*precision_bytes when not explicit (0 when
/// the shape is unknown too); attention/mlp/embedding layers are
/// tensor-shardable.
ModelProfile profile_model(const ModelSpec& model, int precision_bytes);

DatasetProfile profile_dataset(const JobSpec& job);

}  // namespace strata
