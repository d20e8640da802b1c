// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0

#include "strata/profiles.hpp"

#include "strata/error.hpp"

namespace strata {

HardwareProfile profile_hardware(const ClusterSpec& cluster) {
    HardwareProfile hw;
    hw.total_gpus = cluster.total_gpus();
    hw.gpus_per_node = cluster.gpus_per_node;
    hw.device_memory_bytes = cluster.device_memory_bytes;
    hw.effective_flops = cluster.device_peak_flops * cluster.device_efficiency;
    hw.intra_node = cluster.intra_node;
    hw.inter_node = cluster.inter_node;
    return hw;
}

double layer_flops(const LayerSpec& layer) {
    if (layer.flops_fwd_per_sample) return *layer.flops_fwd_per_sample;
    if ((layer.kind == LayerKind::attention || layer.kind == LayerKind::mlp) &&
        layer.hidden_size && layer.seq_len) {
        const double h = static_cast<double>(*layer.hidden_size);
        const double s = static_cast<double>(*layer.seq_len);
        if (layer.kind == LayerKind::attention) return 8.0 * s * h * h + 4.0 * s * s * h;
        return 16.0 * s * h * h;
    }
    throw SpecError("layer has neither explicit flops nor (hidden_size, seq_len)");
}

ModelProfile profile_model(const ModelSpec& model, int precision_bytes) {
    ModelProfile profile;
    profile.layers.reserve(model.layers.size());
    int idx = 0;
    for (const auto& spec : model.layers) {
        LayerProfile layer;
        layer.index = idx++;
        layer.kind = spec.kind;
        layer.param_count = spec.param_count;
        layer.flops_fwd = layer_flops(spec);
        layer.flops_bwd = 2.0 * layer.flops_fwd;
        if (spec.activation_bytes_per_sample) {
            layer.activation_bytes = *spec.activation_bytes_per_sample;
        } else if (spec.hidden_size && spec.seq_len) {
            layer.activation_bytes = *spec.hidden_size * *spec.seq_len * precision_bytes;
        } else {
            layer.activation_bytes = 0;
        }
        layer.tp_shardable = spec.kind == LayerKind::attention ||
                             spec.kind == LayerKind::mlp ||
                             spec.kind == LayerKind::embedding;
        profile.total_params += layer.param_count;
        profile.total_flops_fwd += layer.flops_fwd;
        profile.layers.push_back(layer);
    }
    return profile;
}

DatasetProfile profile_dataset(const JobSpec& job) {
    DatasetProfile d;
    d.max_input_throughput = job.loader_max_throughput;
    d.global_batch_size = job.global_batch_size;
    return d;
}

}  // namespace strata
