// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0

#include "strata/instance_gen.hpp"

#include <algorithm>
#include <cmath>

namespace strata {

std::uint64_t Rng::next() {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double Rng::next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::next_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
}

std::int64_t Rng::next_pow2(std::int64_t lo, std::int64_t hi) {
    std::vector<std::int64_t> options;
    for (std::int64_t v = lo; v <= hi; v *= 2) options.push_back(v);
    return options[static_cast<size_t>(next_int(0, options.size() - 1))];
}

OracleInstance random_oracle_instance(Rng& rng) {
    OracleInstance inst;

    const std::int64_t total = rng.next_pow2(1, 8);
    std::int64_t gpn = rng.next_pow2(1, total);
    inst.cluster.gpus_per_node = static_cast<int>(gpn);
    inst.cluster.node_count = static_cast<int>(total / gpn);
    inst.cluster.device_peak_flops = 50e12 + rng.next_double() * 150e12;
    inst.cluster.device_efficiency = 0.3 + rng.next_double() * 0.7;
    // Intra at least as fast as inter, matching real machines.
    inst.cluster.intra_node = {100e9 + rng.next_double() * 300e9,
                               5e-7 + rng.next_double() * 1.5e-6};
    inst.cluster.inter_node = {10e9 + rng.next_double() * 40e9,
                               2e-6 + rng.next_double() * 8e-6};

    const int layer_count = static_cast<int>(rng.next_int(1, 6));
    std::int64_t total_params = 0;
    for (int l = 0; l < layer_count; ++l) {
        LayerSpec layer;
        const int kind_roll = static_cast<int>(rng.next_int(0, 3));
        layer.kind = kind_roll == 0   ? LayerKind::attention
                     : kind_roll == 1 ? LayerKind::mlp
                     : kind_roll == 2 ? LayerKind::embedding
                                      : LayerKind::other;
        // Total parameters stay below the 1e9 pipeline rule so rule R3
        // never fires; the oracle prunes only by hard feasibility.
        layer.param_count = rng.next_int(1'000'000, 120'000'000);
        layer.flops_fwd_per_sample = 1e9 + rng.next_double() * 2e12;
        layer.activation_bytes_per_sample = rng.next_int(10'000, 10'000'000);
        total_params += layer.param_count;
        inst.model.layers.push_back(layer);
    }

    inst.job.global_batch_size = rng.next_pow2(1, 8);
    inst.job.target_steps = 10;
    inst.job.precision_bytes = 2;
    inst.job.zero_stage_allowed = static_cast<int>(rng.next_int(0, 3));
    inst.job.loader_max_throughput =
        rng.next_int(0, 9) == 0 ? 1.0 + rng.next_double() * 100.0 : 1e12;
    inst.job.seed = rng.next();

    // Memory tiers: loose, tight (near the minimum feasible footprint) or
    // outright infeasible; both planners must agree on all three.
    const double min_bytes_per_param = 16.0 / total;  // ZeRO-3 across every GPU
    const double floor_bytes = min_bytes_per_param * static_cast<double>(total_params);
    const int tier = static_cast<int>(rng.next_int(0, 9));
    double memory;
    if (tier < 6) {
        memory = 16.0 * static_cast<double>(total_params) * (2.0 + rng.next_double() * 6.0);
    } else if (tier < 9) {
        memory = floor_bytes * (0.8 + rng.next_double() * 4.0);
    } else {
        memory = floor_bytes * (0.2 + rng.next_double() * 0.6);
    }
    inst.cluster.device_memory_bytes = std::max<std::int64_t>(
        static_cast<std::int64_t>(memory), 1'000'000);

    return inst;
}

}  // namespace strata
