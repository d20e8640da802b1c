// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0

#include "strata/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "strata/error.hpp"

namespace strata {

std::string_view to_string(LayerMode mode) {
    return mode == LayerMode::tensor_parallel ? "tensor_parallel" : "data_replicated";
}

LayerMode layer_mode_from_string(std::string_view name) {
    if (name == "tensor_parallel") return LayerMode::tensor_parallel;
    if (name == "data_replicated") return LayerMode::data_replicated;
    throw SpecError("unknown layer strategy \"" + std::string(name) + "\"");
}

int ParallelismConfig::stage_of_layer(int layer) const {
    for (int k = 0; k + 1 < static_cast<int>(stage_boundaries.size()); ++k) {
        if (layer >= stage_boundaries[k] && layer < stage_boundaries[k + 1]) return k;
    }
    return -1;
}

std::string ParallelismConfig::id() const {
    std::ostringstream os;
    os << "dp" << dp << "-tp" << tp << "-pp" << pp << "-mb" << micro_batch_size
       << "-z" << zero_stage;
    if (pp > 1) {
        os << "-b";
        for (size_t i = 1; i + 1 < stage_boundaries.size(); ++i) {
            if (i > 1) os << ".";
            os << stage_boundaries[i];
        }
    }
    bool any_tp = std::any_of(layer_strategies.begin(), layer_strategies.end(),
                              [](LayerMode m) { return m == LayerMode::tensor_parallel; });
    if (any_tp) {
        // FNV-1a over the strategy vector; distinguishes mode assignments.
        std::uint32_t h = 2166136261u;
        for (LayerMode m : layer_strategies) {
            h ^= static_cast<std::uint32_t>(m) + 1;
            h *= 16777619u;
        }
        os << "-s" << std::hex << h << std::dec;
    }
    return os.str();
}

bool DriftState::is_identity() const {
    if (intra_bw_mult != 1.0 || inter_bw_mult != 1.0) return false;
    for (double m : layer_compute_mult)
        if (m != 1.0) return false;
    return true;
}

namespace {

bool is_power_of_two(std::int64_t x) { return x > 0 && (x & (x - 1)) == 0; }

[[noreturn]] void config_fail(const std::string& message) {
    throw SpecError("parallelism config: " + message);
}

}  // namespace

void validate_config(const ParallelismConfig& config, const ModelProfile& model,
                     const HardwareProfile& hw, std::int64_t global_batch,
                     bool require_all_devices) {
    const int n = static_cast<int>(model.layers.size());
    if (config.dp < 1 || config.tp < 1 || config.pp < 1)
        config_fail("degrees must be >= 1");
    if (config.devices_used() > hw.total_gpus)
        config_fail("dp*tp*pp exceeds the device count");
    if (require_all_devices) {
        if (config.devices_used() != hw.total_gpus)
            config_fail("dp*tp*pp must equal the device count");
        if (!is_power_of_two(config.dp) || !is_power_of_two(config.tp) ||
            !is_power_of_two(config.pp))
            config_fail("degrees must be powers of two");
    }
    if (config.micro_batch_size < 1) config_fail("micro_batch_size must be >= 1");
    const std::int64_t denom = static_cast<std::int64_t>(config.dp) * config.micro_batch_size;
    if (global_batch % denom != 0)
        config_fail("dp * micro_batch_size must divide the global batch");
    if (config.num_micro_batches != global_batch / denom)
        config_fail("num_micro_batches inconsistent with the global batch");
    if (config.pp > n) config_fail("pp exceeds the layer count");
    if (static_cast<int>(config.stage_boundaries.size()) != config.pp + 1)
        config_fail("stage_boundaries must have pp + 1 entries");
    if (config.stage_boundaries.front() != 0 || config.stage_boundaries.back() != n)
        config_fail("stage_boundaries must span [0, layer count]");
    for (size_t i = 1; i < config.stage_boundaries.size(); ++i) {
        if (config.stage_boundaries[i] <= config.stage_boundaries[i - 1])
            config_fail("stage_boundaries must be strictly increasing");
    }
    if (static_cast<int>(config.layer_strategies.size()) != n)
        config_fail("layer_strategies must have one entry per layer");
    for (int l = 0; l < n; ++l) {
        if (config.layer_strategies[l] == LayerMode::tensor_parallel) {
            if (config.tp == 1)
                config_fail("tp = 1 requires every layer to be data_replicated");
            if (!model.layers[l].tp_shardable)
                config_fail("tensor_parallel on a non-shardable layer " +
                            std::to_string(l));
        }
    }
    if (config.zero_stage < 0 || config.zero_stage > 3)
        config_fail("zero_stage must be in {0,1,2,3}");
}

double ring_allreduce_time(std::int64_t bytes, int participants, const LinkSpec& link) {
    if (participants <= 1 || bytes < 0) return 0.0;
    const double n = static_cast<double>(participants);
    return 2.0 * (n - 1.0) / n * (static_cast<double>(bytes) / link.bandwidth_bps) +
           2.0 * (n - 1.0) * link.latency_s;
}

double p2p_time(std::int64_t bytes, const LinkSpec& link) {
    return static_cast<double>(bytes) / link.bandwidth_bps + link.latency_s;
}

double layer_compute_time(const LayerProfile& layer, LayerMode mode, int tp,
                          std::int64_t micro_batch, const HardwareProfile& hw,
                          double drift_mult) {
    const double divisor = (mode == LayerMode::tensor_parallel) ? tp : 1;
    return (layer.flops_fwd + layer.flops_bwd) * drift_mult *
           static_cast<double>(micro_batch) / (hw.effective_flops * divisor);
}

double tp_activation_comm_time(const LayerProfile& layer, LayerMode mode, int tp,
                               std::int64_t micro_batch, const LinkSpec& link) {
    if (mode != LayerMode::tensor_parallel || tp <= 1) return 0.0;
    if (layer.kind == LayerKind::embedding) return 0.0;  // vocab split, no collectives
    return 4.0 * ring_allreduce_time(layer.activation_bytes * micro_batch, tp, link);
}

double mode_conversion_time(const LayerProfile& boundary_layer, int tp,
                            std::int64_t micro_batch, const LinkSpec& link) {
    return ring_allreduce_time(boundary_layer.activation_bytes * micro_batch, tp,
                               link) / 2.0;
}

EffectiveLinks effective_links(const HardwareProfile& hw, const DriftState* drift) {
    EffectiveLinks links{hw.intra_node, hw.inter_node};
    if (drift) {
        links.intra.bandwidth_bps *= drift->intra_bw_mult;
        links.inter.bandwidth_bps *= drift->inter_bw_mult;
    }
    return links;
}

std::int64_t CommPlan::message_count(std::int64_t gradient_tensor_count,
                                     std::int64_t total_bytes) const {
    const std::int64_t tensors = std::max<std::int64_t>(gradient_tensor_count, 1);
    if (!fusion_enabled) return tensors;
    const std::int64_t buckets = (total_bytes + bucket_bytes - 1) / bucket_bytes;
    return std::clamp<std::int64_t>(buckets, 1, tensors);
}

double dp_gradient_sync_time(std::int64_t grad_bytes, int dp, const LinkSpec& link,
                             const CommPlan& plan, std::int64_t gradient_tensor_count,
                             double backward_compute_s) {
    if (dp <= 1) return 0.0;
    const double n = static_cast<double>(dp);
    const std::int64_t messages = plan.message_count(gradient_tensor_count, grad_bytes);
    const double raw =
        2.0 * (n - 1.0) / n * (static_cast<double>(grad_bytes) / link.bandwidth_bps) +
        static_cast<double>(messages) * 2.0 * (n - 1.0) * link.latency_s;
    if (!plan.overlap_enabled) return raw;
    return std::max(0.0, raw - plan.overlap_factor * backward_compute_s);
}

double pipeline_bubble_fraction(int pp, std::int64_t num_micro_batches) {
    if (pp <= 1) return 0.0;
    return static_cast<double>(pp - 1) /
           static_cast<double>(num_micro_batches + pp - 1);
}

namespace {

/// Model-state bytes per parameter under mixed precision and Adam:
/// weights + gradients at `precision` bytes each, 12 bytes of fp32
/// optimizer state, partitioned per ZeRO stage.
double model_state_bytes_per_param(int zero_stage, int dp, int precision) {
    const double p = precision;
    const double d = dp;
    switch (zero_stage) {
        case 0: return 2.0 * p + 12.0;
        case 1: return 2.0 * p + 12.0 / d;
        case 2: return p + (p + 12.0) / d;
        case 3: return (2.0 * p + 12.0) / d;
        default: throw SpecError("zero_stage out of range");
    }
}

}  // namespace

MemoryFootprint memory_footprint(const ParallelismConfig& config,
                                 const ModelProfile& model, const JobSpec& job,
                                 const HardwareProfile& hw) {
    const double bpp =
        model_state_bytes_per_param(config.zero_stage, config.dp, job.precision_bytes);
    MemoryFootprint worst;
    std::int64_t worst_total = -1;
    for (int k = 0; k < config.pp; ++k) {
        double params_dev = 0.0;
        std::int64_t act_per_sample = 0;
        for (int l = config.stage_boundaries[k]; l < config.stage_boundaries[k + 1]; ++l) {
            const auto& layer = model.layers[l];
            if (config.layer_strategies[l] == LayerMode::tensor_parallel)
                params_dev += static_cast<double>(layer.param_count) / config.tp;
            else
                params_dev += static_cast<double>(layer.param_count);
            act_per_sample += layer.activation_bytes;
        }
        MemoryFootprint fp;
        fp.model_state_bytes = std::llround(bpp * params_dev);
        // GPipe worst case: pp micro-batches in flight per stage.
        fp.activation_bytes = config.micro_batch_size * act_per_sample * config.pp;
        fp.total_bytes = fp.model_state_bytes + fp.activation_bytes;
        if (fp.total_bytes > worst_total) {
            worst_total = fp.total_bytes;
            worst = fp;
        }
    }
    worst.headroom_fraction =
        static_cast<double>(hw.device_memory_bytes - worst.total_bytes) /
        static_cast<double>(hw.device_memory_bytes);
    return worst;
}

const LinkSpec& tp_group_link(const ParallelismConfig& config, const HardwareProfile& hw) {
    if (config.tp <= 1) return hw.intra_node;
    return hw.link(0, config.tp - 1);
}

const LinkSpec& dp_group_link(const ParallelismConfig& config, const HardwareProfile& hw) {
    if (config.dp <= 1) return hw.intra_node;
    return hw.link(0, (config.dp - 1) * config.tp);
}

const LinkSpec& pp_stage_link(const ParallelismConfig& config, const HardwareProfile& hw) {
    if (config.pp <= 1) return hw.intra_node;
    return hw.link(0, config.dp * config.tp);
}

namespace {

void check_estimate_preconditions(const ParallelismConfig& config,
                                  const ModelProfile& model) {
    const int n = static_cast<int>(model.layers.size());
    if (config.dp < 1 || config.tp < 1 || config.pp < 1)
        config_fail("degrees must be >= 1");
    if (config.micro_batch_size < 1 || config.num_micro_batches < 1)
        config_fail("micro-batch shape must be >= 1");
    if (static_cast<int>(config.stage_boundaries.size()) != config.pp + 1 ||
        config.stage_boundaries.front() != 0 || config.stage_boundaries.back() != n)
        config_fail("stage_boundaries must span [0, layer count]");
    for (size_t i = 1; i < config.stage_boundaries.size(); ++i)
        if (config.stage_boundaries[i] <= config.stage_boundaries[i - 1])
            config_fail("stage_boundaries must be strictly increasing");
    if (static_cast<int>(config.layer_strategies.size()) != n)
        config_fail("layer_strategies must have one entry per layer");
    for (int l = 0; l < n; ++l) {
        if (config.layer_strategies[l] == LayerMode::tensor_parallel &&
            (config.tp == 1 || !model.layers[l].tp_shardable))
            config_fail("invalid tensor_parallel assignment on layer " +
                        std::to_string(l));
    }
}

}  // namespace

IterationEstimate estimate_iteration(const ParallelismConfig& config,
                                     const EstimateInputs& in) {
    const auto& model = in.model;
    const auto& hw = in.hw;
    check_estimate_preconditions(config, model);
    const int n = static_cast<int>(model.layers.size());
    const std::int64_t mb = config.micro_batch_size;
    const std::int64_t m = config.num_micro_batches;

    const EffectiveLinks links = effective_links(hw, in.drift);
    const LinkSpec& tp_link =
        config.tp > 1 ? links.pick(hw, 0, config.tp - 1) : links.intra;
    const LinkSpec& dp_link =
        config.dp > 1 ? links.pick(hw, 0, (config.dp - 1) * config.tp) : links.intra;
    const LinkSpec& pp_link =
        config.pp > 1 ? links.pick(hw, 0, config.dp * config.tp) : links.intra;

    // Per-stage times over one micro-batch. Accumulation order (conv then
    // layer cost, left to right) matches the search's stage-cost DP so the
    // oracle comparison stays bit-exact.
    IterationEstimate est;
    est.stage_time_s.resize(config.pp, 0.0);
    std::vector<double> stage_compute(config.pp, 0.0);
    std::vector<double> stage_comm(config.pp, 0.0);
    for (int k = 0; k < config.pp; ++k) {
        double t = 0.0, comp = 0.0, comm = 0.0;
        for (int l = config.stage_boundaries[k]; l < config.stage_boundaries[k + 1]; ++l) {
            const auto& layer = model.layers[l];
            const LayerMode mode = config.layer_strategies[l];
            if (l > config.stage_boundaries[k] &&
                mode != config.layer_strategies[l - 1]) {
                const double conv =
                    mode_conversion_time(model.layers[l - 1], config.tp, mb, tp_link);
                t += conv;
                comm += conv;
            }
            const double mult = in.drift ? in.drift->layer_mult(l) : 1.0;
            const double c = layer_compute_time(layer, mode, config.tp, mb, hw, mult);
            const double x = tp_activation_comm_time(layer, mode, config.tp, mb, tp_link);
            t += c + x;
            comp += c;
            comm += x;
        }
        est.stage_time_s[k] = t;
        stage_compute[k] = comp;
        stage_comm[k] = comm;
    }

    int bottleneck = 0;
    for (int k = 1; k < config.pp; ++k) {
        if (est.stage_time_s[k] > est.stage_time_s[bottleneck]) bottleneck = k;
    }
    est.bottleneck_stage = bottleneck;
    const double stage_max = est.stage_time_s[bottleneck];

    CostBreakdown& cost = est.cost;
    cost.compute_s = static_cast<double>(m) * stage_compute[bottleneck];
    cost.tp_comm_s = static_cast<double>(m) * stage_comm[bottleneck];
    cost.bubble_s = static_cast<double>(config.pp - 1) * stage_max;

    if (config.pp > 1) {
        std::int64_t act_max = 0;
        for (const auto& layer : model.layers)
            act_max = std::max(act_max, layer.activation_bytes);
        cost.p2p_s = 2.0 * static_cast<double>(config.pp - 1) *
                     p2p_time(act_max * mb, pp_link);
    }

    if (config.dp > 1) {
        // Balanced-shard idealization: per-device gradient volume is the
        // shardability-sharded total split evenly across stages.
        double sharded_params = 0.0;
        for (const auto& layer : model.layers) {
            sharded_params += layer.tp_shardable
                                  ? static_cast<double>(layer.param_count) / config.tp
                                  : static_cast<double>(layer.param_count);
        }
        const std::int64_t grad_bytes =
            std::llround(in.precision_bytes * sharded_params / config.pp);
        const std::int64_t tensors = (n + config.pp - 1) / config.pp;
        const double work = static_cast<double>(m) * stage_max;
        const double backward = (2.0 / 3.0) * work;
        cost.dp_sync_s = dp_gradient_sync_time(grad_bytes, config.dp, dp_link,
                                               in.comm_plan, tensors, backward);
    }

    cost.transition_s = in.transition_s;
    cost.total_s = ((((cost.compute_s + cost.tp_comm_s) + cost.dp_sync_s) +
                     cost.p2p_s) + cost.bubble_s) + cost.transition_s;
    const double gb = static_cast<double>(in.dataset.global_batch_size);
    cost.throughput = std::min(gb / cost.total_s, in.dataset.max_input_throughput);
    cost.comm_fraction =
        cost.total_s > 0.0
            ? (cost.tp_comm_s + cost.dp_sync_s + cost.p2p_s) / cost.total_s
            : 0.0;
    return est;
}

}  // namespace strata
