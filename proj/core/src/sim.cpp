// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// Step-level simulator. Iteration times come straight from the analytic
// estimator under the current drift state, plus seeded multiplicative
// noise, so with noise 0 and no events the simulator reproduces the cost
// model exactly.

#include "strata/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "strata/error.hpp"

namespace strata {

using json = nlohmann::ordered_json;

CommPlan comm_optimize(const CommOptimizerFlags& flags) {
    CommPlan plan;
    plan.fusion_enabled = flags.enable_fusion;
    plan.bucket_bytes = flags.bucket_bytes;
    plan.overlap_enabled = flags.enable_overlap;
    plan.overlap_factor = flags.enable_overlap ? flags.overlap_factor : 0.0;
    return plan;
}

namespace {

int device_of(const ParallelismConfig& config, int stage, int replica, int tp_rank) {
    return stage * (config.dp * config.tp) + replica * config.tp + tp_rank;
}

}  // namespace

ShardLayout build_shard_layout(const ParallelismConfig& config,
                               const ModelProfile& model) {
    ShardLayout layout;
    layout.device_count = config.devices_used();
    layout.device_shards.resize(layout.device_count);
    layout.zero_stage = config.zero_stage;
    layout.replica_groups.resize(config.dp);
    for (int r = 0; r < config.dp; ++r) {
        for (int k = 0; k < config.pp; ++k)
            for (int t = 0; t < config.tp; ++t)
                layout.replica_groups[r].push_back(device_of(config, k, r, t));
    }
    for (int l = 0; l < static_cast<int>(model.layers.size()); ++l) {
        const std::int64_t params = model.layers[l].param_count;
        if (params == 0) continue;
        const int stage = config.stage_of_layer(l);
        const bool split =
            config.layer_strategies[l] == LayerMode::tensor_parallel && config.tp > 1;
        for (int r = 0; r < config.dp; ++r) {
            if (split) {
                for (int t = 0; t < config.tp; ++t) {
                    const std::int64_t begin = t * params / config.tp;
                    const std::int64_t end = (t + 1) * params / config.tp;
                    if (begin == end) continue;
                    layout.device_shards[device_of(config, stage, r, t)].push_back(
                        {l, begin, end});
                }
            } else {
                // Replicated layers have a canonical owner: tp rank 0.
                layout.device_shards[device_of(config, stage, r, 0)].push_back(
                    {l, 0, params});
            }
        }
    }
    return layout;
}

void audit_shard_layout(const ShardLayout& layout, const ModelProfile& model) {
    for (const auto& group : layout.replica_groups) {
        for (int l = 0; l < static_cast<int>(model.layers.size()); ++l) {
            std::vector<ShardRange> ranges;
            for (int d : group) {
                for (const auto& shard : layout.device_shards[d])
                    if (shard.layer == l) ranges.push_back(shard);
            }
            std::sort(ranges.begin(), ranges.end(),
                      [](const ShardRange& a, const ShardRange& b) {
                          return a.begin < b.begin;
                      });
            std::int64_t cursor = 0;
            for (const auto& r : ranges) {
                if (r.begin != cursor)
                    throw std::logic_error("shard layout: gap or overlap in layer " +
                                           std::to_string(l));
                cursor = r.end;
            }
            if (cursor != model.layers[l].param_count)
                throw std::logic_error("shard layout: layer " + std::to_string(l) +
                                       " not fully covered");
        }
    }
}

namespace {

/// Sorted disjoint before-ownership per (device, layer).
std::vector<std::vector<std::vector<ShardRange>>> ownership_by_layer(
    const ShardLayout& layout, int device_count, int layer_count) {
    std::vector<std::vector<std::vector<ShardRange>>> owned(
        device_count, std::vector<std::vector<ShardRange>>(layer_count));
    for (int d = 0; d < layout.device_count && d < device_count; ++d) {
        for (const auto& shard : layout.device_shards[d])
            owned[d][shard.layer].push_back(shard);
    }
    for (auto& per_device : owned)
        for (auto& ranges : per_device)
            std::sort(ranges.begin(), ranges.end(),
                      [](const ShardRange& a, const ShardRange& b) {
                          return a.begin < b.begin;
                      });
    return owned;
}

/// after minus before, as intervals.
std::vector<std::pair<std::int64_t, std::int64_t>> subtract_ranges(
    const std::vector<ShardRange>& after, const std::vector<ShardRange>& before) {
    std::vector<std::pair<std::int64_t, std::int64_t>> gained;
    for (const auto& a : after) {
        std::int64_t cursor = a.begin;
        for (const auto& b : before) {
            if (b.end <= cursor || b.begin >= a.end) continue;
            if (b.begin > cursor) gained.emplace_back(cursor, b.begin);
            cursor = std::max(cursor, b.end);
        }
        if (cursor < a.end) gained.emplace_back(cursor, a.end);
    }
    return gained;
}

}  // namespace

TransitionPlan plan_transition(const ParallelismConfig& from,
                               const ParallelismConfig& to,
                               const HardwareProfile& hw, const ModelProfile& model,
                               int precision_bytes, double current_iteration_s) {
    TransitionPlan plan;
    plan.from = from;
    plan.to = to;
    if (from == to) return plan;

    const int layer_count = static_cast<int>(model.layers.size());
    const int devices = std::max(from.devices_used(), to.devices_used());
    const ShardLayout before = build_shard_layout(from, model);
    const ShardLayout after = build_shard_layout(to, model);
    const auto owned_before = ownership_by_layer(before, devices, layer_count);
    const auto owned_after = ownership_by_layer(after, devices, layer_count);

    std::int64_t moved_elements = 0;
    double min_bandwidth = -1.0;
    for (int d = 0; d < devices; ++d) {
        for (int l = 0; l < layer_count; ++l) {
            const auto gained = subtract_ranges(owned_after[d][l], owned_before[d][l]);
            for (const auto& [begin, end] : gained) {
                moved_elements += end - begin;
                // Source selection per sub-interval: any prior owner,
                // preferring one on the receiver's node.
                std::int64_t cursor = begin;
                while (cursor < end) {
                    int source = -1;
                    std::int64_t piece_end = end;
                    for (int s = 0; s < devices; ++s) {
                        for (const auto& r : owned_before[s][l]) {
                            if (r.begin <= cursor && cursor < r.end) {
                                if (source < 0 ||
                                    (hw.same_node(d, s) && !hw.same_node(d, source))) {
                                    source = s;
                                    piece_end = std::min(end, r.end);
                                }
                            }
                        }
                    }
                    if (source < 0)
                        throw std::logic_error("transition: element has no prior owner");
                    const double bw = hw.link(d, source).bandwidth_bps;
                    if (min_bandwidth < 0 || bw < min_bandwidth) min_bandwidth = bw;
                    cursor = piece_end;
                }
            }
        }
    }
    plan.bytes_moved = moved_elements * precision_bytes;
    plan.pause_s = 2.0 * current_iteration_s;
    if (plan.bytes_moved > 0 && min_bandwidth > 0)
        plan.pause_s += static_cast<double>(plan.bytes_moved) / min_bandwidth;
    return plan;
}

SimState::SimState(const ParallelismConfig& config, const HardwareProfile& hw,
                   const ModelProfile& model, const DatasetProfile& dataset,
                   const JobSpec& job, const CommPlan& comm_plan, SimOptions options)
    : config_(config),
      hw_(hw),
      model_(model),
      dataset_(dataset),
      job_(job),
      comm_plan_(comm_plan),
      options_(options),
      layout_(build_shard_layout(config, model)),
      rng_state_(job.seed) {
    audit_shard_layout(layout_, model_);
    drift_.layer_compute_mult.assign(model.layers.size(), 1.0);
    pending_events_ = job.scenario_events;
    std::stable_sort(pending_events_.begin(), pending_events_.end(),
                     [](const ScenarioEvent& a, const ScenarioEvent& b) {
                         return a.at_step < b.at_step;
                     });
}

SimState init_run(const ParallelismConfig& config, const HardwareProfile& hw,
                  const ModelProfile& model, const DatasetProfile& dataset,
                  const JobSpec& job, const CommPlan& comm_plan, SimOptions options) {
    validate_config(config, model, hw, job.global_batch_size,
                    /*require_all_devices=*/false);
    const MemoryFootprint fp = memory_footprint(config, model, job, hw);
    if (fp.headroom_fraction < 0.0)
        throw PlanError("infeasible config: memory headroom " +
                        std::to_string(fp.headroom_fraction));
    return SimState(config, hw, model, dataset, job, comm_plan, options);
}

ModelProfile SimState::effective_model_profile() const {
    ModelProfile eff = model_;
    eff.total_flops_fwd = 0.0;
    for (auto& layer : eff.layers) {
        layer.flops_fwd *= drift_.layer_mult(layer.index);
        layer.flops_bwd = 2.0 * layer.flops_fwd;
        eff.total_flops_fwd += layer.flops_fwd;
    }
    return eff;
}

HardwareProfile SimState::effective_hardware() const {
    HardwareProfile eff = hw_;
    eff.intra_node.bandwidth_bps *= drift_.intra_bw_mult;
    eff.inter_node.bandwidth_bps *= drift_.inter_bw_mult;
    return eff;
}

double SimState::next_noise() {
    if (options_.noise == 0.0) return 0.0;
    // SplitMix64 -> uniform double; stable across platforms.
    rng_state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = rng_state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * options_.noise;
}

void SimState::fire_due_events(std::int64_t upcoming_step) {
    while (!pending_events_.empty() && pending_events_.front().at_step <= upcoming_step) {
        const ScenarioEvent e = pending_events_.front();
        pending_events_.erase(pending_events_.begin());
        auto stage_layers = [&](int stage, auto&& fn) {
            if (stage < 0 || stage >= config_.pp) return;  // stale target: ignore
            for (int l = config_.stage_boundaries[stage];
                 l < config_.stage_boundaries[stage + 1]; ++l)
                fn(l);
        };
        switch (e.kind) {
            case EventKind::stage_slowdown:
                stage_layers(std::get<int>(e.target),
                             [&](int l) { drift_.layer_compute_mult[l] *= e.multiplier; });
                break;
            case EventKind::bandwidth_drop:
                if (std::get<LinkId>(e.target) == LinkId::intra)
                    drift_.intra_bw_mult *= e.multiplier;
                else
                    drift_.inter_bw_mult *= e.multiplier;
                break;
            case EventKind::restore:
                if (std::holds_alternative<int>(e.target)) {
                    stage_layers(std::get<int>(e.target),
                                 [&](int l) { drift_.layer_compute_mult[l] = 1.0; });
                } else if (std::get<LinkId>(e.target) == LinkId::intra) {
                    drift_.intra_bw_mult = 1.0;
                } else {
                    drift_.inter_bw_mult = 1.0;
                }
                break;
        }
    }
}

MetricsSnapshot SimState::step() {
    if (step_ >= job_.target_steps)
        throw std::logic_error("step() past target_steps");
    const std::int64_t k = step_ + 1;
    fire_due_events(k);

    const double transition_s = pending_transition_s_;
    pending_transition_s_ = 0.0;
    const EstimateInputs in{hw_,          model_, dataset_,    comm_plan_,
                            job_.precision_bytes, transition_s, &drift_};
    const IterationEstimate est = estimate_iteration(config_, in);

    const double noise = next_noise();
    const double dynamic_s = est.cost.total_s - est.cost.transition_s;
    const double gb = static_cast<double>(job_.global_batch_size);
    // Input-pipeline stall: the loader bounds achievable throughput.
    const double loader_floor = gb / dataset_.max_input_throughput;
    const double iteration =
        std::max(dynamic_s * (1.0 + noise), loader_floor) + transition_s;

    const double loss = 10.0 * std::pow(1.0 + static_cast<double>(k) / 1000.0, -0.5);
    loss_window_.emplace_back(k, loss);
    while (static_cast<std::int64_t>(loss_window_.size()) > 50) loss_window_.pop_front();

    MetricsSnapshot snap;
    snap.step = k;
    snap.iteration_time_s = iteration;
    snap.throughput_samples_s = gb / iteration;
    snap.gpu_utilization = est.cost.total_s > 0 ? est.cost.compute_s / est.cost.total_s : 0.0;
    snap.memory_used_bytes = memory_footprint(config_, model_, job_, hw_).total_bytes;
    snap.comm_fraction = est.cost.comm_fraction;
    double mean_stage = 0.0, max_stage = 0.0;
    for (double t : est.stage_time_s) {
        mean_stage += t;
        max_stage = std::max(max_stage, t);
    }
    mean_stage /= static_cast<double>(est.stage_time_s.size());
    snap.stage_imbalance = mean_stage > 0.0 ? max_stage / mean_stage - 1.0 : 0.0;
    if (loss_window_.size() >= 2) {
        const auto& first = loss_window_.front();
        const auto& last = loss_window_.back();
        snap.convergence_rate =
            (first.second - last.second) / static_cast<double>(last.first - first.first);
    }
    snap.config_id = config_.id();

    last_iteration_s_ = iteration;
    step_ = k;
    return snap;
}

void SimState::execute_transition(const TransitionPlan& plan) {
    if (plan.safe_point_step != step_)
        throw std::logic_error("transition applied outside its safe point");
    if (!(plan.from == config_))
        throw std::logic_error("transition planned from a different config");
    if (plan.from == plan.to) return;

    validate_config(plan.to, model_, hw_, job_.global_batch_size,
                    /*require_all_devices=*/false);
    ShardLayout next = build_shard_layout(plan.to, model_);
    audit_shard_layout(next, model_);  // conservation: coverage and disjointness
    config_ = plan.to;
    layout_ = std::move(next);
    pending_transition_s_ += plan.pause_s;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json snapshot_to_json(const MetricsSnapshot& s) {
    return json{{"step", s.step},
                {"iteration_time_s", s.iteration_time_s},
                {"throughput_samples_s", s.throughput_samples_s},
                {"gpu_utilization", s.gpu_utilization},
                {"memory_used_bytes", s.memory_used_bytes},
                {"comm_fraction", s.comm_fraction},
                {"stage_imbalance", s.stage_imbalance},
                {"convergence_rate", s.convergence_rate},
                {"config_id", s.config_id}};
}

}  // namespace

std::string trace_to_jsonl(const Trace& trace) {
    std::ostringstream os;
    size_t next_transition = 0;
    for (const auto& snap : trace.snapshots) {
        os << snapshot_to_json(snap).dump() << "\n";
        while (next_transition < trace.transitions.size() &&
               trace.transitions[next_transition].step == snap.step) {
            const auto& t = trace.transitions[next_transition];
            os << json{{"event", "transition"},
                       {"from", t.from_id},
                       {"to", t.to_id},
                       {"bytes_moved", t.bytes_moved},
                       {"pause_s", t.pause_s}}
                      .dump()
               << "\n";
            ++next_transition;
        }
    }
    return os.str();
}

std::string trace_to_csv(const Trace& trace) {
    std::ostringstream os;
    os << "step,iteration_time_s,throughput_samples_s,gpu_utilization,"
          "memory_used_bytes,comm_fraction,stage_imbalance,convergence_rate,"
          "config_id\n";
    for (const auto& s : trace.snapshots) {
        os << s.step << ',' << format_double(s.iteration_time_s) << ','
           << format_double(s.throughput_samples_s) << ','
           << format_double(s.gpu_utilization) << ',' << s.memory_used_bytes << ','
           << format_double(s.comm_fraction) << ',' << format_double(s.stage_imbalance)
           << ',' << format_double(s.convergence_rate) << ',' << s.config_id << "\n";
    }
    return os.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SpecError("cannot open " + path + " for writing");
    out << contents;
    if (!out) throw SpecError("failed writing " + path);
}

}  // namespace strata
