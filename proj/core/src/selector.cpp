// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// Bottleneck diagnosis and targeted re-planning. Candidate generation is
// directed (halve dp, rebalance stages, resize micro-batches) rather
// than a full re-search; a full discover() pass sits behind the
// full_search flag.

#include "strata/selector.hpp"

#include <algorithm>
#include <stdexcept>

#include "strata/error.hpp"

namespace strata {

std::vector<std::string> BottleneckReport::flag_names() const {
    std::vector<std::string> names;
    if (comm_bound) names.push_back("comm_bound");
    if (underutilized) names.push_back("underutilized");
    if (memory_headroom) names.push_back("memory_headroom");
    if (stage_imbalanced) names.push_back("stage_imbalanced");
    if (input_bound) names.push_back("input_bound");
    return names;
}

BottleneckReport observe(std::span<const MetricsSnapshot> window,
                         const SelectorConfig& config, double dataset_throughput_cap,
                         std::int64_t device_memory_bytes) {
    if (window.empty()) throw std::invalid_argument("observe: empty window");
    BottleneckReport report;
    for (const auto& snap : window) {
        report.mean_comm_fraction += snap.comm_fraction;
        report.mean_gpu_utilization += snap.gpu_utilization;
        report.mean_headroom_fraction +=
            static_cast<double>(device_memory_bytes - snap.memory_used_bytes) /
            static_cast<double>(device_memory_bytes);
        report.mean_stage_imbalance += snap.stage_imbalance;
        report.mean_throughput += snap.throughput_samples_s;
    }
    const double n = static_cast<double>(window.size());
    report.mean_comm_fraction /= n;
    report.mean_gpu_utilization /= n;
    report.mean_headroom_fraction /= n;
    report.mean_stage_imbalance /= n;
    report.mean_throughput /= n;

    report.comm_bound = report.mean_comm_fraction > config.comm_fraction_max;
    report.underutilized = report.mean_gpu_utilization < config.min_utilization;
    report.memory_headroom = report.mean_headroom_fraction > config.headroom_max;
    report.stage_imbalanced = report.mean_stage_imbalance > config.imbalance_max;
    report.input_bound = report.mean_throughput >= 0.95 * dataset_throughput_cap;
    return report;
}

namespace {

bool is_power_of_two(int x) { return x > 0 && (x & (x - 1)) == 0; }

}  // namespace

Decision decide(const BottleneckReport& report, const SelectorContext& ctx,
                const SelectorState& state) {
    Decision keep;
    const SelectorConfig& sc = state.config;
    if (ctx.current_step - state.last_transition_step < sc.hysteresis_steps)
        return keep;
    if (!report.any()) return keep;

    const SearchInputs search_in{ctx.hw, ctx.model, ctx.dataset,
                                 ctx.job, ctx.comm_plan, nullptr};
    const EstimateInputs est_in{ctx.hw, ctx.model, ctx.dataset, ctx.comm_plan,
                                ctx.job.precision_bytes, 0.0, nullptr};
    const IterationEstimate current = estimate_iteration(ctx.current, est_in);

    const int layers = static_cast<int>(ctx.model.layers.size());
    const DegreeTriple cur{ctx.current.dp, ctx.current.tp, ctx.current.pp};
    const std::int64_t mb = ctx.current.micro_batch_size;
    const std::int64_t per_replica = ctx.job.global_batch_size / cur.dp;

    struct Candidate {
        DegreeTriple triple;
        std::int64_t micro_batch;
    };
    std::vector<Candidate> candidates;
    auto add = [&](DegreeTriple t, std::int64_t m) {
        if (t.dp < 1 || t.tp < 1 || t.pp < 1) return;
        if (!is_power_of_two(t.dp) || !is_power_of_two(t.tp) || !is_power_of_two(t.pp))
            return;
        if (t.dp * t.tp * t.pp != ctx.hw.total_gpus) return;
        if (t.tp > ctx.hw.gpus_per_node || t.pp > layers) return;
        if (ctx.job.global_batch_size % (static_cast<std::int64_t>(t.dp) * m) != 0)
            return;
        for (const auto& c : candidates)
            if (c.triple == t && c.micro_batch == m) return;
        candidates.push_back({t, m});
    };

    if (report.comm_bound && cur.dp >= 2) {
        add({cur.dp / 2, cur.tp * 2, cur.pp}, mb);
        add({cur.dp / 2, cur.tp, cur.pp * 2}, mb);
    }
    if (report.stage_imbalanced) {
        add(cur, mb);  // rebalance: same degrees, boundaries re-derived
        if (cur.pp >= 2) add({cur.dp * 2, cur.tp, cur.pp / 2}, mb);
    }
    if (report.memory_headroom && per_replica % (mb * 2) == 0) add(cur, mb * 2);
    if (report.underutilized && mb >= 2) add(cur, mb / 2);

    struct Evaluated {
        ParallelismConfig config;
        double total_s;
    };
    std::optional<Evaluated> best;
    auto offer = [&](ParallelismConfig config, double total) {
        if (config == ctx.current) return;
        if (!best || total < best->total_s) best = {std::move(config), total};
    };
    for (const auto& cand : candidates) {
        auto built = build_candidate_config(cand.triple, cand.micro_batch, search_in);
        if (built) offer(std::move(built->first), built->second.cost.total_s);
    }
    if (sc.full_search) {
        try {
            SearchResult full = discover(search_in);
            offer(std::move(full.best), full.best_cost.cost.total_s);
        } catch (const PlanError&) {
        }
    }
    if (!best) return keep;

    const double gain = current.cost.total_s - best->total_s;
    if (!(gain > 0.0)) return keep;
    if (gain / current.cost.total_s < sc.min_relative_gain) return keep;

    const TransitionPlan plan =
        plan_transition(ctx.current, best->config, ctx.hw, ctx.model,
                        ctx.job.precision_bytes, ctx.last_iteration_s);
    const std::int64_t remaining = ctx.job.target_steps - ctx.current_step;
    if (gain * static_cast<double>(remaining) <= plan.pause_s * (1.0 + sc.gain_margin))
        return keep;

    Decision d;
    d.action = Decision::Action::transition;
    d.to_config = best->config;
    d.expected_gain_s_per_step = gain;
    d.triggering_flags = report.flag_names();
    return d;
}

Decision selector_step(SelectorState& state, const MetricsSnapshot& snapshot,
                       const SelectorContext& ctx) {
    ++state.steps_seen;
    state.window.push_back(snapshot);
    while (static_cast<std::int64_t>(state.window.size()) > state.config.window)
        state.window.pop_front();

    if (snapshot.step % state.config.monitor_interval != 0) return Decision{};

    std::vector<MetricsSnapshot> window(state.window.begin(), state.window.end());
    const BottleneckReport report = observe(window, state.config,
                                            ctx.dataset.max_input_throughput,
                                            ctx.device_memory_bytes);
    return decide(report, ctx, state);
}

}  // namespace strata
