// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0

#include "strata/runner.hpp"

namespace strata {

Trace run(const ParallelismConfig& initial, const RunInputs& in) {
    SimState sim = init_run(initial, in.hw, in.model, in.dataset, in.job,
                            in.comm_plan, in.options);
    SelectorState selector{in.job.selector};
    const bool adaptive =
        in.policy == Policy::adaptive && in.job.adaptation_enabled;

    Trace trace;
    trace.snapshots.reserve(in.job.target_steps);
    for (std::int64_t k = 0; k < in.job.target_steps; ++k) {
        MetricsSnapshot snap = sim.step();
        trace.snapshots.push_back(snap);
        if (!adaptive) continue;

        const ModelProfile eff_model = sim.effective_model_profile();
        const HardwareProfile eff_hw = sim.effective_hardware();
        const SelectorContext ctx{sim.config(),
                                  eff_hw,
                                  eff_model,
                                  in.dataset,
                                  in.job,
                                  in.comm_plan,
                                  snap.step,
                                  sim.last_iteration_s(),
                                  in.hw.device_memory_bytes};
        const Decision decision = selector_step(selector, snap, ctx);
        if (decision.action == Decision::Action::transition) {
            TransitionPlan plan =
                plan_transition(sim.config(), decision.to_config, eff_hw, eff_model,
                                in.job.precision_bytes, sim.last_iteration_s());
            plan.safe_point_step = sim.step_count();
            const std::string from_id = sim.config().id();
            sim.execute_transition(plan);
            selector.note_transition(snap.step);
            trace.transitions.push_back({snap.step, from_id, decision.to_config.id(),
                                         plan.bytes_moved, plan.pause_s});
        }
    }

    // Transition pauses already sit in the next snapshot's iteration time,
    // so the wall clock is exactly the fold over snapshots.
    trace.summary.steps = static_cast<std::int64_t>(trace.snapshots.size());
    for (const auto& snap : trace.snapshots)
        trace.summary.wall_clock_s += snap.iteration_time_s;
    trace.summary.transitions = static_cast<int>(trace.transitions.size());
    if (trace.summary.wall_clock_s > 0.0) {
        trace.summary.mean_throughput =
            static_cast<double>(in.job.global_batch_size) *
            static_cast<double>(trace.summary.steps) / trace.summary.wall_clock_s;
    }
    return trace;
}

}  // namespace strata
