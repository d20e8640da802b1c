// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// Monitoring-phase controller: bottleneck diagnosis over metric windows
// and re-plan decisions gated by hysteresis and expected-gain
// amortization.

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strata/search.hpp"
#include "strata/sim.hpp"

namespace strata {

struct BottleneckReport {
    bool comm_bound = false;
    bool underutilized = false;
    bool memory_headroom = false;
    bool stage_imbalanced = false;
    bool input_bound = false;

    double mean_comm_fraction = 0.0;
    double mean_gpu_utilization = 0.0;
    double mean_headroom_fraction = 0.0;
    double mean_stage_imbalance = 0.0;
    double mean_throughput = 0.0;

    bool any() const {
        return comm_bound || underutilized || memory_headroom ||
               stage_imbalanced || input_bound;
    }
    std::vector<std::string> flag_names() const;
};

struct SelectorState {
    SelectorConfig config;
    std::int64_t last_transition_step = 0;
    std::int64_t steps_seen = 0;
    std::deque<MetricsSnapshot> window;

    void note_transition(std::int64_t step) { last_transition_step = step; }
};

struct Decision {
    enum class Action { keep, transition };
    Action action = Action::keep;
    ParallelismConfig to_config;
    double expected_gain_s_per_step = 0.0;
    std::vector<std::string> triggering_flags;
};

/// Everything decide needs to evaluate candidates: current config,
/// drift-adjusted profiles and the run bookkeeping.
struct SelectorContext {
    const ParallelismConfig& current;
    const HardwareProfile& hw;         // effective (drifted) view
    const ModelProfile& model;         // effective (drifted) view
    const DatasetProfile& dataset;
    const JobSpec& job;
    const CommPlan& comm_plan;
    std::int64_t current_step = 0;     // 1-based, snapshot step
    double last_iteration_s = 0.0;
    std::int64_t device_memory_bytes = 0;
};

/// Pure window -> flags mapping. Thresholds come from the selector
/// config; headroom derives from memory_used_bytes against the device
/// memory. Throws std::invalid_argument on an empty window.
BottleneckReport observe(std::span<const MetricsSnapshot> window,
                         const SelectorConfig& config,
                         double dataset_throughput_cap,
                         std::int64_t device_memory_bytes);

/// Hysteresis gate, targeted candidate generation per flag, cost-model
/// evaluation, and the amortization / minimum-relative-gain gates.
Decision decide(const BottleneckReport& report, const SelectorContext& ctx,
                const SelectorState& state);

/// Pushes the snapshot into the window; every monitor_interval steps runs
/// observe + decide, otherwise keeps.
Decision selector_step(SelectorState& state, const MetricsSnapshot& snapshot,
                       const SelectorContext& ctx);

}  // namespace strata
