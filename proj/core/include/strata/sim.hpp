// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic step-level training-run simulator: shard layouts,
// strategy transitions with conservation auditing, metric snapshots and
// trace emission.

#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "strata/cost_model.hpp"

namespace strata {

/// Builds a CommPlan from the optimizer flags. Fusion buckets the
/// gradient messages; overlap hides sync behind backward compute with
/// factor 0.8.
struct CommOptimizerFlags {
    bool enable_fusion = true;
    bool enable_overlap = true;
    std::int64_t bucket_bytes = 25'000'000;
    double overlap_factor = 0.8;
};
CommPlan comm_optimize(const CommOptimizerFlags& flags);

/// Contiguous element range of one layer owned by a device.
struct ShardRange {
    int layer = 0;
    std::int64_t begin = 0;
    std::int64_t end = 0;  // exclusive

    std::int64_t size() const { return end - begin; }
};

/// Canonical parameter ownership for a config. Within each replica
/// group the shards partition every layer's elements exactly once:
/// tensor-parallel layers split across the tp ranks, replicated layers
/// owned by tp rank 0 of their stage.
struct ShardLayout {
    int device_count = 0;
    std::vector<std::vector<ShardRange>> device_shards;  // per device
    std::vector<std::vector<int>> replica_groups;        // dp groups
    int zero_stage = 0;  // annotation: optimizer-state ownership is
                         // additionally partitioned across the dp group
};

ShardLayout build_shard_layout(const ParallelismConfig& config,
                               const ModelProfile& model);

/// Verifies coverage and disjointness per replica group; throws
/// std::logic_error on violation (must be impossible).
void audit_shard_layout(const ShardLayout& layout, const ModelProfile& model);

struct TransitionPlan {
    ParallelismConfig from;
    ParallelismConfig to;
    std::int64_t bytes_moved = 0;
    double pause_s = 0.0;
    std::int64_t safe_point_step = 0;
};

/// Computes the destination layout and the parameter bytes whose owner
/// changes. pause = bytes / narrowest-involved-link bandwidth + two
/// iterations of checkpoint surcharge; identical configs cost nothing.
TransitionPlan plan_transition(const ParallelismConfig& from,
                               const ParallelismConfig& to,
                               const HardwareProfile& hw, const ModelProfile& model,
                               int precision_bytes, double current_iteration_s);

/// One monitored step: throughput, utilization, memory, communication
/// share, load imbalance and convergence rate.
struct MetricsSnapshot {
    std::int64_t step = 0;  // 1-based
    double iteration_time_s = 0.0;
    double throughput_samples_s = 0.0;
    double gpu_utilization = 0.0;  // compute_s / total_s
    std::int64_t memory_used_bytes = 0;
    double comm_fraction = 0.0;
    double stage_imbalance = 0.0;  // max stage time / mean - 1
    double convergence_rate = 0.0;  // loss improvement per step, trailing window
    std::string config_id;
};

struct TransitionRecord {
    std::int64_t step = 0;  // snapshot step after which it applies
    std::string from_id;
    std::string to_id;
    std::int64_t bytes_moved = 0;
    double pause_s = 0.0;
};

struct TraceSummary {
    std::int64_t steps = 0;
    double wall_clock_s = 0.0;     // fold of snapshot iteration times
    double mean_throughput = 0.0;  // total samples / wall clock
    int transitions = 0;
};

struct Trace {
    std::vector<MetricsSnapshot> snapshots;
    std::vector<TransitionRecord> transitions;
    TraceSummary summary;
};

struct SimOptions {
    double noise = 0.02;  // multiplicative, uniform in [-noise, +noise]
};

/// One run's simulator state. Single-threaded by contract: exactly one
/// step or transition at a time; independent runs may execute
/// concurrently on their own states.
class SimState {
public:
    SimState(const ParallelismConfig& config, const HardwareProfile& hw,
             const ModelProfile& model, const DatasetProfile& dataset,
             const JobSpec& job, const CommPlan& comm_plan, SimOptions options);

    std::int64_t step_count() const { return step_; }
    const ParallelismConfig& config() const { return config_; }
    const ShardLayout& layout() const { return layout_; }
    const JobSpec& job() const { return job_; }
    const DriftState& drift() const { return drift_; }
    double last_iteration_s() const { return last_iteration_s_; }

    /// Model/hardware views with current drift folded in, for re-planning.
    ModelProfile effective_model_profile() const;
    HardwareProfile effective_hardware() const;

    /// Simulates the next iteration: fires due scenario events, recomputes
    /// the analytic estimate under drift, applies seeded noise, advances
    /// the loss curve. Throws std::logic_error past target_steps.
    MetricsSnapshot step();

    /// Applies a transition at its safe point; audits conservation.
    void execute_transition(const TransitionPlan& plan);

private:
    ParallelismConfig config_;
    const HardwareProfile& hw_;
    const ModelProfile& model_;
    DatasetProfile dataset_;
    JobSpec job_;
    CommPlan comm_plan_;
    SimOptions options_;
    ShardLayout layout_;
    DriftState drift_;
    std::vector<ScenarioEvent> pending_events_;
    std::int64_t step_ = 0;
    double pending_transition_s_ = 0.0;
    double last_iteration_s_ = 0.0;
    std::uint64_t rng_state_ = 0;
    std::deque<std::pair<std::int64_t, double>> loss_window_;  // (step, loss)

    double next_noise();
    void fire_due_events(std::int64_t upcoming_step);
};

/// Feasibility-checked construction (headroom >= 0). Throws PlanError on
/// an infeasible config.
SimState init_run(const ParallelismConfig& config, const HardwareProfile& hw,
                  const ModelProfile& model, const DatasetProfile& dataset,
                  const JobSpec& job, const CommPlan& comm_plan,
                  SimOptions options = {});

// Trace emission. JSONL carries one record per step plus interleaved
// transition records; CSV projects the snapshot columns for plotting.
std::string trace_to_jsonl(const Trace& trace);
std::string trace_to_csv(const Trace& trace);
void write_file(const std::string& path, const std::string& contents);

}  // namespace strata
