// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// Strategy discovery: decision-tree pruning of the degree space, exact
// joint stage-partition + per-layer-mode optimization, and a brute-force
// oracle for verification.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strata/cost_model.hpp"

namespace strata {

struct DegreeTriple {
    int dp = 1;
    int tp = 1;
    int pp = 1;

    bool operator==(const DegreeTriple&) const = default;
    std::string to_string() const;
};

struct PruneRecord {
    DegreeTriple triple;
    std::string rule;  // "R1".."R5"
};

struct CandidateSet {
    std::vector<DegreeTriple> degree_triples;
    std::vector<std::int64_t> micro_batch_options;  // for dp = 1; per-triple
                                                    // menus filter by dp | gb
    std::vector<PruneRecord> pruning_log;
};

struct CandidateEvaluation {
    DegreeTriple triple;
    std::int64_t micro_batch = 1;
    double total_s = 0.0;
    bool feasible = false;
};

struct SearchResult {
    ParallelismConfig best;
    IterationEstimate best_cost;
    std::int64_t evaluated_count = 0;
    CandidateSet candidates;
    std::vector<CandidateEvaluation> evaluations;
};

/// Power-of-two micro-batch sizes <= 64 dividing `per_replica_batch`.
std::vector<std::int64_t> micro_batch_menu(std::int64_t per_replica_batch);

/// Enumerates power-of-two degree triples with dp*tp*pp == total_gpus and
/// applies the pruning rules:
///   R1: tp confined to a node (tp <= gpus_per_node);
///   R2: pure data parallel whose model states cannot fit even at the
///       maximum allowed ZeRO stage;
///   R3: pp == 1 when total params > 1e9 and more than one GPU;
///   R4: pp > layer count;
///   R5: no feasible micro-batch (dp does not divide the global batch).
/// Throws PlanError when nothing survives.
CandidateSet enumerate_degree_candidates(const HardwareProfile& hw,
                                         const ModelProfile& model,
                                         const JobSpec& job);

/// Contiguous partition of `layer_costs` into pp stages minimizing the
/// maximum stage load (exact). Ties resolve to the lexicographically
/// earliest boundary vector. Returns pp+1 boundaries.
std::vector<int> partition_stages(std::span<const double> layer_costs, int pp);

/// Pure per-layer mode DP over explicit cost menus; the seam the
/// strategy assignment and its tests share. conv_cost[i] is charged when
/// layers i-1 and i disagree and both sit in the same stage; the DP runs
/// independently per stage. Ties prefer data_replicated.
struct StrategyDpResult {
    std::vector<LayerMode> modes;
    double total_cost = 0.0;
};
StrategyDpResult strategy_dp(std::span<const double> cost_replicated,
                             std::span<const double> cost_tensor,
                             const std::vector<bool>& shardable,
                             std::span<const double> conv_cost,
                             std::span<const int> stage_boundaries, int tp);

/// Per-layer modes for a concrete candidate, via strategy_dp on costs
/// derived from the profiles.
std::vector<LayerMode> assign_layer_strategies(const DegreeTriple& triple,
                                               std::span<const int> stage_boundaries,
                                               std::int64_t micro_batch,
                                               const HardwareProfile& hw,
                                               const ModelProfile& model,
                                               const DriftState* drift = nullptr);

struct SearchInputs {
    const HardwareProfile& hw;
    const ModelProfile& model;
    const DatasetProfile& dataset;
    const JobSpec& job;
    const CommPlan& comm_plan;
    const DriftState* drift = nullptr;
};

/// Builds the cost-optimal feasible config for one (triple, micro-batch)
/// candidate: jointly optimal cut + per-layer modes (exact minimax over
/// stage costs), smallest memory-feasible ZeRO stage. nullopt when the
/// candidate is memory-infeasible.
std::optional<std::pair<ParallelismConfig, IterationEstimate>> build_candidate_config(
    const DegreeTriple& triple, std::int64_t micro_batch, const SearchInputs& in);

/// Discovery-phase search over the pruned candidate set. Ties break to
/// the lexicographically smallest (pp, tp, dp, micro_batch). Throws
/// PlanError when every candidate is infeasible.
SearchResult discover(const SearchInputs& in);

/// Brute force over every degree triple (pruned only by R1/R4), stage
/// cut, per-layer mode assignment and micro-batch option; same evaluation
/// path and tie-breaking as discover. Guarded to total_gpus <= 16 and
/// layer count <= 10 (PlanError beyond).
SearchResult exhaustive_plan(const SearchInputs& in);

inline constexpr int kOracleMaxGpus = 16;
inline constexpr int kOracleMaxLayers = 10;

}  // namespace strata
