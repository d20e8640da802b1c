// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the hot planner paths.

#include <benchmark/benchmark.h>

#include <optional>

#include "strata/instance_gen.hpp"
#include "strata/runner.hpp"
#include "strata/search.hpp"
#include "strata/sim.hpp"

namespace {

using namespace strata;

struct BenchSetup {
    ClusterSpec cluster;
    ModelSpec model;
    JobSpec job;
    HardwareProfile hw;
    ModelProfile profile;
    DatasetProfile dataset;
    CommPlan plan = comm_optimize({});
    ParallelismConfig config;

    explicit BenchSetup(int layers) {
        cluster.node_count = 2;
        cluster.gpus_per_node = 8;
        cluster.device_memory_bytes = 40'000'000'000;
        cluster.device_peak_flops = 100e12;
        cluster.device_efficiency = 0.5;
        cluster.intra_node = {300e9, 1e-6};
        cluster.inter_node = {25e9, 5e-6};
        for (int l = 0; l < layers; ++l) {
            LayerSpec layer;
            layer.kind = l % 2 == 0 ? LayerKind::attention : LayerKind::mlp;
            layer.param_count = 40'000'000;
            layer.flops_fwd_per_sample = 2e11;
            layer.activation_bytes_per_sample = 2'000'000;
            model.layers.push_back(layer);
        }
        job.global_batch_size = 256;
        job.target_steps = 100;
        job.zero_stage_allowed = 1;
        hw = profile_hardware(cluster);
        profile = profile_model(model, job.precision_bytes);
        dataset = profile_dataset(job);
        config.dp = 2;
        config.tp = 2;
        config.pp = 4;
        config.micro_batch_size = 4;
        config.num_micro_batches = 32;
        for (int k = 0; k <= 4; ++k) config.stage_boundaries.push_back(k * layers / 4);
        config.layer_strategies.assign(layers, LayerMode::data_replicated);
    }
};

void BM_EstimateIteration(benchmark::State& state) {
    const BenchSetup s(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            estimate_iteration(s.config, {s.hw, s.profile, s.dataset, s.plan, 2}));
    }
}
BENCHMARK(BM_EstimateIteration)->Arg(24)->Arg(48);

void BM_Discover(benchmark::State& state) {
    const BenchSetup s(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            discover({s.hw, s.profile, s.dataset, s.job, s.plan, nullptr}));
    }
}
BENCHMARK(BM_Discover)->Arg(24)->Arg(48);

void BM_PartitionStages(benchmark::State& state) {
    Rng rng{1};
    std::vector<double> costs(static_cast<size_t>(state.range(0)));
    for (auto& c : costs) c = rng.next_double();
    for (auto _ : state) {
        benchmark::DoNotOptimize(partition_stages(costs, 8));
    }
}
BENCHMARK(BM_PartitionStages)->Arg(48)->Arg(96);

void BM_PlanTransition(benchmark::State& state) {
    const BenchSetup s(24);
    ParallelismConfig to = s.config;
    to.dp = 4;
    to.tp = 1;
    to.pp = 4;
    to.micro_batch_size = 2;
    to.num_micro_batches = 32;
    for (auto _ : state) {
        benchmark::DoNotOptimize(plan_transition(s.config, to, s.hw, s.profile, 2, 0.1));
    }
}
BENCHMARK(BM_PlanTransition);

void BM_SimulateStep(benchmark::State& state) {
    const BenchSetup s(24);
    std::optional<SimState> sim(
        init_run(s.config, s.hw, s.profile, s.dataset, s.job, s.plan, {}));
    std::int64_t stepped = 0;
    for (auto _ : state) {
        if (stepped == s.job.target_steps) {
            state.PauseTiming();
            sim.emplace(init_run(s.config, s.hw, s.profile, s.dataset, s.job, s.plan, {}));
            stepped = 0;
            state.ResumeTiming();
        }
        benchmark::DoNotOptimize(sim->step());
        ++stepped;
    }
}
BENCHMARK(BM_SimulateStep);

}  // namespace

BENCHMARK_MAIN();
