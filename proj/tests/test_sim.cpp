// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "strata/error.hpp"
#include "strata/instance_gen.hpp"
#include "strata/runner.hpp"
#include "strata/search.hpp"
#include "strata/sim.hpp"
#include "test_helpers.hpp"

using namespace strata;
using doctest::Approx;

namespace {

ParallelismConfig uniform_config(int dp, int tp, int pp, std::int64_t mb,
                                 std::int64_t gb, int layers,
                                 LayerMode mode = LayerMode::data_replicated) {
    ParallelismConfig config;
    config.dp = dp;
    config.tp = tp;
    config.pp = pp;
    config.micro_batch_size = mb;
    config.num_micro_batches = gb / (dp * mb);
    for (int k = 0; k <= pp; ++k)
        config.stage_boundaries.push_back(k * layers / pp);
    config.layer_strategies.assign(layers, mode);
    config.zero_stage = 0;
    return config;
}

struct SimFixture {
    HardwareProfile hw;
    ModelProfile model;
    DatasetProfile dataset;
    JobSpec job;
    CommPlan comm_plan = comm_optimize({});

    SimState state(const ParallelismConfig& config, double noise = 0.0) const {
        return init_run(config, hw, model, dataset, job, comm_plan, {noise});
    }
    EstimateInputs estimate_inputs() const {
        return {hw, model, dataset, comm_plan, job.precision_bytes};
    }
};

SimFixture make_fixture(const ClusterSpec& cluster, const ModelSpec& model,
                        const JobSpec& job) {
    SimFixture f;
    f.hw = profile_hardware(cluster);
    f.model = profile_model(model, job.precision_bytes);
    f.dataset = profile_dataset(job);
    f.job = job;
    return f;
}

}  // namespace

TEST_CASE("comm_optimize folds the flags into a plan") {
    const CommPlan on = comm_optimize({});
    CHECK(on.fusion_enabled);
    CHECK(on.overlap_enabled);
    CHECK(on.overlap_factor == 0.8);
    const CommPlan off = comm_optimize({false, false});
    CHECK_FALSE(off.fusion_enabled);
    CHECK_FALSE(off.overlap_enabled);
    CHECK(off.overlap_factor == 0.0);
    // 100 tensors x 1e6 B at dp=4, alpha 5e-6: unfused latency term 3.0e-3,
    // fused into 25 MB buckets -> 4 messages -> 1.2e-4.
    const LinkSpec link{1e12, 5e-6};
    const double unfused =
        dp_gradient_sync_time(100'000'000, 4, link, off, 100, 0.0);
    CHECK(unfused - 2.0 * 0.75 * 1e8 / 1e12 == Approx(3.0e-3).epsilon(1e-9));
    CommPlan fused = comm_optimize({true, false});
    const double fused_t =
        dp_gradient_sync_time(100'000'000, 4, link, fused, 100, 0.0);
    CHECK(fused_t - 2.0 * 0.75 * 1e8 / 1e12 == Approx(1.2e-4).epsilon(1e-9));
}

TEST_CASE("shard layout: (2,2,4) over 24 layers") {
    const ModelProfile model = profile_model(test::uniform_model(24), 2);
    auto config = uniform_config(2, 2, 4, 2, 32, 24, LayerMode::tensor_parallel);
    const ShardLayout layout = build_shard_layout(config, model);
    CHECK(layout.device_count == 16);
    REQUIRE(layout.replica_groups.size() == 2);
    CHECK(layout.replica_groups[0].size() == 8);  // pp x tp devices per replica
    CHECK_NOTHROW(audit_shard_layout(layout, model));
    // Tensor-split layers leave each device with half a layer's elements.
    const auto& dev0 = layout.device_shards[0];
    REQUIRE(!dev0.empty());
    CHECK(dev0[0].size() == model.layers[0].param_count / 2);
}

TEST_CASE("shard layout: single device owns everything") {
    const ModelProfile model = profile_model(test::uniform_model(3), 2);
    auto config = uniform_config(1, 1, 1, 1, 8, 3);
    const ShardLayout layout = build_shard_layout(config, model);
    std::int64_t owned = 0;
    for (const auto& shard : layout.device_shards[0]) owned += shard.size();
    CHECK(owned == model.total_params);
    CHECK_NOTHROW(audit_shard_layout(layout, model));
}

TEST_CASE("shard layout: coverage audit over random configs") {
    Rng rng{77};
    for (int i = 0; i < 100; ++i) {
        const OracleInstance inst = random_oracle_instance(rng);
        const ModelProfile model = profile_model(inst.model, 2);
        const HardwareProfile hw = profile_hardware(inst.cluster);
        const int n = static_cast<int>(model.layers.size());
        // Random valid degree split of the device count.
        std::vector<DegreeTriple> triples;
        for (int dp = 1; dp <= hw.total_gpus; dp *= 2)
            for (int tp = 1; dp * tp <= hw.total_gpus; tp *= 2) {
                const int pp = hw.total_gpus / (dp * tp);
                if (dp * tp * pp == hw.total_gpus && pp <= n)
                    triples.push_back({dp, tp, pp});
            }
        if (triples.empty()) continue;
        const auto t = triples[rng.next_int(0, triples.size() - 1)];
        auto config = uniform_config(t.dp, t.tp, t.pp, 1, t.dp, n);
        for (int l = 0; l < n; ++l) {
            if (t.tp > 1 && model.layers[l].tp_shardable && rng.next_int(0, 1))
                config.layer_strategies[l] = LayerMode::tensor_parallel;
        }
        const ShardLayout layout = build_shard_layout(config, model);
        CHECK_NOTHROW(audit_shard_layout(layout, model));
    }
}

TEST_CASE("sim: noise 0 and no events reproduces the cost model exactly") {
    const SimFixture f = make_fixture(test::cluster_2x8(), test::uniform_model(24),
                                      test::basic_job(32, 20));
    auto config = uniform_config(2, 2, 4, 2, 32, 24);
    const double expected =
        estimate_iteration(config, f.estimate_inputs()).cost.total_s;
    SimState sim = f.state(config, 0.0);
    for (int i = 0; i < 20; ++i) {
        const MetricsSnapshot snap = sim.step();
        CHECK(snap.iteration_time_s == expected);
        CHECK(snap.step == i + 1);
    }
    CHECK_THROWS_AS(sim.step(), std::logic_error);
}

TEST_CASE("sim: stage slowdown raises span and imbalance from its step on") {
    JobSpec job = test::basic_job(32, 10);
    job.scenario_events.push_back({5, EventKind::stage_slowdown, 2, 1.3});
    const SimFixture f =
        make_fixture(test::cluster_2x8(), test::uniform_model(24), job);
    auto config = uniform_config(2, 2, 4, 2, 32, 24);
    SimState sim = f.state(config, 0.0);

    std::vector<MetricsSnapshot> snaps;
    for (int i = 0; i < 10; ++i) snaps.push_back(sim.step());
    CHECK(snaps[3].stage_imbalance == 0.0);
    // Uniform stages, one stage 1.3x: max/mean = 1.3/1.075 on compute-only
    // stages; communication terms shift it slightly.
    CHECK(snaps[5].stage_imbalance == Approx(1.3 / 1.075 - 1.0).epsilon(0.05));
    CHECK(snaps[5].iteration_time_s > snaps[3].iteration_time_s);
    for (int i = 5; i < 10; ++i)
        CHECK(snaps[i].iteration_time_s == snaps[5].iteration_time_s);
}

TEST_CASE("sim: bandwidth drop and restore") {
    JobSpec job = test::basic_job(32, 10);
    job.scenario_events.push_back({3, EventKind::bandwidth_drop, LinkId::inter, 0.5});
    job.scenario_events.push_back({7, EventKind::restore, LinkId::inter, 1.0});
    const SimFixture f =
        make_fixture(test::cluster_2x8(), test::uniform_model(24), job);
    auto config = uniform_config(16, 1, 1, 2, 32, 24);  // dp sync crosses nodes
    SimState sim = f.state(config, 0.0);
    std::vector<double> times;
    for (int i = 0; i < 10; ++i) times.push_back(sim.step().iteration_time_s);
    CHECK(times[2] > times[1]);   // slower after the drop (step 3)
    CHECK(times[7] == times[0]);  // restored at step 7 (index 6 is step 7)
    CHECK(times[6] == times[0]);
}

TEST_CASE("sim: identical seeds give identical snapshots") {
    const SimFixture f = make_fixture(test::cluster_2x8(), test::uniform_model(24),
                                      test::basic_job(32, 50));
    auto config = uniform_config(2, 2, 4, 2, 32, 24);
    SimState a = f.state(config, 0.02);
    SimState b = f.state(config, 0.02);
    for (int i = 0; i < 50; ++i) {
        const MetricsSnapshot sa = a.step();
        const MetricsSnapshot sb = b.step();
        CHECK(sa.iteration_time_s == sb.iteration_time_s);
        CHECK(sa.throughput_samples_s == sb.throughput_samples_s);
        CHECK(sa.convergence_rate == sb.convergence_rate);
        CHECK(sa.config_id == sb.config_id);
    }
}

TEST_CASE("sim: loader cap floors the iteration time") {
    JobSpec job = test::basic_job(32, 5);
    job.loader_max_throughput = 10.0;  // 3.2 s per iteration at best
    const SimFixture f =
        make_fixture(test::cluster_2x8(), test::uniform_model(24), job);
    auto config = uniform_config(2, 2, 4, 2, 32, 24);
    SimState sim = f.state(config, 0.0);
    const MetricsSnapshot snap = sim.step();
    CHECK(snap.iteration_time_s == Approx(32.0 / 10.0));
    CHECK(snap.throughput_samples_s == Approx(10.0));
}

TEST_CASE("plan_transition: identity is free") {
    const SimFixture f = make_fixture(test::cluster_2x8(), test::uniform_model(24),
                                      test::basic_job(32, 10));
    auto config = uniform_config(2, 2, 4, 2, 32, 24);
    const TransitionPlan plan =
        plan_transition(config, config, f.hw, f.model, 2, 0.5);
    CHECK(plan.bytes_moved == 0);
    CHECK(plan.pause_s == 0.0);
}

TEST_CASE("plan_transition: tp 2 -> dp 2 on a 1e9-param fp16 model") {
    // Each device gathers the half it lacks: 2 x 1e9 B moved over the
    // 300e9 B/s intra link, plus two iterations of checkpoint surcharge.
    ClusterSpec cluster = test::cluster_2x8();
    cluster.node_count = 1;
    cluster.gpus_per_node = 2;
    ModelSpec spec;
    spec.layers.push_back(
        test::explicit_layer(LayerKind::attention, 1'000'000'000, 1e12, 1'000'000));
    const SimFixture f = make_fixture(cluster, spec, test::basic_job(8, 10));

    auto from = uniform_config(1, 2, 1, 8, 8, 1, LayerMode::tensor_parallel);
    auto to = uniform_config(2, 1, 1, 4, 8, 1);
    const TransitionPlan plan = plan_transition(from, to, f.hw, f.model, 2, 0.1);
    CHECK(plan.bytes_moved == 2'000'000'000);
    CHECK(plan.pause_s == Approx(2e9 / 300e9 + 0.2).epsilon(1e-12));
}

TEST_CASE("plan_transition: pp 4 -> 3 moves the relabeled stages") {
    // 24 equal layers, boundaries [0,6,12,18,24] -> [0,8,16,24] on 4 GPUs
    // (one goes idle). Gained layers: dev0 +2, dev1 +4, dev2 +6.
    ClusterSpec cluster = test::cluster_2x8();
    cluster.node_count = 1;
    cluster.gpus_per_node = 4;
    const ModelSpec spec = test::uniform_model(24, 1'000'000);
    const SimFixture f = make_fixture(cluster, spec, test::basic_job(32, 10));

    auto from = uniform_config(1, 1, 4, 1, 32, 24);
    ParallelismConfig to = from;
    to.pp = 3;
    to.stage_boundaries = {0, 8, 16, 24};
    const TransitionPlan plan = plan_transition(from, to, f.hw, f.model, 2, 0.1);
    CHECK(plan.bytes_moved == 12LL * 1'000'000 * 2);
    CHECK(plan.pause_s > 0.2);
}

TEST_CASE("execute_transition conserves every element") {
    const SimFixture f = make_fixture(test::cluster_2x8(), test::uniform_model(24),
                                      test::basic_job(32, 10));
    auto from = uniform_config(4, 1, 4, 1, 32, 24);
    auto to = uniform_config(2, 2, 4, 2, 32, 24, LayerMode::tensor_parallel);
    SimState sim = f.state(from, 0.0);
    sim.step();
    TransitionPlan plan = plan_transition(from, to, f.hw, f.model, 2,
                                          sim.last_iteration_s());
    plan.safe_point_step = sim.step_count();
    CHECK_NOTHROW(sim.execute_transition(plan));
    CHECK(sim.config() == to);
    std::int64_t per_group = 0;
    for (int d : sim.layout().replica_groups[0])
        for (const auto& shard : sim.layout().device_shards[d]) per_group += shard.size();
    CHECK(per_group == f.model.total_params);
    // Next snapshot carries the pause once.
    const MetricsSnapshot after = sim.step();
    const double steady = sim.step().iteration_time_s;
    CHECK(after.iteration_time_s == Approx(steady + plan.pause_s));
}

TEST_CASE("execute_transition outside its safe point is rejected") {
    const SimFixture f = make_fixture(test::cluster_2x8(), test::uniform_model(24),
                                      test::basic_job(32, 10));
    auto from = uniform_config(4, 1, 4, 1, 32, 24);
    SimState sim = f.state(from, 0.0);
    TransitionPlan plan = plan_transition(from, from, f.hw, f.model, 2, 0.1);
    plan.safe_point_step = 5;
    CHECK_THROWS_AS(sim.execute_transition(plan), std::logic_error);
}

TEST_CASE("fuzz: random transitions keep layouts conservative") {
    Rng rng{123};
    int executed = 0;
    for (int i = 0; i < 40; ++i) {
        const OracleInstance inst = random_oracle_instance(rng);
        const ModelProfile model = profile_model(inst.model, 2);
        const HardwareProfile hw = profile_hardware(inst.cluster);
        const int n = static_cast<int>(model.layers.size());
        std::vector<ParallelismConfig> configs;
        for (int dp = 1; dp <= hw.total_gpus; dp *= 2)
            for (int tp = 1; dp * tp <= hw.total_gpus; tp *= 2) {
                const int pp = hw.total_gpus / (dp * tp);
                if (dp * tp * pp != hw.total_gpus || pp > n) continue;
                auto c = uniform_config(dp, tp, pp, 1, dp, n);
                for (int l = 0; l < n; ++l)
                    if (tp > 1 && model.layers[l].tp_shardable && rng.next_int(0, 1))
                        c.layer_strategies[l] = LayerMode::tensor_parallel;
                configs.push_back(std::move(c));
            }
        if (configs.size() < 2) continue;
        for (int t = 0; t < 5; ++t) {
            const auto& from = configs[rng.next_int(0, configs.size() - 1)];
            const auto& to = configs[rng.next_int(0, configs.size() - 1)];
            const TransitionPlan plan = plan_transition(from, to, hw, model, 2, 0.1);
            CHECK(plan.bytes_moved >= 0);
            const ShardLayout after = build_shard_layout(to, model);
            CHECK_NOTHROW(audit_shard_layout(after, model));
            ++executed;
        }
    }
    CHECK(executed >= 100);
}

TEST_CASE("run: static policy, no events, zero transitions") {
    const SimFixture f = make_fixture(test::cluster_2x8(), test::uniform_model(24),
                                      test::basic_job(32, 30));
    auto config = uniform_config(2, 2, 4, 2, 32, 24);
    const Trace trace = run(config, {f.hw, f.model, f.dataset, f.job, f.comm_plan,
                                     Policy::static_plan, {0.0}});
    CHECK(trace.snapshots.size() == 30);
    CHECK(trace.transitions.empty());
    CHECK(trace.summary.transitions == 0);
    double wall = 0.0;
    for (const auto& snap : trace.snapshots) wall += snap.iteration_time_s;
    CHECK(trace.summary.wall_clock_s == wall);
    CHECK(trace.summary.wall_clock_s ==
          Approx(30.0 * trace.snapshots[0].iteration_time_s));
}

TEST_CASE("run: adaptation_enabled=false forces static behavior") {
    JobSpec job = test::basic_job(32, 60);
    job.adaptation_enabled = false;
    job.selector.hysteresis_steps = 0;
    job.scenario_events.push_back({10, EventKind::stage_slowdown, 0, 3.0});
    const SimFixture f =
        make_fixture(test::cluster_2x8(), test::uniform_model(24), job);
    auto config = uniform_config(2, 2, 4, 2, 32, 24);
    const Trace trace = run(config, {f.hw, f.model, f.dataset, f.job, f.comm_plan,
                                     Policy::adaptive, {0.0}});
    CHECK(trace.transitions.empty());
}

TEST_CASE("trace serialization: jsonl records and csv projection") {
    const SimFixture f = make_fixture(test::cluster_2x8(), test::uniform_model(24),
                                      test::basic_job(32, 3));
    auto config = uniform_config(2, 2, 4, 2, 32, 24);
    Trace trace = run(config, {f.hw, f.model, f.dataset, f.job, f.comm_plan,
                               Policy::static_plan, {0.0}});
    trace.transitions.push_back({2, "a", "b", 10, 0.5});
    const std::string jsonl = trace_to_jsonl(trace);
    CHECK(jsonl.find("\"step\":1") != std::string::npos);
    CHECK(jsonl.find("\"event\":\"transition\"") != std::string::npos);
    CHECK(jsonl.find("\"config_id\":\"dp2-tp2-pp4-mb2-z0-b6.12.18\"") !=
          std::string::npos);
    const std::string csv = trace_to_csv(trace);
    CHECK(csv.rfind("step,iteration_time_s,throughput_samples_s,gpu_utilization,"
                    "memory_used_bytes,comm_fraction,stage_imbalance,"
                    "convergence_rate,config_id",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
}

TEST_CASE("pipeline bubble realization matches the closed form") {
    for (int pp : {1, 2, 4}) {
        for (std::int64_t m : {1LL, 4LL, 32LL}) {
            ClusterSpec cluster = test::cluster_2x8();
            cluster.node_count = 1;
            cluster.gpus_per_node = pp;
            cluster.intra_node.latency_s = 0.0;  // isolate compute + bubble
            const ModelSpec spec = test::uniform_model(4 * pp, 1'000'000, 1e11, 0);
            JobSpec job = test::basic_job(m, 3);
            const SimFixture f = make_fixture(cluster, spec, job);
            auto config = uniform_config(1, 1, pp, 1, m, 4 * pp);
            SimState sim = f.state(config, 0.0);
            const MetricsSnapshot snap = sim.step();
            const double idle = 1.0 - snap.gpu_utilization;
            const double expected = pipeline_bubble_fraction(pp, m);
            CHECK(std::abs(idle - expected) <= 1e-9);
        }
    }
}
