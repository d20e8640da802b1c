// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <array>
#include <vector>

#include "strata/error.hpp"
#include "strata/instance_gen.hpp"
#include "strata/search.hpp"
#include "strata/sim.hpp"
#include "test_helpers.hpp"

using namespace strata;
using doctest::Approx;

namespace {

struct Pipeline {
    HardwareProfile hw;
    ModelProfile model;
    DatasetProfile dataset;
    JobSpec job;
    CommPlan comm_plan;

    SearchInputs inputs() const { return {hw, model, dataset, job, comm_plan, nullptr}; }
};

Pipeline make_pipeline(const ClusterSpec& cluster, const ModelSpec& model,
                       const JobSpec& job) {
    Pipeline p;
    p.hw = profile_hardware(cluster);
    p.model = profile_model(model, job.precision_bytes);
    p.dataset = profile_dataset(job);
    p.job = job;
    p.comm_plan = comm_optimize({});
    return p;
}

Pipeline make_pipeline(const OracleInstance& inst) {
    return make_pipeline(inst.cluster, inst.model, inst.job);
}

}  // namespace

TEST_CASE("micro batch menu: power-of-two divisors up to 64") {
    CHECK(micro_batch_menu(7) == std::vector<std::int64_t>{1});
    CHECK(micro_batch_menu(256) == std::vector<std::int64_t>{1, 2, 4, 8, 16, 32, 64});
    CHECK(micro_batch_menu(12) == std::vector<std::int64_t>{1, 2, 4});
    CHECK(micro_batch_menu(1) == std::vector<std::int64_t>{1});
}

TEST_CASE("enumerate: 16 GPUs / 8 per node prunes only tp=16") {
    // Small model: no rule besides the node cap applies.
    const Pipeline p = make_pipeline(test::cluster_2x8(),
                                     test::uniform_model(24, 10'000'000),
                                     test::basic_job(32));
    const CandidateSet cs = enumerate_degree_candidates(p.hw, p.model, p.job);
    CHECK(cs.degree_triples.size() == 14);  // 15 exponent compositions minus tp=16
    REQUIRE(cs.pruning_log.size() == 1);
    CHECK(cs.pruning_log[0].triple == DegreeTriple{1, 16, 1});
    CHECK(cs.pruning_log[0].rule == "R1");
    for (const auto& t : cs.degree_triples) {
        CHECK(t.dp * t.tp * t.pp == 16);
        CHECK(t.tp <= 8);
    }
}

TEST_CASE("enumerate: one GPU leaves the identity triple") {
    const Pipeline p = make_pipeline(test::single_gpu_cluster(), test::uniform_model(2),
                                     test::basic_job(8));
    const CandidateSet cs = enumerate_degree_candidates(p.hw, p.model, p.job);
    REQUIRE(cs.degree_triples.size() == 1);
    CHECK(cs.degree_triples[0] == DegreeTriple{1, 1, 1});
}

TEST_CASE("enumerate: >1e9 params prunes every pp=1 triple via R3") {
    ClusterSpec cluster = test::cluster_2x8();
    cluster.node_count = 1;  // 8 GPUs
    const ModelSpec model = test::uniform_model(12, 100'000'000);  // 1.2e9 params
    const Pipeline p = make_pipeline(cluster, model, test::basic_job(32));
    const CandidateSet cs = enumerate_degree_candidates(p.hw, p.model, p.job);
    for (const auto& t : cs.degree_triples) CHECK(t.pp > 1);
    int r3 = 0;
    for (const auto& rec : cs.pruning_log) {
        if (rec.triple.pp == 1) {
            CHECK(rec.rule == "R3");
            ++r3;
        }
    }
    CHECK(r3 == 4);  // (1,1,1) shape excluded: dp*tp in {1,2,4,8} with pp=1
}

TEST_CASE("enumerate: infeasible instance raises a summary error") {
    ClusterSpec cluster = test::cluster_2x8();
    cluster.node_count = 1;
    cluster.gpus_per_node = 1;
    cluster.device_memory_bytes = 1'000'000;  // nothing fits
    const ModelSpec model = test::uniform_model(2, 100'000'000);
    const Pipeline p = make_pipeline(cluster, model, test::basic_job(8));
    CHECK_THROWS_AS(enumerate_degree_candidates(p.hw, p.model, p.job), PlanError);
}

TEST_CASE("partition_stages: symmetric and forced cuts") {
    std::vector<double> equal(24, 1.0);
    CHECK(partition_stages(equal, 4) == std::vector<int>{0, 6, 12, 18, 24});
    std::vector<double> skew{4, 1, 1, 1, 1};
    CHECK(partition_stages(skew, 2) == std::vector<int>{0, 1, 5});
    std::vector<double> any{3, 1, 4};
    CHECK(partition_stages(any, 1) == std::vector<int>{0, 3});
    CHECK_THROWS_AS(partition_stages(skew, 6), SpecError);
}

TEST_CASE("partition_stages matches brute force on random costs") {
    Rng rng{99};
    for (int trial = 0; trial < 60; ++trial) {
        const int n = static_cast<int>(rng.next_int(1, 8));
        const int pp = static_cast<int>(rng.next_int(1, n));
        std::vector<double> costs(n);
        for (auto& c : costs) c = rng.next_double() * 10.0;

        const auto dp_bounds = partition_stages(costs, pp);
        // Brute force every cut.
        std::vector<int> cut(pp + 1);
        cut.front() = 0;
        cut.back() = n;
        for (int k = 1; k < pp; ++k) cut[k] = k;
        double best = -1.0;
        while (true) {
            double max_stage = 0.0;
            for (int k = 0; k < pp; ++k) {
                double t = 0.0;
                for (int l = cut[k]; l < cut[k + 1]; ++l) t += costs[l];
                max_stage = std::max(max_stage, t);
            }
            if (best < 0.0 || max_stage < best) best = max_stage;
            int k = pp - 1;
            while (k >= 1 && cut[k] == n - (pp - k)) --k;
            if (k < 1) break;
            ++cut[k];
            for (int j = k + 1; j < pp; ++j) cut[j] = cut[j - 1] + 1;
        }
        double dp_max = 0.0;
        for (int k = 0; k < pp; ++k) {
            double t = 0.0;
            for (int l = dp_bounds[k]; l < dp_bounds[k + 1]; ++l) t += costs[l];
            dp_max = std::max(dp_max, t);
        }
        CHECK(dp_max == best);
    }
}

TEST_CASE("strategy_dp: hand-set menu picks the mixed assignment") {
    // tensor costs (1,5,1), replicated (3,2,3), conv 0.5 between any two
    // adjacent disagreeing layers. Brute force over the 8 assignments
    // gives [tp, dr, tp] with total 1 + 0.5 + 2 + 0.5 + 1 = 5.
    const std::vector<double> dr{3, 2, 3};
    const std::vector<double> tp{1, 5, 1};
    const std::vector<bool> shardable{true, true, true};
    const std::vector<double> conv{0, 0.5, 0.5};
    const std::vector<int> bounds{0, 3};
    const StrategyDpResult result = strategy_dp(dr, tp, shardable, conv, bounds, 2);
    CHECK(result.total_cost == 5.0);
    CHECK(result.modes == std::vector<LayerMode>{LayerMode::tensor_parallel,
                                                 LayerMode::data_replicated,
                                                 LayerMode::tensor_parallel});

    // Cross-check against all 2^3 assignments.
    double brute = 1e300;
    for (int mask = 0; mask < 8; ++mask) {
        double total = 0.0;
        for (int l = 0; l < 3; ++l) {
            const bool t = mask & (1 << l);
            if (l > 0 && (bool(mask & (1 << (l - 1))) != t)) total += conv[l];
            total += t ? tp[l] : dr[l];
        }
        brute = std::min(brute, total);
    }
    CHECK(result.total_cost == brute);
}

TEST_CASE("strategy_dp: switching only adds cost on uniform layers") {
    const std::vector<double> dr{2, 2, 2, 2};
    const std::vector<double> tp{1.5, 1.5, 1.5, 1.5};
    const std::vector<bool> shardable{true, true, true, true};
    const std::vector<double> conv{0, 0.3, 0.3, 0.3};
    const std::vector<int> bounds{0, 4};
    const StrategyDpResult result = strategy_dp(dr, tp, shardable, conv, bounds, 2);
    for (LayerMode mode : result.modes) CHECK(mode == LayerMode::tensor_parallel);
    CHECK(result.total_cost == 6.0);
}

TEST_CASE("strategy_dp: tp=1 forces data_replicated, ties prefer it") {
    const std::vector<double> dr{2, 2};
    const std::vector<double> tp{1, 1};
    const std::vector<bool> shardable{true, true};
    const std::vector<double> conv{0, 0};
    const std::vector<int> bounds{0, 2};
    const StrategyDpResult forced = strategy_dp(dr, tp, shardable, conv, bounds, 1);
    CHECK(forced.modes == std::vector<LayerMode>(2, LayerMode::data_replicated));

    const std::vector<double> tie{2, 2};
    const StrategyDpResult tied = strategy_dp(dr, tie, shardable, conv, bounds, 2);
    CHECK(tied.modes == std::vector<LayerMode>(2, LayerMode::data_replicated));
}

TEST_CASE("discover: single GPU runs compute-only") {
    const Pipeline p = make_pipeline(test::single_gpu_cluster(), test::uniform_model(2),
                                     test::basic_job(8));
    const SearchResult result = discover(p.inputs());
    CHECK(result.best.dp == 1);
    CHECK(result.best.tp == 1);
    CHECK(result.best.pp == 1);
    CHECK(result.best_cost.cost.total_s == result.best_cost.cost.compute_s);
    CHECK(result.best_cost.cost.comm_fraction == 0.0);
}

TEST_CASE("discover result satisfies the config invariants") {
    Rng rng{17};
    int planned = 0;
    for (int i = 0; i < 40 && planned < 20; ++i) {
        const OracleInstance inst = random_oracle_instance(rng);
        const Pipeline p = make_pipeline(inst);
        try {
            const SearchResult result = discover(p.inputs());
            ++planned;
            CHECK_NOTHROW(validate_config(result.best, p.model, p.hw,
                                          p.job.global_batch_size, true));
            const MemoryFootprint fp =
                memory_footprint(result.best, p.model, p.job, p.hw);
            CHECK(fp.headroom_fraction >= 0.0);
            CHECK(result.best_cost.cost.total_s > 0.0);
        } catch (const PlanError&) {
        }
    }
    CHECK(planned >= 10);
}

TEST_CASE("discover is deterministic") {
    Rng rng{31};
    const OracleInstance inst = random_oracle_instance(rng);
    const Pipeline p = make_pipeline(inst);
    try {
        const SearchResult a = discover(p.inputs());
        const SearchResult b = discover(p.inputs());
        CHECK(a.best == b.best);
        CHECK(a.best_cost.cost.total_s == b.best_cost.cost.total_s);
        CHECK(a.evaluated_count == b.evaluated_count);
        REQUIRE(a.candidates.pruning_log.size() == b.candidates.pruning_log.size());
        for (size_t i = 0; i < a.candidates.pruning_log.size(); ++i) {
            CHECK(a.candidates.pruning_log[i].triple ==
                  b.candidates.pruning_log[i].triple);
            CHECK(a.candidates.pruning_log[i].rule == b.candidates.pruning_log[i].rule);
        }
    } catch (const PlanError&) {
    }
}

TEST_CASE("oracle: discover equals exhaustive_plan on random small instances") {
    Rng rng{2024};
    int compared = 0;
    for (int i = 0; i < 40; ++i) {
        const OracleInstance inst = random_oracle_instance(rng);
        const Pipeline p = make_pipeline(inst);
        std::optional<double> fast, brute;
        try {
            fast = discover(p.inputs()).best_cost.cost.total_s;
        } catch (const PlanError&) {
        }
        try {
            brute = exhaustive_plan(p.inputs()).best_cost.cost.total_s;
        } catch (const PlanError&) {
        }
        REQUIRE(fast.has_value() == brute.has_value());
        if (fast) {
            CHECK(*fast == *brute);
            ++compared;
        }
    }
    CHECK(compared >= 20);
}

TEST_CASE("pruned candidates never beat the returned best") {
    Rng rng{555};
    for (int i = 0; i < 25; ++i) {
        const OracleInstance inst = random_oracle_instance(rng);
        const Pipeline p = make_pipeline(inst);
        try {
            const SearchResult result = discover(p.inputs());
            for (const auto& rec : result.candidates.pruning_log) {
                if (rec.rule == "R1") continue;  // hard placement constraint
                if (p.job.global_batch_size % rec.triple.dp != 0) continue;
                for (std::int64_t mb :
                     micro_batch_menu(p.job.global_batch_size / rec.triple.dp)) {
                    auto built = build_candidate_config(rec.triple, mb, p.inputs());
                    if (built)
                        CHECK(built->second.cost.total_s >=
                              result.best_cost.cost.total_s);
                }
            }
        } catch (const PlanError&) {
        }
    }
}

TEST_CASE("exhaustive guard rejects large instances") {
    ClusterSpec cluster = test::cluster_2x8();
    cluster.node_count = 17;
    cluster.gpus_per_node = 1;
    const Pipeline p =
        make_pipeline(cluster, test::uniform_model(2), test::basic_job(8));
    CHECK_THROWS_WITH_AS(exhaustive_plan(p.inputs()),
                         doctest::Contains("too large for oracle"), PlanError);

    const Pipeline big =
        make_pipeline(test::single_gpu_cluster(), test::uniform_model(11),
                      test::basic_job(8));
    CHECK_THROWS_AS(exhaustive_plan(big.inputs()), PlanError);
}

TEST_CASE("mixed layer-wise assignment: attention tensor, mlp replicated") {
    // Attention layers: heavy compute, tiny activations -> sharding wins.
    // MLP layers: light compute, huge activations -> collectives dominate.
    // Replicated model states overflow the device, so pure data parallel
    // is out and the tensor route must carry the attention weight.
    ClusterSpec cluster = test::cluster_2x8();
    cluster.node_count = 1;
    cluster.gpus_per_node = 2;
    cluster.device_memory_bytes = 10'000'000'000;
    ModelSpec model;
    for (int i = 0; i < 2; ++i) {
        model.layers.push_back(
            test::explicit_layer(LayerKind::attention, 400'000'000, 1e12, 100'000));
        model.layers.push_back(
            test::explicit_layer(LayerKind::mlp, 10'000'000, 1e9, 100'000'000));
    }
    JobSpec job = test::basic_job(4);
    job.zero_stage_allowed = 0;
    const Pipeline p = make_pipeline(cluster, model, job);
    const SearchResult result = discover(p.inputs());
    REQUIRE(result.best.tp == 2);
    CHECK(result.best.layer_strategies[0] == LayerMode::tensor_parallel);
    CHECK(result.best.layer_strategies[1] == LayerMode::data_replicated);
    CHECK(result.best.layer_strategies[2] == LayerMode::tensor_parallel);
    CHECK(result.best.layer_strategies[3] == LayerMode::data_replicated);
    const SearchResult brute = exhaustive_plan(p.inputs());
    CHECK(result.best_cost.cost.total_s == brute.best_cost.cost.total_s);
}
