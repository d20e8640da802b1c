// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// strata CLI: plan, simulate, compare, oracle.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "strata/driver.hpp"

int main(int argc, char** argv) {
    CLI::App app{"hybrid-parallel training planner and simulator"};
    app.require_subcommand(1);

    std::string cluster_file, model_file, job_file;
    auto add_spec_options = [&](CLI::App* sub) {
        sub->add_option("--cluster", cluster_file, "cluster spec (JSON)")->required();
        sub->add_option("--model", model_file, "model spec (JSON)")->required();
        sub->add_option("--job", job_file, "job spec (JSON)")->required();
    };

    // plan
    auto* plan = app.add_subcommand("plan", "search for the best parallelism plan");
    add_spec_options(plan);
    std::string emit_path;
    plan->add_option("--emit", emit_path, "write the chosen plan document");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "simulate a training run");
    add_spec_options(simulate);
    std::string policy = "static";
    std::string trace_path, plan_path, selector_config;
    std::optional<std::uint64_t> seed;
    std::optional<double> noise;
    simulate->add_option("--policy", policy, "static | adaptive")
        ->check(CLI::IsMember({"static", "adaptive"}));
    simulate->add_option("--trace", trace_path, "trace path prefix (.jsonl, .csv)");
    simulate->add_option("--plan", plan_path, "use this plan document, skip discovery");
    simulate->add_option("--seed", seed, "override the job seed");
    simulate->add_option("--noise", noise, "override iteration noise (default 0.02)");
    simulate->add_option("--selector-config", selector_config,
                         "JSON file overriding the job's selector block");

    // compare
    auto* compare = app.add_subcommand("compare", "run static vs adaptive side by side");
    add_spec_options(compare);
    std::string compare_plan;
    std::optional<std::uint64_t> compare_seed;
    std::optional<double> compare_noise;
    compare->add_option("--plan", compare_plan, "use this plan document");
    compare->add_option("--seed", compare_seed, "override the job seed");
    compare->add_option("--noise", compare_noise, "override iteration noise");

    // oracle
    auto* oracle = app.add_subcommand("oracle",
                                      "verify discover against the exhaustive planner");
    std::int64_t trials = 100;
    std::uint64_t oracle_seed = 1;
    std::string dump_dir = ".";
    std::string oracle_cluster, oracle_model, oracle_job;
    oracle->add_option("--trials", trials, "number of randomized instances");
    oracle->add_option("--seed", oracle_seed, "generator seed");
    oracle->add_option("--dump-dir", dump_dir, "where diverging instances are written");
    oracle->add_option("--cluster", oracle_cluster, "verify this instance first");
    oracle->add_option("--model", oracle_model, "model spec for the given instance");
    oracle->add_option("--job", oracle_job, "job spec for the given instance");

    CLI11_PARSE(app, argc, argv);

    if (plan->parsed()) {
        return strata::cmd_plan({cluster_file, model_file, job_file, emit_path},
                                std::cout, std::cerr);
    }
    if (simulate->parsed()) {
        return strata::cmd_simulate({cluster_file, model_file, job_file, policy,
                                     trace_path, plan_path, seed, noise,
                                     selector_config},
                                    std::cout, std::cerr);
    }
    if (compare->parsed()) {
        return strata::cmd_compare({cluster_file, model_file, job_file, compare_plan,
                                    compare_seed, compare_noise},
                                   std::cout, std::cerr);
    }
    if (oracle->parsed()) {
        if (oracle_cluster.empty() != oracle_model.empty() ||
            oracle_model.empty() != oracle_job.empty()) {
            std::cerr << "error: --cluster/--model/--job must be given together\n";
            return strata::ExitStatus::invalid_input;
        }
        return strata::cmd_oracle({trials, oracle_seed, dump_dir, oracle_cluster,
                                   oracle_model, oracle_job},
                                  std::cout, std::cerr);
    }
    return strata::ExitStatus::invalid_input;
}
