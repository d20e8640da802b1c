// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the CLI, exposed as a library so tests
// can drive them directly.

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "strata/search.hpp"

namespace strata {

struct ExitStatus {
    static constexpr int ok = 0;
    static constexpr int oracle_mismatch = 1;
    static constexpr int invalid_input = 2;
    static constexpr int infeasible = 3;
};

struct PlanCommand {
    std::string cluster_file;
    std::string model_file;
    std::string job_file;
    std::string emit_path;  // optional: write the chosen plan document
};

struct SimulateCommand {
    std::string cluster_file;
    std::string model_file;
    std::string job_file;
    std::string policy = "static";  // "static" | "adaptive"
    std::string trace_path;         // optional: writes .jsonl and .csv
    std::string plan_path;          // optional: use this plan, skip discovery
    std::optional<std::uint64_t> seed_override;
    std::optional<double> noise_override;
    std::string selector_config_path;  // optional JSON overriding job selector
};

struct CompareCommand {
    std::string cluster_file;
    std::string model_file;
    std::string job_file;
    std::string plan_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<double> noise_override;
};

struct OracleCommand {
    std::int64_t trials = 100;
    std::uint64_t seed = 1;
    std::string dump_dir = ".";  // diverging instances land here
    // Optional explicit instance to verify before the randomized trials.
    std::string cluster_file;
    std::string model_file;
    std::string job_file;
};

int cmd_plan(const PlanCommand& cmd, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateCommand& cmd, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareCommand& cmd, std::ostream& out, std::ostream& err);

/// Planner hook for the oracle harness self-test: replaces discover.
using PlannerFn = std::function<SearchResult(const SearchInputs&)>;

int cmd_oracle(const OracleCommand& cmd, std::ostream& out, std::ostream& err,
               const PlannerFn& planner_override = nullptr);

// Plan documents (--emit / --plan). Schema mirrors ParallelismConfig.
std::string plan_to_json(const ParallelismConfig& config);
ParallelismConfig parse_plan(std::string_view text);

}  // namespace strata
