// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// plan / simulate / compare / oracle command implementations.

#include "strata/driver.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "strata/error.hpp"
#include "strata/instance_gen.hpp"
#include "strata/runner.hpp"

namespace strata {

using json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct LoadedSpecs {
    ClusterSpec cluster;
    ModelSpec model;
    JobSpec job;
    HardwareProfile hw;
    ModelProfile model_profile;
    DatasetProfile dataset;
};

LoadedSpecs load_specs(const std::string& cluster_file, const std::string& model_file,
                       const std::string& job_file) {
    LoadedSpecs s;
    s.cluster = parse_cluster_spec(read_file(cluster_file));
    s.model = parse_model_spec(read_file(model_file));
    s.job = parse_job_spec(read_file(job_file));
    // Structural validation only; plannability surfaces as PlanError so
    // "no feasible strategy" maps to its own exit code.
    std::vector<std::string> violations;
    for (size_t i = 0; i < s.model.layers.size(); ++i) {
        try {
            layer_flops(s.model.layers[i]);
        } catch (const SpecError& e) {
            violations.push_back("layers[" + std::to_string(i) + "]: " + e.what());
        }
    }
    if (s.model.total_params() == 0)
        violations.push_back("empty model: total parameter count is 0");
    if (!violations.empty()) {
        std::string message = "validation failed:";
        for (const auto& v : violations) message += "\n  - " + v;
        throw SpecError(message);
    }
    s.hw = profile_hardware(s.cluster);
    s.model_profile = profile_model(s.model, s.job.precision_bytes);
    s.dataset = profile_dataset(s.job);
    return s;
}

void print_cost(std::ostream& out, const CostBreakdown& cost) {
    out << "  total_s        " << cost.total_s << "\n"
        << "  compute_s      " << cost.compute_s << "\n"
        << "  tp_comm_s      " << cost.tp_comm_s << "\n"
        << "  dp_sync_s      " << cost.dp_sync_s << "\n"
        << "  p2p_s          " << cost.p2p_s << "\n"
        << "  bubble_s       " << cost.bubble_s << "\n"
        << "  throughput     " << cost.throughput << " samples/s\n"
        << "  comm_fraction  " << cost.comm_fraction << "\n";
}

void print_summary(std::ostream& out, const char* label, const TraceSummary& summary) {
    out << label << ": wall_clock_s " << summary.wall_clock_s << ", mean_throughput "
        << summary.mean_throughput << " samples/s, transitions "
        << summary.transitions << "\n";
}

}  // namespace

std::string plan_to_json(const ParallelismConfig& config) {
    json strategies = json::array();
    for (LayerMode mode : config.layer_strategies)
        strategies.push_back(std::string(to_string(mode)));
    json j{{"dp", config.dp},
           {"tp", config.tp},
           {"pp", config.pp},
           {"micro_batch_size", config.micro_batch_size},
           {"num_micro_batches", config.num_micro_batches},
           {"stage_boundaries", config.stage_boundaries},
           {"layer_strategies", std::move(strategies)},
           {"zero_stage", config.zero_stage}};
    return j.dump(2);
}

ParallelismConfig parse_plan(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SpecError(std::string("plan: parse error: ") + e.what());
    }
    if (!j.is_object()) throw SpecError("plan: expected an object");
    for (const auto& item : j.items()) {
        static const std::set<std::string> allowed{
            "dp", "tp", "pp", "micro_batch_size", "num_micro_batches",
            "stage_boundaries", "layer_strategies", "zero_stage"};
        if (!allowed.count(item.key()))
            throw SpecError("plan: unknown key \"" + item.key() + "\"");
    }
    ParallelismConfig config;
    try {
        config.dp = j.at("dp").get<int>();
        config.tp = j.at("tp").get<int>();
        config.pp = j.at("pp").get<int>();
        config.micro_batch_size = j.at("micro_batch_size").get<std::int64_t>();
        config.num_micro_batches = j.at("num_micro_batches").get<std::int64_t>();
        config.stage_boundaries = j.at("stage_boundaries").get<std::vector<int>>();
        for (const auto& s : j.at("layer_strategies"))
            config.layer_strategies.push_back(
                layer_mode_from_string(s.get<std::string>()));
        config.zero_stage = j.at("zero_stage").get<int>();
    } catch (const json::exception& e) {
        throw SpecError(std::string("plan: ") + e.what());
    }
    return config;
}

int cmd_plan(const PlanCommand& cmd, std::ostream& out, std::ostream& err) {
    try {
        const LoadedSpecs s = load_specs(cmd.cluster_file, cmd.model_file, cmd.job_file);
        const CommPlan comm_plan = comm_optimize({});
        const SearchResult result =
            discover({s.hw, s.model_profile, s.dataset, s.job, comm_plan, nullptr});

        out << "plan: " << result.best.id() << "\n";
        out << "  dp " << result.best.dp << "  tp " << result.best.tp << "  pp "
            << result.best.pp << "  micro_batch " << result.best.micro_batch_size
            << "  num_micro_batches " << result.best.num_micro_batches
            << "  zero_stage " << result.best.zero_stage << "\n";
        out << "  stage_boundaries:";
        for (int b : result.best.stage_boundaries) out << " " << b;
        out << "\n  layer_strategies:";
        for (LayerMode mode : result.best.layer_strategies)
            out << " " << (mode == LayerMode::tensor_parallel ? "tp" : "dr");
        out << "\n";
        out << "cost:\n";
        print_cost(out, result.best_cost.cost);
        const MemoryFootprint fp =
            memory_footprint(result.best, s.model_profile, s.job, s.hw);
        out << "memory:\n"
            << "  model_state_bytes " << fp.model_state_bytes << "\n"
            << "  activation_bytes  " << fp.activation_bytes << "\n"
            << "  total_bytes       " << fp.total_bytes << "\n"
            << "  headroom_fraction " << fp.headroom_fraction << "\n";
        out << "pruning_log (" << result.candidates.pruning_log.size() << "):\n";
        for (const auto& rec : result.candidates.pruning_log)
            out << "  " << rec.triple.to_string() << " -> " << rec.rule << "\n";
        out << "evaluated " << result.evaluated_count << " candidates\n";

        if (!cmd.emit_path.empty())
            write_file(cmd.emit_path, plan_to_json(result.best) + "\n");
        return ExitStatus::ok;
    } catch (const SpecError& e) {
        err << "error: " << e.what() << "\n";
        return ExitStatus::invalid_input;
    } catch (const PlanError& e) {
        err << "error: " << e.what() << "\n";
        return ExitStatus::infeasible;
    }
}

namespace {

struct PreparedRun {
    LoadedSpecs specs;
    CommPlan comm_plan;
    ParallelismConfig initial;
    SimOptions options;
};

PreparedRun prepare_run(const std::string& cluster_file, const std::string& model_file,
                        const std::string& job_file, const std::string& plan_path,
                        const std::optional<std::uint64_t>& seed_override,
                        const std::optional<double>& noise_override,
                        const std::string& selector_config_path) {
    PreparedRun run{load_specs(cluster_file, model_file, job_file), comm_optimize({})};
    if (seed_override) run.specs.job.seed = *seed_override;
    if (noise_override) run.options.noise = *noise_override;
    if (!selector_config_path.empty()) {
        // Reuse the job-spec selector block parser for the override file.
        json wrapper{{"global_batch_size", run.specs.job.global_batch_size},
                     {"target_steps", run.specs.job.target_steps},
                     {"selector", json::parse(read_file(selector_config_path))}};
        run.specs.job.selector = parse_job_spec(wrapper.dump()).selector;
    }
    if (!plan_path.empty()) {
        run.initial = parse_plan(read_file(plan_path));
        validate_config(run.initial, run.specs.model_profile, run.specs.hw,
                        run.specs.job.global_batch_size, /*require_all_devices=*/false);
    } else {
        run.initial = discover({run.specs.hw, run.specs.model_profile,
                                run.specs.dataset, run.specs.job, run.comm_plan,
                                nullptr})
                          .best;
    }
    return run;
}

}  // namespace

int cmd_simulate(const SimulateCommand& cmd, std::ostream& out, std::ostream& err) {
    try {
        if (cmd.policy != "static" && cmd.policy != "adaptive")
            throw SpecError("policy must be \"static\" or \"adaptive\"");
        PreparedRun prepared =
            prepare_run(cmd.cluster_file, cmd.model_file, cmd.job_file, cmd.plan_path,
                        cmd.seed_override, cmd.noise_override, cmd.selector_config_path);
        const Policy policy =
            cmd.policy == "adaptive" ? Policy::adaptive : Policy::static_plan;
        const Trace trace = run(prepared.initial,
                                {prepared.specs.hw, prepared.specs.model_profile,
                                 prepared.specs.dataset, prepared.specs.job,
                                 prepared.comm_plan, policy, prepared.options});
        if (!cmd.trace_path.empty()) {
            write_file(cmd.trace_path + ".jsonl", trace_to_jsonl(trace));
            write_file(cmd.trace_path + ".csv", trace_to_csv(trace));
        }
        out << "initial plan: " << prepared.initial.id() << "\n";
        print_summary(out, "summary", trace.summary);
        for (const auto& t : trace.transitions) {
            out << "  transition at step " << t.step << ": " << t.from_id << " -> "
                << t.to_id << " (bytes_moved " << t.bytes_moved << ", pause_s "
                << t.pause_s << ")\n";
        }
        return ExitStatus::ok;
    } catch (const SpecError& e) {
        err << "error: " << e.what() << "\n";
        return ExitStatus::invalid_input;
    } catch (const PlanError& e) {
        err << "error: " << e.what() << "\n";
        return ExitStatus::infeasible;
    }
}

int cmd_compare(const CompareCommand& cmd, std::ostream& out, std::ostream& err) {
    try {
        PreparedRun prepared =
            prepare_run(cmd.cluster_file, cmd.model_file, cmd.job_file, cmd.plan_path,
                        cmd.seed_override, cmd.noise_override, "");
        const RunInputs base{prepared.specs.hw,      prepared.specs.model_profile,
                             prepared.specs.dataset, prepared.specs.job,
                             prepared.comm_plan,     Policy::static_plan,
                             prepared.options};
        RunInputs adaptive_in = base;
        adaptive_in.policy = Policy::adaptive;

        const Trace trace_static = run(prepared.initial, base);
        const Trace trace_adaptive = run(prepared.initial, adaptive_in);

        out << "initial plan: " << prepared.initial.id() << "\n";
        print_summary(out, "static  ", trace_static.summary);
        print_summary(out, "adaptive", trace_adaptive.summary);
        const double gain = (trace_static.summary.wall_clock_s -
                             trace_adaptive.summary.wall_clock_s) /
                            trace_static.summary.wall_clock_s;
        out << "relative gain: " << gain * 100.0 << "%\n";
        return ExitStatus::ok;
    } catch (const SpecError& e) {
        err << "error: " << e.what() << "\n";
        return ExitStatus::invalid_input;
    } catch (const PlanError& e) {
        err << "error: " << e.what() << "\n";
        return ExitStatus::infeasible;
    }
}

namespace {

int verify_instance(const OracleInstance& inst, const PlannerFn& planner,
                    std::ostream& out, const std::string& dump_dir,
                    const std::string& label) {
    const HardwareProfile hw = profile_hardware(inst.cluster);
    const ModelProfile model = profile_model(inst.model, inst.job.precision_bytes);
    const DatasetProfile dataset = profile_dataset(inst.job);
    const CommPlan comm_plan = comm_optimize({});
    const SearchInputs in{hw, model, dataset, inst.job, comm_plan, nullptr};

    std::optional<double> fast_cost, brute_cost;
    try {
        fast_cost = planner(in).best_cost.cost.total_s;
    } catch (const PlanError&) {
    }
    try {
        brute_cost = exhaustive_plan(in).best_cost.cost.total_s;
    } catch (const PlanError&) {
    }
    const bool match =
        fast_cost.has_value() == brute_cost.has_value() &&
        (!fast_cost || *fast_cost == *brute_cost);
    if (match) return ExitStatus::ok;

    out << "MISMATCH " << label << ": discover="
        << (fast_cost ? std::to_string(*fast_cost) : "infeasible")
        << " exhaustive=" << (brute_cost ? std::to_string(*brute_cost) : "infeasible")
        << "\n";
    const auto dir = std::filesystem::path(dump_dir);
    std::filesystem::create_directories(dir);
    write_file((dir / (label + "_cluster.json")).string(), to_json(inst.cluster));
    write_file((dir / (label + "_model.json")).string(), to_json(inst.model));
    write_file((dir / (label + "_job.json")).string(), to_json(inst.job));
    out << "repro specs written to " << dir.string() << "/" << label << "_*.json\n";
    return ExitStatus::oracle_mismatch;
}

}  // namespace

int cmd_oracle(const OracleCommand& cmd, std::ostream& out, std::ostream& err,
               const PlannerFn& planner_override) {
    try {
        const PlannerFn planner =
            planner_override ? planner_override
                             : [](const SearchInputs& in) { return discover(in); };

        if (!cmd.cluster_file.empty()) {
            OracleInstance given;
            given.cluster = parse_cluster_spec(read_file(cmd.cluster_file));
            given.model = parse_model_spec(read_file(cmd.model_file));
            given.job = parse_job_spec(read_file(cmd.job_file));
            if (given.cluster.total_gpus() > kOracleMaxGpus ||
                static_cast<int>(given.model.layers.size()) > kOracleMaxLayers) {
                err << "error: instance too large for oracle\n";
                return ExitStatus::invalid_input;
            }
            const int status = verify_instance(given, planner, out, cmd.dump_dir, "given");
            if (status != ExitStatus::ok) return status;
            out << "given instance: costs equal\n";
        }

        Rng rng{cmd.seed};
        for (std::int64_t trial = 0; trial < cmd.trials; ++trial) {
            const OracleInstance inst = random_oracle_instance(rng);
            const int status = verify_instance(inst, planner, out, cmd.dump_dir,
                                               "trial" + std::to_string(trial));
            if (status != ExitStatus::ok) return status;
        }
        out << "oracle: " << cmd.trials << " randomized instances, all costs equal\n";
        return ExitStatus::ok;
    } catch (const SpecError& e) {
        err << "error: " << e.what() << "\n";
        return ExitStatus::invalid_input;
    }
}

}  // namespace strata
