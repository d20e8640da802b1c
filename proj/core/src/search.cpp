// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// Discovery-phase search. Per candidate (degree triple, micro-batch) the
// stage cut and per-layer modes are optimized jointly and exactly: stage
// times are additive over layers, the iteration cost is strictly
// monotone in the bottleneck stage time, and the remaining cost terms do
// not depend on the cut or the modes. That makes "minimize the max
// per-stage optimal cost" the whole problem, which a minimax partition
// over per-range mode DPs solves exactly — and is why discover and the
// brute-force oracle agree bit-for-bit.

#include "strata/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "strata/error.hpp"
#include "strata/sim.hpp"

namespace strata {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_power_of_two(std::int64_t x) { return x > 0 && (x & (x - 1)) == 0; }

// --- Per-layer cost menus --------------------------------------------------

struct LayerCostMenu {
    int n = 0;
    int tp = 1;
    std::vector<double> cost_dr;   // per micro-batch, data_replicated
    std::vector<double> cost_tp;   // per micro-batch, tensor_parallel (inf if n/a)
    std::vector<double> conv;      // conv[l]: mode switch between l-1 and l
    std::vector<bool> shardable;
    std::vector<double> shard_dr;  // per-device param accounting per mode,
    std::vector<double> shard_tp;  // same accumulation the memory model uses
    std::vector<std::int64_t> act_prefix;  // activation bytes prefix sums
};

LayerCostMenu build_menu(const DegreeTriple& triple, std::int64_t micro_batch,
                         const HardwareProfile& hw, const ModelProfile& model,
                         const DriftState* drift) {
    const int n = static_cast<int>(model.layers.size());
    const EffectiveLinks links = effective_links(hw, drift);
    const LinkSpec& tp_link =
        triple.tp > 1 ? links.pick(hw, 0, triple.tp - 1) : links.intra;

    LayerCostMenu menu;
    menu.n = n;
    menu.tp = triple.tp;
    menu.cost_dr.resize(n);
    menu.cost_tp.resize(n, kInf);
    menu.conv.resize(n, 0.0);
    menu.shardable.resize(n);
    menu.shard_dr.resize(n);
    menu.shard_tp.resize(n);
    menu.act_prefix.resize(n + 1, 0);
    for (int l = 0; l < n; ++l) {
        const auto& layer = model.layers[l];
        const double mult = drift ? drift->layer_mult(l) : 1.0;
        const double c_dr = layer_compute_time(layer, LayerMode::data_replicated,
                                               triple.tp, micro_batch, hw, mult);
        menu.cost_dr[l] = c_dr;
        menu.shardable[l] = layer.tp_shardable && triple.tp > 1;
        menu.shard_dr[l] = static_cast<double>(layer.param_count);
        menu.shard_tp[l] = static_cast<double>(layer.param_count) / triple.tp;
        if (menu.shardable[l]) {
            const double c = layer_compute_time(layer, LayerMode::tensor_parallel,
                                                triple.tp, micro_batch, hw, mult);
            const double x = tp_activation_comm_time(layer, LayerMode::tensor_parallel,
                                                     triple.tp, micro_batch, tp_link);
            menu.cost_tp[l] = c + x;
        }
        if (l > 0)
            menu.conv[l] =
                mode_conversion_time(model.layers[l - 1], triple.tp, micro_batch, tp_link);
        menu.act_prefix[l + 1] = menu.act_prefix[l] + layer.activation_bytes;
    }
    return menu;
}

double menu_cost(const LayerCostMenu& menu, int l, LayerMode mode) {
    return mode == LayerMode::tensor_parallel ? menu.cost_tp[l] : menu.cost_dr[l];
}

double menu_shard(const LayerCostMenu& menu, int l, LayerMode mode) {
    return mode == LayerMode::tensor_parallel ? menu.shard_tp[l] : menu.shard_dr[l];
}

// --- Pareto frontiers over (stage time, per-device params) -----------------

struct FrontPoint {
    double t = 0.0;
    double params = 0.0;
};

void pareto_prune(std::vector<FrontPoint>& points) {
    std::sort(points.begin(), points.end(), [](const FrontPoint& a, const FrontPoint& b) {
        if (a.t != b.t) return a.t < b.t;
        return a.params < b.params;
    });
    std::vector<FrontPoint> kept;
    double best_params = kInf;
    for (const auto& p : points) {
        if (p.params < best_params) {
            kept.push_back(p);
            best_params = p.params;
        }
    }
    points.swap(kept);
}

/// Frontiers for every contiguous range [a, b), merged across end modes.
/// Point lists are sorted by time ascending / params descending.
class RangeSolver {
public:
    RangeSolver(const LayerCostMenu& menu) : menu_(menu), n_(menu.n) {
        table_.resize(static_cast<size_t>(n_) * (n_ + 1));
        for (int a = 0; a < n_; ++a) build_row(a);
    }

    const std::vector<FrontPoint>& frontier(int a, int b) const {
        return table_[static_cast<size_t>(a) * (n_ + 1) + b];
    }

    double min_time(int a, int b) const {
        const auto& f = frontier(a, b);
        return f.empty() ? kInf : f.front().t;
    }

    /// Minimal stage time whose per-device param share passes `fits`.
    template <typename Fits>
    double min_time_where(int a, int b, Fits fits) const {
        for (const auto& p : frontier(a, b))
            if (fits(p.params)) return p.t;
        return kInf;
    }

    std::int64_t act_bytes(int a, int b) const {
        return menu_.act_prefix[b] - menu_.act_prefix[a];
    }

private:
    void build_row(int a) {
        std::vector<FrontPoint> front_dr, front_tp;
        front_dr.push_back({menu_.cost_dr[a], menu_.shard_dr[a]});
        if (menu_.shardable[a])
            front_tp.push_back({menu_.cost_tp[a], menu_.shard_tp[a]});
        store(a, a + 1, front_dr, front_tp);
        for (int b = a + 2; b <= n_; ++b) {
            const int l = b - 1;
            std::vector<FrontPoint> next_dr, next_tp;
            auto extend = [&](const std::vector<FrontPoint>& prev, bool switched,
                              LayerMode mode, std::vector<FrontPoint>& out) {
                const double cost = menu_cost(menu_, l, mode);
                if (cost == kInf) return;
                for (const auto& p : prev) {
                    double t = p.t;
                    if (switched) t += menu_.conv[l];
                    t += cost;
                    out.push_back({t, p.params + menu_shard(menu_, l, mode)});
                }
            };
            extend(front_dr, false, LayerMode::data_replicated, next_dr);
            extend(front_tp, true, LayerMode::data_replicated, next_dr);
            extend(front_dr, true, LayerMode::tensor_parallel, next_tp);
            extend(front_tp, false, LayerMode::tensor_parallel, next_tp);
            pareto_prune(next_dr);
            pareto_prune(next_tp);
            front_dr.swap(next_dr);
            front_tp.swap(next_tp);
            store(a, b, front_dr, front_tp);
        }
    }

    void store(int a, int b, const std::vector<FrontPoint>& dr,
               const std::vector<FrontPoint>& tp) {
        std::vector<FrontPoint> merged = dr;
        merged.insert(merged.end(), tp.begin(), tp.end());
        pareto_prune(merged);
        table_[static_cast<size_t>(a) * (n_ + 1) + b] = std::move(merged);
    }

    const LayerCostMenu& menu_;
    int n_;
    std::vector<std::vector<FrontPoint>> table_;
};

// --- Exact minimax partition ------------------------------------------------

struct MinimaxResult {
    double value = kInf;
    std::vector<int> boundaries;
};

/// Minimum over contiguous partitions into exactly `pp` non-empty stages
/// of the maximum per-stage cost F(a, b); F must be non-decreasing in b.
/// Boundaries are the lexicographically earliest optimal ones.
template <typename F>
std::optional<MinimaxResult> minimax_partition(int n, int pp, F cost) {
    if (pp < 1 || pp > n) return std::nullopt;

    std::vector<double> values;
    values.reserve(static_cast<size_t>(n) * n / 2);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b <= n; ++b) {
            const double c = cost(a, b);
            if (c < kInf) values.push_back(c);
        }
    if (values.empty()) return std::nullopt;
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    // Greedy max-extension gives the minimum part count under a cap; a
    // partition into exactly pp parts exists iff that count is <= pp.
    auto parts_needed = [&](double cap) -> int {
        int pos = 0, parts = 0;
        while (pos < n) {
            int reach = pos;
            for (int b = pos + 1; b <= n; ++b) {
                if (cost(pos, b) <= cap) reach = b;
                else break;
            }
            if (reach == pos) return n + 1;  // stuck
            pos = reach;
            ++parts;
        }
        return parts;
    };

    int lo = 0, hi = static_cast<int>(values.size()) - 1;
    if (parts_needed(values[hi]) > pp) return std::nullopt;
    while (lo < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (parts_needed(values[mid]) <= pp) hi = mid;
        else lo = mid + 1;
    }
    const double opt = values[lo];

    std::vector<int> suffix_parts(n + 1, 0);
    for (int i = n - 1; i >= 0; --i) {
        int reach = i;
        for (int b = i + 1; b <= n; ++b) {
            if (cost(i, b) <= opt) reach = b;
            else break;
        }
        suffix_parts[i] = reach == i ? n + 1 : 1 + suffix_parts[reach];
    }

    MinimaxResult result;
    result.value = opt;
    result.boundaries.push_back(0);
    int cur = 0;
    for (int k = 1; k <= pp; ++k) {
        const int remaining = pp - k;
        if (remaining == 0) {
            result.boundaries.push_back(n);
            break;
        }
        for (int b = cur + 1; b <= n - remaining; ++b) {
            if (cost(cur, b) <= opt && suffix_parts[b] <= remaining) {
                result.boundaries.push_back(b);
                cur = b;
                break;
            }
        }
    }
    if (static_cast<int>(result.boundaries.size()) != pp + 1) return std::nullopt;
    return result;
}

// --- Per-stage mode reconstruction ------------------------------------------

/// Two-state DP over one stage; ties prefer data_replicated. Returns the
/// modes and the stage cost (same accumulation order as the estimator).
std::pair<std::vector<LayerMode>, double> solve_stage(const LayerCostMenu& menu,
                                                      int a, int b) {
    const int len = b - a;
    std::vector<std::array<double, 2>> best(len, {kInf, kInf});
    std::vector<std::array<int, 2>> parent(len, {-1, -1});  // prior mode index
    auto idx = [](LayerMode m) { return m == LayerMode::data_replicated ? 0 : 1; };

    best[0][0] = menu.cost_dr[a];
    if (menu.shardable[a]) best[0][1] = menu.cost_tp[a];
    for (int i = 1; i < len; ++i) {
        const int l = a + i;
        for (LayerMode mode : {LayerMode::data_replicated, LayerMode::tensor_parallel}) {
            const double cost = menu_cost(menu, l, mode);
            if (cost == kInf) continue;
            const int s = idx(mode);
            for (int sp = 0; sp < 2; ++sp) {
                if (best[i - 1][sp] == kInf) continue;
                double t = best[i - 1][sp];
                if (sp != s) t += menu.conv[l];
                t += cost;
                if (t < best[i][s]) {
                    best[i][s] = t;
                    parent[i][s] = sp;
                }
            }
        }
    }
    int s = best[len - 1][0] <= best[len - 1][1] ? 0 : 1;
    const double total = best[len - 1][s];
    std::vector<LayerMode> modes(len, LayerMode::data_replicated);
    for (int i = len - 1; i >= 0; --i) {
        modes[i] = s == 0 ? LayerMode::data_replicated : LayerMode::tensor_parallel;
        if (i > 0) s = parent[i][s];
    }
    return {std::move(modes), total};
}

/// Pareto DP over one stage with a param-share predicate; picks the
/// fastest admissible point (ties: smaller share, then data_replicated
/// parents) and reconstructs its modes.
template <typename Fits>
std::optional<std::vector<LayerMode>> solve_stage_constrained(const LayerCostMenu& menu,
                                                              int a, int b, Fits fits) {
    struct Node {
        double t, params;
        int prev = -1;  // index into previous layer's node list
        LayerMode mode = LayerMode::data_replicated;
    };
    const int len = b - a;
    std::vector<std::vector<Node>> layers(len);
    layers[0].push_back({menu.cost_dr[a], menu.shard_dr[a], -1, LayerMode::data_replicated});
    if (menu.shardable[a])
        layers[0].push_back({menu.cost_tp[a], menu.shard_tp[a], -1, LayerMode::tensor_parallel});
    for (int i = 1; i < len; ++i) {
        const int l = a + i;
        std::vector<Node> next;
        for (int j = 0; j < static_cast<int>(layers[i - 1].size()); ++j) {
            const Node& p = layers[i - 1][j];
            for (LayerMode mode :
                 {LayerMode::data_replicated, LayerMode::tensor_parallel}) {
                const double cost = menu_cost(menu, l, mode);
                if (cost == kInf) continue;
                double t = p.t;
                if (mode != p.mode) t += menu.conv[l];
                t += cost;
                next.push_back({t, p.params + menu_shard(menu, l, mode), j, mode});
            }
        }
        // Pareto-prune per end mode; later conversion costs depend on it.
        std::sort(next.begin(), next.end(), [](const Node& x, const Node& y) {
            if (x.mode != y.mode) return x.mode < y.mode;
            if (x.t != y.t) return x.t < y.t;
            return x.params < y.params;
        });
        std::vector<Node> kept;
        LayerMode prune_mode = LayerMode::data_replicated;
        double best_params = kInf;
        for (const auto& node : next) {
            if (node.mode != prune_mode) {
                prune_mode = node.mode;
                best_params = kInf;
            }
            if (node.params < best_params) {
                kept.push_back(node);
                best_params = node.params;
            }
        }
        layers[i] = std::move(kept);
    }
    int pick = -1;
    for (int j = 0; j < static_cast<int>(layers[len - 1].size()); ++j) {
        const Node& node = layers[len - 1][j];
        if (!fits(node.params)) continue;
        if (pick < 0 || node.t < layers[len - 1][pick].t) pick = j;
    }
    if (pick < 0) return std::nullopt;
    std::vector<LayerMode> modes(len, LayerMode::data_replicated);
    for (int i = len - 1; i >= 0; --i) {
        modes[i] = layers[i][pick].mode;
        pick = layers[i][pick].prev;
    }
    return modes;
}

// --- Candidate assembly -------------------------------------------------------

double model_state_bytes_per_param_local(int zero_stage, int dp, int precision) {
    const double p = precision;
    switch (zero_stage) {
        case 0: return 2.0 * p + 12.0;
        case 1: return 2.0 * p + 12.0 / dp;
        case 2: return p + (p + 12.0) / dp;
        default: return (2.0 * p + 12.0) / dp;
    }
}

ParallelismConfig make_config(const DegreeTriple& triple, std::int64_t micro_batch,
                              std::int64_t global_batch, std::vector<int> boundaries,
                              std::vector<LayerMode> modes, int zero_stage) {
    ParallelismConfig config;
    config.dp = triple.dp;
    config.tp = triple.tp;
    config.pp = triple.pp;
    config.micro_batch_size = micro_batch;
    config.num_micro_batches = global_batch / (triple.dp * micro_batch);
    config.stage_boundaries = std::move(boundaries);
    config.layer_strategies = std::move(modes);
    config.zero_stage = zero_stage;
    return config;
}

struct BestTracker {
    bool has = false;
    ParallelismConfig config;
    IterationEstimate est;

    /// Lexicographic (total_s, pp, tp, dp, micro_batch); keeps the first
    /// offer on exact ties.
    void offer(const ParallelismConfig& c, const IterationEstimate& e) {
        if (!has) {
            has = true;
            config = c;
            est = e;
            return;
        }
        const auto key = [](const ParallelismConfig& cfg, const IterationEstimate& ie) {
            return std::make_tuple(ie.cost.total_s, cfg.pp, cfg.tp, cfg.dp,
                                   cfg.micro_batch_size);
        };
        if (key(c, e) < key(config, est)) {
            config = c;
            est = e;
        }
    }
};

std::vector<DegreeTriple> raw_power_of_two_triples(int total_gpus) {
    std::vector<DegreeTriple> triples;
    if (!is_power_of_two(total_gpus)) return triples;
    int exp = 0;
    while ((1 << exp) < total_gpus) ++exp;
    for (int edp = 0; edp <= exp; ++edp) {
        for (int etp = 0; etp + edp <= exp; ++etp) {
            const int epp = exp - edp - etp;
            triples.push_back({1 << edp, 1 << etp, 1 << epp});
        }
    }
    return triples;
}

}  // namespace

std::string DegreeTriple::to_string() const {
    std::ostringstream os;
    os << "dp=" << dp << ",tp=" << tp << ",pp=" << pp;
    return os.str();
}

std::vector<std::int64_t> micro_batch_menu(std::int64_t per_replica_batch) {
    std::vector<std::int64_t> menu;
    for (std::int64_t mb = 1; mb <= 64 && mb <= per_replica_batch; mb *= 2) {
        if (per_replica_batch % mb == 0) menu.push_back(mb);
    }
    return menu;
}

CandidateSet enumerate_degree_candidates(const HardwareProfile& hw,
                                         const ModelProfile& model,
                                         const JobSpec& job) {
    CandidateSet cs;
    cs.micro_batch_options = micro_batch_menu(job.global_batch_size);
    const int n = static_cast<int>(model.layers.size());

    std::map<std::string, int> prune_counts;
    for (const DegreeTriple& t : raw_power_of_two_triples(hw.total_gpus)) {
        std::string rule;
        if (t.tp > hw.gpus_per_node) {
            rule = "R1";
        } else if (t.pp > n) {
            rule = "R4";
        } else if (t.pp == 1 && model.total_params > 1'000'000'000 &&
                   hw.total_gpus > 1) {
            rule = "R3";
        } else if (job.global_batch_size % t.dp != 0) {
            rule = "R5";
        } else if (t.tp == 1 && t.pp == 1) {
            const double bpp = model_state_bytes_per_param_local(
                job.zero_stage_allowed, t.dp, job.precision_bytes);
            if (std::llround(bpp * static_cast<double>(model.total_params)) >
                hw.device_memory_bytes)
                rule = "R2";
        }
        if (rule.empty()) {
            cs.degree_triples.push_back(t);
        } else {
            cs.pruning_log.push_back({t, rule});
            ++prune_counts[rule];
        }
    }
    if (cs.degree_triples.empty()) {
        std::ostringstream os;
        os << "no feasible strategy: every degree triple pruned";
        if (!prune_counts.empty()) {
            os << " (";
            bool first = true;
            for (const auto& [rule, count] : prune_counts) {
                if (!first) os << ", ";
                os << rule << (rule == "R5" ? " no-feasible-micro-batch" : "") << ": "
                   << count;
                first = false;
            }
            os << ")";
        }
        throw PlanError(os.str());
    }
    return cs;
}

std::vector<int> partition_stages(std::span<const double> layer_costs, int pp) {
    const int n = static_cast<int>(layer_costs.size());
    if (pp < 1) throw SpecError("partition_stages: pp must be >= 1");
    if (pp > n) throw SpecError("partition_stages: pp exceeds layer count");

    // Range sums with left-to-right accumulation.
    std::vector<double> sums(static_cast<size_t>(n) * (n + 1), 0.0);
    for (int a = 0; a < n; ++a) {
        double t = 0.0;
        for (int b = a + 1; b <= n; ++b) {
            t += layer_costs[b - 1];
            sums[static_cast<size_t>(a) * (n + 1) + b] = t;
        }
    }
    auto cost = [&](int a, int b) { return sums[static_cast<size_t>(a) * (n + 1) + b]; };
    auto result = minimax_partition(n, pp, cost);
    if (!result) throw SpecError("partition_stages: no partition found");
    return result->boundaries;
}

StrategyDpResult strategy_dp(std::span<const double> cost_replicated,
                             std::span<const double> cost_tensor,
                             const std::vector<bool>& shardable,
                             std::span<const double> conv_cost,
                             std::span<const int> stage_boundaries, int tp) {
    const int n = static_cast<int>(cost_replicated.size());
    LayerCostMenu menu;
    menu.n = n;
    menu.tp = tp;
    menu.cost_dr.assign(cost_replicated.begin(), cost_replicated.end());
    menu.cost_tp.assign(n, kInf);
    menu.conv.assign(conv_cost.begin(), conv_cost.end());
    menu.shardable.assign(n, false);
    menu.shard_dr.assign(n, 0.0);
    menu.shard_tp.assign(n, 0.0);
    for (int l = 0; l < n; ++l) {
        if (tp > 1 && shardable[l]) {
            menu.shardable[l] = true;
            menu.cost_tp[l] = cost_tensor[l];
        }
    }
    StrategyDpResult result;
    result.modes.reserve(n);
    for (size_t k = 0; k + 1 < stage_boundaries.size(); ++k) {
        auto [modes, total] = solve_stage(menu, stage_boundaries[k],
                                          stage_boundaries[k + 1]);
        result.modes.insert(result.modes.end(), modes.begin(), modes.end());
        result.total_cost += total;
    }
    return result;
}

std::vector<LayerMode> assign_layer_strategies(const DegreeTriple& triple,
                                               std::span<const int> stage_boundaries,
                                               std::int64_t micro_batch,
                                               const HardwareProfile& hw,
                                               const ModelProfile& model,
                                               const DriftState* drift) {
    const LayerCostMenu menu = build_menu(triple, micro_batch, hw, model, drift);
    std::vector<LayerMode> modes;
    modes.reserve(menu.n);
    for (size_t k = 0; k + 1 < stage_boundaries.size(); ++k) {
        auto [stage_modes, total] =
            solve_stage(menu, stage_boundaries[k], stage_boundaries[k + 1]);
        modes.insert(modes.end(), stage_modes.begin(), stage_modes.end());
    }
    return modes;
}

std::optional<std::pair<ParallelismConfig, IterationEstimate>> build_candidate_config(
    const DegreeTriple& triple, std::int64_t micro_batch, const SearchInputs& in) {
    const int n = static_cast<int>(in.model.layers.size());
    const std::int64_t gb = in.job.global_batch_size;
    if (triple.pp > n) return std::nullopt;
    if (gb % (static_cast<std::int64_t>(triple.dp) * micro_batch) != 0)
        return std::nullopt;

    const LayerCostMenu menu = build_menu(triple, micro_batch, in.hw, in.model, in.drift);
    const RangeSolver solver(menu);
    const EstimateInputs est_in{in.hw, in.model, in.dataset, in.comm_plan,
                                in.job.precision_bytes, 0.0, in.drift};

    auto assemble = [&](const std::vector<int>& boundaries,
                        std::vector<LayerMode> modes, int zero)
        -> std::pair<ParallelismConfig, IterationEstimate> {
        ParallelismConfig config =
            make_config(triple, micro_batch, gb, boundaries, std::move(modes), zero);
        IterationEstimate est = estimate_iteration(config, est_in);
        return {std::move(config), std::move(est)};
    };

    // Unconstrained time optimum, then the smallest ZeRO stage it fits at.
    auto unconstrained =
        minimax_partition(n, triple.pp, [&](int a, int b) { return solver.min_time(a, b); });
    if (unconstrained) {
        std::vector<LayerMode> modes;
        for (int k = 0; k < triple.pp; ++k) {
            auto [stage_modes, total] = solve_stage(menu, unconstrained->boundaries[k],
                                                    unconstrained->boundaries[k + 1]);
            modes.insert(modes.end(), stage_modes.begin(), stage_modes.end());
        }
        ParallelismConfig config = make_config(triple, micro_batch, gb,
                                               unconstrained->boundaries, modes, 0);
        for (int zero = 0; zero <= in.job.zero_stage_allowed; ++zero) {
            config.zero_stage = zero;
            if (memory_footprint(config, in.model, in.job, in.hw).headroom_fraction >= 0.0) {
                IterationEstimate est = estimate_iteration(config, est_in);
                return std::make_pair(std::move(config), std::move(est));
            }
        }
    }

    // Memory-tight path: per ZeRO stage, minimax over memory-feasible
    // per-stage mode choices. Lower stages win cost ties.
    std::optional<std::tuple<double, int, std::vector<int>>> best;
    for (int zero = 0; zero <= in.job.zero_stage_allowed; ++zero) {
        const double bpp = model_state_bytes_per_param_local(zero, triple.dp,
                                                             in.job.precision_bytes);
        auto fits_range = [&](int a, int b, double params) {
            const std::int64_t act =
                micro_batch * solver.act_bytes(a, b) * triple.pp;
            return std::llround(bpp * params) + act <= in.hw.device_memory_bytes;
        };
        auto cost = [&](int a, int b) {
            return solver.min_time_where(
                a, b, [&](double params) { return fits_range(a, b, params); });
        };
        auto constrained = minimax_partition(n, triple.pp, cost);
        if (constrained && (!best || constrained->value < std::get<0>(*best)))
            best = {constrained->value, zero, constrained->boundaries};
    }
    if (!best) return std::nullopt;

    const auto& [value, zero, boundaries] = *best;
    const double bpp =
        model_state_bytes_per_param_local(zero, triple.dp, in.job.precision_bytes);
    std::vector<LayerMode> modes;
    for (int k = 0; k < triple.pp; ++k) {
        const int a = boundaries[k], b = boundaries[k + 1];
        auto stage_modes = solve_stage_constrained(menu, a, b, [&](double params) {
            const std::int64_t act = micro_batch * solver.act_bytes(a, b) * triple.pp;
            return std::llround(bpp * params) + act <= in.hw.device_memory_bytes;
        });
        if (!stage_modes) return std::nullopt;  // unreachable by construction
        modes.insert(modes.end(), stage_modes->begin(), stage_modes->end());
    }
    auto [config, est] = assemble(boundaries, std::move(modes), zero);
    if (memory_footprint(config, in.model, in.job, in.hw).headroom_fraction < 0.0)
        return std::nullopt;
    return std::make_pair(std::move(config), std::move(est));
}

SearchResult discover(const SearchInputs& in) {
    SearchResult result;
    result.candidates = enumerate_degree_candidates(in.hw, in.model, in.job);

    BestTracker best;
    for (const DegreeTriple& triple : result.candidates.degree_triples) {
        const std::int64_t per_replica = in.job.global_batch_size / triple.dp;
        for (std::int64_t mb : micro_batch_menu(per_replica)) {
            auto built = build_candidate_config(triple, mb, in);
            CandidateEvaluation eval;
            eval.triple = triple;
            eval.micro_batch = mb;
            if (built) {
                eval.feasible = true;
                eval.total_s = built->second.cost.total_s;
                ++result.evaluated_count;
                best.offer(built->first, built->second);
            }
            result.evaluations.push_back(eval);
        }
    }
    if (!best.has)
        throw PlanError("no feasible strategy: every candidate is memory-infeasible");
    result.best = best.config;
    result.best_cost = best.est;
    return result;
}

SearchResult exhaustive_plan(const SearchInputs& in) {
    const int n = static_cast<int>(in.model.layers.size());
    if (in.hw.total_gpus > kOracleMaxGpus || n > kOracleMaxLayers)
        throw PlanError("instance too large for oracle");

    SearchResult result;
    const std::int64_t gb = in.job.global_batch_size;
    const EstimateInputs est_in{in.hw, in.model, in.dataset, in.comm_plan,
                                in.job.precision_bytes, 0.0, in.drift};
    BestTracker best;

    for (const DegreeTriple& triple : raw_power_of_two_triples(in.hw.total_gpus)) {
        if (triple.tp > in.hw.gpus_per_node) {  // R1
            result.candidates.pruning_log.push_back({triple, "R1"});
            continue;
        }
        if (triple.pp > n) {  // R4
            result.candidates.pruning_log.push_back({triple, "R4"});
            continue;
        }
        result.candidates.degree_triples.push_back(triple);
        if (gb % triple.dp != 0) continue;

        for (std::int64_t mb : micro_batch_menu(gb / triple.dp)) {
            // Every contiguous cut, in lexicographic order.
            std::vector<int> cut(triple.pp + 1);
            cut.front() = 0;
            cut.back() = n;
            for (int k = 1; k < triple.pp; ++k) cut[k] = k;
            while (true) {
                // Every per-layer mode assignment.
                std::vector<LayerMode> modes(n, LayerMode::data_replicated);
                std::vector<int> eligible;
                if (triple.tp > 1) {
                    for (int l = 0; l < n; ++l)
                        if (in.model.layers[l].tp_shardable) eligible.push_back(l);
                }
                bool more_modes = true;
                while (more_modes) {
                    for (int zero = 0; zero <= in.job.zero_stage_allowed; ++zero) {
                        ParallelismConfig config =
                            make_config(triple, mb, gb, cut, modes, zero);
                        if (memory_footprint(config, in.model, in.job, in.hw)
                                .headroom_fraction < 0.0)
                            continue;
                        IterationEstimate est = estimate_iteration(config, est_in);
                        ++result.evaluated_count;
                        best.offer(config, est);
                    }
                    // Next assignment: binary counter over eligible layers.
                    more_modes = false;
                    for (int l : eligible) {
                        if (modes[l] == LayerMode::data_replicated) {
                            modes[l] = LayerMode::tensor_parallel;
                            more_modes = true;
                            break;
                        }
                        modes[l] = LayerMode::data_replicated;
                    }
                }
                // Next cut.
                int k = triple.pp - 1;
                while (k >= 1 && cut[k] == n - (triple.pp - k)) --k;
                if (k < 1) break;
                ++cut[k];
                for (int j = k + 1; j < triple.pp; ++j) cut[j] = cut[j - 1] + 1;
            }
        }
    }
    if (!best.has)
        throw PlanError("no feasible strategy: every candidate is memory-infeasible");
    result.best = best.config;
    result.best_cost = best.est;
    return result;
}

// Declared in specs.hpp; lives here because the cross-spec feasibility
// check is the planner's own feasibility scan, so anything validate
// accepts is plannable by construction.
std::vector<std::string> validate(const ClusterSpec& cluster, const ModelSpec& model,
                                  const JobSpec& job) {
    std::vector<std::string> violations;
    for (size_t i = 0; i < model.layers.size(); ++i) {
        try {
            layer_flops(model.layers[i]);
        } catch (const SpecError& e) {
            violations.push_back("layers[" + std::to_string(i) + "]: " + e.what());
        }
    }
    if (model.total_params() == 0)
        violations.push_back("empty model: total parameter count is 0");
    if (!violations.empty()) return violations;

    const HardwareProfile hw = profile_hardware(cluster);
    const ModelProfile profile = profile_model(model, job.precision_bytes);
    const DatasetProfile dataset = profile_dataset(job);
    const CommPlan plan = comm_optimize({});
    try {
        discover({hw, profile, dataset, job, plan, nullptr});
    } catch (const PlanError& e) {
        violations.push_back(e.what());
    }
    return violations;
}

}  // namespace strata
