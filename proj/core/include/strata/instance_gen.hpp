// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded random small-instance generator for the search oracle and the
// fuzz suites. Instances stay inside the exhaustive-plan guard.

#pragma once

#include <cstdint>

#include "strata/specs.hpp"

namespace strata {

/// SplitMix64; deterministic across platforms.
struct Rng {
    std::uint64_t state = 0x9e3779b97f4a7c15ull;

    std::uint64_t next();
    /// Uniform in [0, 1).
    double next_double();
    /// Uniform integer in [lo, hi].
    std::int64_t next_int(std::int64_t lo, std::int64_t hi);
    /// Uniform over {lo, 2*lo, ...} powers of two in [lo, hi].
    std::int64_t next_pow2(std::int64_t lo, std::int64_t hi);
};

struct OracleInstance {
    ClusterSpec cluster;
    ModelSpec model;
    JobSpec job;
};

/// <= 8 GPUs, <= 6 layers, <= 4 micro-batch options, total params < 1e9;
/// memory tiers range from loose to infeasible so the constrained search
/// paths get exercised.
OracleInstance random_oracle_instance(Rng& rng);

}  // namespace strata
