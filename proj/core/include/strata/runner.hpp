// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end run loop: monitor -> analyze -> adjust until target steps.

#pragma once

#include <optional>

#include "strata/selector.hpp"
#include "strata/sim.hpp"

namespace strata {

enum class Policy { static_plan, adaptive };

struct RunInputs {
    const HardwareProfile& hw;
    const ModelProfile& model;
    const DatasetProfile& dataset;
    const JobSpec& job;
    const CommPlan& comm_plan;
    Policy policy = Policy::static_plan;
    SimOptions options;
};

/// Simulates a full run from the given initial config. Adaptive policy
/// feeds every snapshot to the selector and applies transitions at step
/// safe points; job.adaptation_enabled == false forces static behavior.
Trace run(const ParallelismConfig& initial, const RunInputs& in);

}  // namespace strata
