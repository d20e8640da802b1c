// Copyright (c) 2026 Strata Authors
// SPDX-License-Identifier: Apache-2.0
//
// Error types shared across the library.

#pragma once

#include <stdexcept>
#include <string>

namespace strata {

/// Malformed or invalid input document (cluster/model/job/plan file).
/// The message names the offending field or the parse position.
class SpecError : public std::runtime_error {
public:
    explicit SpecError(const std::string& what) : std::runtime_error(what) {}
};

/// Planning failed: no feasible strategy, or an instance exceeds the
/// exhaustive oracle's guard.
class PlanError : public std::runtime_error {
public:
    explicit PlanError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace strata
