// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace refinery {

/// Runs the command-line interface. Exit codes are a stable contract:
/// 0 = refines / success, 1 = usage or parse error, 2 = refinement error,
/// 3 = refines but the certificate misses an expected mapping.
int run_cli(const std::vector<std::string>& args);

} // namespace refinery
