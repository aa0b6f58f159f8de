// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace switchkit {

// Dispatches one CLI invocation. JSON summaries go to `out`, logs and the
// resolved config go to `err`. Exit codes: 0 success, 1 usage error,
// 2 data/validation error, 3 numeric failure.
int run_cli(const std::vector<std::string> & args, std::ostream & out, std::ostream & err);

} // namespace switchkit
