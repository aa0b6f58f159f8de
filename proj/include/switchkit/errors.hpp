// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace switchkit {

// Base of all errors raised by this library.
struct error : std::runtime_error {
    explicit error(const std::string & msg) : std::runtime_error(msg) {}
};

// Bad input data: malformed files, validation failures, contract violations
// on caller-supplied values. Maps to CLI exit code 2.
struct data_error : error {
    explicit data_error(const std::string & msg) : error(msg) {}
};

// Numeric failure during computation: non-finite results, failed SVD
// convergence. Maps to CLI exit code 3.
struct numeric_error : error {
    explicit numeric_error(const std::string & msg) : error(msg) {}
};

} // namespace switchkit
