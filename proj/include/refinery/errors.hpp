// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace refinery {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed serialized document (bad JSON, missing keys, wrong value kinds).
struct SchemaError : Error {
    using Error::Error;
};

// Structurally invalid graph or relation (dangling ids, duplicate producers,
// attr schema violations).
struct ValidationError : Error {
    using Error::Error;
};

struct CycleError : Error {
    explicit CycleError(std::string msg, std::vector<std::string> cycle_nodes)
        : Error(std::move(msg)), cycle(std::move(cycle_nodes)) {}
    std::vector<std::string> cycle;
};

struct ShapeError : Error {
    using Error::Error;
};

struct SolverError : Error {
    using Error::Error;
};

struct LemmaValidationError : Error {
    using Error::Error;
};

struct DuplicateName : Error {
    using Error::Error;
};

struct EvalError : Error {
    using Error::Error;
};

struct SpecError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct CertificateInvalid : Error {
    using Error::Error;
};

} // namespace refinery
