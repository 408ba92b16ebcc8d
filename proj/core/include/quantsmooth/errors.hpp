// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace quantsmooth {

// Shape/rank violations. CLI maps these to exit code 2 (bad data).
class DimError : public std::runtime_error {
public:
    explicit DimError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values, zero variance, accumulator overflow. Exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// File format / filesystem problems. Exit code 2.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad flags, bad config keys. Exit code 1.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace quantsmooth
