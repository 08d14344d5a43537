// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors

#pragma once

#include <stdexcept>
#include <string>

namespace clgfilt {

/// Base class for all clgfilt errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Vector/matrix shapes do not agree with the declared dimensions.
class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

/// A covariance or precision matrix failed a positive-definiteness requirement
/// (after the documented PSD repair was attempted, where applicable).
class NonPositiveDefinite : public Error {
public:
    explicit NonPositiveDefinite(const std::string& what) : Error(what) {}
};

/// condense_mixture was called with no components.
class EmptyMixture : public Error {
public:
    explicit EmptyMixture(const std::string& what) : Error(what) {}
};

/// Every particle log-weight is -inf; the caller decides the fallback policy.
class AllWeightsZero : public Error {
public:
    explicit AllWeightsZero(const std::string& what) : Error(what) {}
};

/// Simulation or filtering produced a non-finite value (model misconfiguration).
class NonFiniteValue : public Error {
public:
    explicit NonFiniteValue(const std::string& what) : Error(what) {}
};

/// Invalid configuration value or unknown configuration key; the message names
/// the offending key.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

} // namespace clgfilt
