// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace clgfilt {

/// splitmix64 mixing step; used to derive independent seeds from a base seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a child seed from a base seed and up to three stream labels.
///
/// The scheme is splittable: child streams are stable under adding more labels
/// later (adding runs never perturbs the seeds of earlier runs).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = splitmix64(base ^ splitmix64(a));
    s = splitmix64(s ^ splitmix64(b + 0x517cc1b727220a95ULL));
    s = splitmix64(s ^ splitmix64(c + 0x2545f4914f6cdd1dULL));
    return s;
}

/// Deterministic random stream with a documented draw-consumption contract.
///
/// - uniform() consumes exactly one engine output and returns a double in [0,1)
///   built from the top 53 bits.
/// - normal() consumes exactly two engine outputs (plain Box-Muller transform,
///   no caching of the second variate), so the mapping from "number of normal
///   draws" to engine state is fixed. This keeps cross-filter bit-equivalence
///   properties testable; std::normal_distribution gives no such guarantee.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1); one engine draw.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Standard normal double; exactly two engine draws.
    double normal() {
        // u1 in (0, 1] avoids log(0); u2 in [0, 1).
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace clgfilt
