// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors

#pragma once

#include <cstdint>

namespace clgfilt {

/// Instrumentation counters for the machine-independent complexity checks.
///
/// Accounting rules (relied on by the benchmark harness assertions):
///  - cholesky_count counts factorizations performed in order to *sample* from a
///    Gaussian: one per SamplingFactor construction / sample() call. This mirrors
///    the cost of generating a new particle set, where the full filter pays one
///    factorization per particle and the simplified variants pay one per step.
///  - inversion_count counts materialized symmetric matrix inversions:
///    to_canonical, to_moment and spd_inverse.
///  - log-density evaluations factor-and-solve internally without materializing
///    an inverse and increment neither counter.
///
/// Counters are plain value state passed by pointer; a null handle disables
/// counting. No global or thread-shared counter state exists.
struct OpCounters {
    std::int64_t cholesky_count = 0;
    std::int64_t inversion_count = 0;

    OpCounters& operator+=(const OpCounters& other) {
        cholesky_count += other.cholesky_count;
        inversion_count += other.inversion_count;
        return *this;
    }
};

inline void count_cholesky(OpCounters* counters) {
    if (counters != nullptr) ++counters->cholesky_count;
}

inline void count_inversion(OpCounters* counters) {
    if (counters != nullptr) ++counters->inversion_count;
}

} // namespace clgfilt
