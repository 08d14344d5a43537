// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors
//
// Textbook Kalman filter over an explicit linear-Gaussian state space. When a
// conditionally linear Gaussian model happens to be fully linear (constant
// coefficient callables, affine drifts), the joint filtering distribution is
// exactly Gaussian and this filter computes it; the particle filters are
// validated against it in the test suite.

#pragma once

#include <vector>

#include "clgfilt/gaussian.hpp"

namespace clgfilt {

/// x_{l+1} = F x_l + drift + w,  w ~ N(0, cov_process)
/// y_l     = H x_l + offset + e, e ~ N(0, cov_meas)
struct LinearStateSpace {
    Matrix F;
    Vector drift;
    Matrix cov_process;
    Matrix H;
    Vector offset;
    Matrix cov_meas;
    GaussianMoment init; ///< prior on x_1
};

/// Throws DimensionMismatch on inconsistent shapes, NonPositiveDefinite when
/// cov_meas is not positive definite (cov_process may be singular or zero).
void validate(const LinearStateSpace& system);

struct KalmanResult {
    /// posteriors[l-1] = p(x_l | y_1..y_l)
    std::vector<GaussianMoment> posteriors;
    /// priors[l-1] = p(x_l | y_1..y_{l-1}); priors[0] is the initial prior
    std::vector<GaussianMoment> priors;
};

/// Runs the filter over the whole measurement sequence. Measurement updates
/// use the Joseph-form covariance recursion for numerical symmetry.
KalmanResult kalman_oracle(const LinearStateSpace& system,
                           const std::vector<Vector>& measurements);

} // namespace clgfilt
