// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors

#include "clgfilt/kalman.hpp"

#include <fmt/core.h>

#include "clgfilt/errors.hpp"

namespace clgfilt {

namespace {

void require_shape(bool ok, const char* what) {
    if (!ok) {
        throw DimensionMismatch(fmt::format("LinearStateSpace: inconsistent shape for {}", what));
    }
}

} // namespace

void validate(const LinearStateSpace& system) {
    const Eigen::Index d = system.F.rows();
    const Eigen::Index p = system.H.rows();
    require_shape(system.F.cols() == d, "F");
    require_shape(system.drift.size() == d, "drift");
    require_shape(system.cov_process.rows() == d && system.cov_process.cols() == d,
                  "cov_process");
    require_shape(system.H.cols() == d, "H");
    require_shape(system.offset.size() == p, "offset");
    require_shape(system.cov_meas.rows() == p && system.cov_meas.cols() == p, "cov_meas");
    require_shape(system.init.dim() == d, "init");
    const Eigen::LLT<Matrix> llt(symmetrize(system.cov_meas));
    if (llt.info() != Eigen::Success) {
        throw NonPositiveDefinite("LinearStateSpace: cov_meas is not positive definite");
    }
}

KalmanResult kalman_oracle(const LinearStateSpace& system,
                           const std::vector<Vector>& measurements) {
    validate(system);
    const Eigen::Index d = system.F.rows();
    const Matrix identity = Matrix::Identity(d, d);

    KalmanResult result;
    result.posteriors.reserve(measurements.size());
    result.priors.reserve(measurements.size());

    GaussianMoment prior = system.init;
    for (const Vector& y : measurements) {
        if (y.size() != system.H.rows()) {
            throw DimensionMismatch(fmt::format("kalman_oracle: measurement has dimension {} "
                                                "but H has {} rows",
                                                y.size(), system.H.rows()));
        }
        result.priors.push_back(prior);

        // Measurement update, Joseph form for a symmetric covariance result.
        const Matrix innovation_cov =
            symmetrize(system.H * prior.cov * system.H.transpose() + system.cov_meas);
        const Eigen::LLT<Matrix> llt(innovation_cov);
        if (llt.info() != Eigen::Success) {
            throw NonPositiveDefinite("kalman_oracle: innovation covariance is not positive "
                                      "definite");
        }
        const Matrix gain = llt.solve(system.H * prior.cov).transpose();
        const Vector residual = y - system.H * prior.mean - system.offset;
        const Matrix shrink = identity - gain * system.H;
        GaussianMoment posterior(prior.mean + gain * residual,
                                 shrink * prior.cov * shrink.transpose() +
                                     gain * system.cov_meas * gain.transpose());
        result.posteriors.push_back(posterior);

        // Time update.
        prior = affine_push(posterior, system.F, system.drift, system.cov_process);
    }
    return result;
}

} // namespace clgfilt
