// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "clgfilt/op_counters.hpp"
#include "clgfilt/rng.hpp"

namespace clgfilt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Gaussian belief in moment form: mean and covariance.
///
/// The covariance is symmetrized on construction; operations that factorize or
/// invert it additionally require positive definiteness.
struct GaussianMoment {
    Vector mean;
    Matrix cov;

    GaussianMoment() = default;
    GaussianMoment(Vector mean_in, Matrix cov_in);

    Eigen::Index dim() const { return mean.size(); }
};

/// Gaussian belief in canonical (information) form: precision matrix and
/// transformed mean xi = prec * mean. Products of beliefs become additions.
struct GaussianCanonical {
    Vector xi;
    Matrix prec;

    GaussianCanonical() = default;
    GaussianCanonical(Vector xi_in, Matrix prec_in);

    Eigen::Index dim() const { return xi.size(); }
};

/// Weighted Gaussian mixture with normalized nonnegative weights.
struct GaussianMixture {
    std::vector<GaussianMoment> components;
    std::vector<double> weights;
};

/// Which normalization constant the correlation integral uses. Standard is the
/// exact Gaussian-product identity (validated by quadrature in the tests);
/// PaperLiteral reproduces a published closed form whose determinant exponent
/// is dimensionally off for d > 1, kept selectable for comparison runs.
enum class CorrelationConstant { Standard, PaperLiteral };

/// Returns (m + m^T) / 2.
Matrix symmetrize(const Matrix& m);

/// Symmetrizes and repairs a computed covariance whose smallest eigenvalue has
/// drifted slightly negative: an eigenvalue in (-1e-10 * trace, 0] is lifted by
/// a diagonal shift to +1e-12 * trace; anything below that window throws
/// NonPositiveDefinite. Positive-definite inputs pass through bit-unchanged.
Matrix psd_repair(const Matrix& cov);

/// Projects a symmetric matrix onto the PSD cone by clamping negative
/// eigenvalues to a small positive floor (1e-12 * max(|trace|, 1e-300)).
/// Unlike psd_repair this never throws; it exists for quantities that are
/// structurally indefinite in transients (the z^(N) belief covariance) where
/// an approximation, not a failure, is the intended behavior. PSD inputs pass
/// through bit-unchanged.
Matrix psd_project(const Matrix& cov);

/// Symmetric positive-definite inverse via Cholesky factorization.
/// Increments inversion_count. Throws NonPositiveDefinite.
Matrix spd_inverse(const Matrix& m, OpCounters* counters = nullptr);

/// Moment form -> canonical form: prec = cov^-1, xi = prec * mean.
/// Increments inversion_count once. Throws NonPositiveDefinite.
GaussianCanonical to_canonical(const GaussianMoment& g, OpCounters* counters = nullptr);

/// Canonical form -> moment form: cov = prec^-1, mean = cov * xi.
/// Increments inversion_count once. Throws NonPositiveDefinite.
GaussianMoment to_moment(const GaussianCanonical& c, OpCounters* counters = nullptr);

/// Product of two canonical-form beliefs (normalization constant dropped):
/// precisions and transformed means add. Throws DimensionMismatch.
GaussianCanonical product_canonical(const GaussianCanonical& a, const GaussianCanonical& b);

/// Pushforward of g through the affine-Gaussian map x -> A x + b + w with
/// w ~ N(0, Q): mean' = A mean + b, cov' = A cov A^T + Q (symmetrized).
GaussianMoment affine_push(const GaussianMoment& g, const Matrix& A, const Vector& b,
                           const Matrix& Q);

/// Moment-matched single Gaussian of a mixture:
/// mean = sum_j w_j eta_j; cov = sum_j w_j C_j - eta eta^T + sum_j w_j eta_j eta_j^T,
/// symmetrized and PSD-repaired. Throws EmptyMixture / DimensionMismatch.
GaussianMoment condense_mixture(const GaussianMixture& m);

/// log of the correlation integral log( integral f_a(y) f_b(y) dy ), evaluated
/// in closed form as the log-density of N(eta_a; eta_b, C_a + C_b) (Standard)
/// or with the paper-literal constant (see CorrelationConstant).
double log_correlation(const GaussianMoment& a, const GaussianMoment& b,
                       CorrelationConstant constant = CorrelationConstant::Standard);

/// Correlation integral of two Gaussian densities (linear domain).
double correlation(const GaussianMoment& a, const GaussianMoment& b,
                   CorrelationConstant constant = CorrelationConstant::Standard);

/// Reusable lower-triangular Cholesky factor of a covariance, for drawing many
/// samples that share one covariance. Construction increments cholesky_count.
class SamplingFactor {
public:
    /// Factorizes cov = L L^T. A zero covariance is permitted via a degenerate
    /// path (draws return the mean and consume no randomness).
    /// Throws NonPositiveDefinite otherwise when the factorization fails.
    explicit SamplingFactor(const Matrix& cov, OpCounters* counters = nullptr);

    /// mean + L z with z i.i.d. standard normal; consumes dim normal draws
    /// (zero draws on the degenerate zero-covariance path).
    Vector draw(const Vector& mean, RandomStream& rng) const;

    bool degenerate() const { return degenerate_; }
    const Matrix& matrix_l() const { return l_; }

private:
    Matrix l_;
    bool degenerate_ = false;
};

/// One sample of g: mean + L z. Increments cholesky_count once per call.
Vector sample(const GaussianMoment& g, RandomStream& rng, OpCounters* counters = nullptr);

/// Reusable log-density evaluator that factorizes the covariance once.
/// Density evaluation is factor-and-solve; it increments no counters.
class PreparedLogDensity {
public:
    explicit PreparedLogDensity(const GaussianMoment& g);

    /// log N(x; mean, cov). With drop_det the log-determinant and 2*pi
    /// constants are omitted, leaving -(1/2) (x-mean)^T cov^-1 (x-mean).
    double operator()(const Vector& x, bool drop_det = false) const;

private:
    Vector mean_;
    Eigen::LLT<Matrix> llt_;
    double log_norm_constant_ = 0.0; // -(1/2) (d log 2pi + log det cov)
};

/// log N(x; g.mean, g.cov); see PreparedLogDensity for the drop_det semantics.
double log_density(const GaussianMoment& g, const Vector& x, bool drop_det = false);

} // namespace clgfilt
