// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors

#include "clgfilt/gaussian.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "clgfilt/errors.hpp"

namespace clgfilt {

namespace {

void require_square(const Matrix& m, const char* what) {
    if (m.rows() != m.cols()) {
        throw DimensionMismatch(
            fmt::format("{}: matrix is {}x{}, expected square", what, m.rows(), m.cols()));
    }
}

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b) {
        throw DimensionMismatch(fmt::format("{}: dimensions {} vs {}", what, a, b));
    }
}

} // namespace

GaussianMoment::GaussianMoment(Vector mean_in, Matrix cov_in)
    : mean(std::move(mean_in)), cov(std::move(cov_in)) {
    require_square(cov, "GaussianMoment");
    require_same_dim(mean.size(), cov.rows(), "GaussianMoment mean/cov");
    cov = symmetrize(cov);
}

GaussianCanonical::GaussianCanonical(Vector xi_in, Matrix prec_in)
    : xi(std::move(xi_in)), prec(std::move(prec_in)) {
    require_square(prec, "GaussianCanonical");
    require_same_dim(xi.size(), prec.rows(), "GaussianCanonical xi/prec");
    prec = symmetrize(prec);
}

Matrix symmetrize(const Matrix& m) { return (m + m.transpose()) / 2.0; }

Matrix psd_repair(const Matrix& cov) {
    const Matrix s = symmetrize(cov);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    const double lambda_min = es.eigenvalues().minCoeff();
    if (lambda_min > 0.0) return s;
    const double trace = s.trace();
    if (lambda_min >= -1e-10 * trace) {
        // Small roundoff drift: lift the spectrum so the smallest eigenvalue
        // sits at +1e-12 * trace.
        return s + (1e-12 * trace - lambda_min) * Matrix::Identity(s.rows(), s.cols());
    }
    throw NonPositiveDefinite(
        fmt::format("psd_repair: smallest eigenvalue {} below repair window "
                    "(trace {})",
                    lambda_min, trace));
}

Matrix psd_project(const Matrix& cov) {
    const Matrix s = symmetrize(cov);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    const Vector eig = es.eigenvalues();
    if (eig.minCoeff() >= 0.0) return s;
    const double floor = 1e-12 * std::max(std::abs(s.trace()), 1e-300);
    Vector clamped = eig;
    for (Eigen::Index i = 0; i < clamped.size(); ++i) {
        if (clamped[i] < floor) clamped[i] = floor;
    }
    return symmetrize(es.eigenvectors() * clamped.asDiagonal() *
                      es.eigenvectors().transpose());
}

Matrix spd_inverse(const Matrix& m, OpCounters* counters) {
    require_square(m, "spd_inverse");
    const Eigen::LLT<Matrix> llt(symmetrize(m));
    if (llt.info() != Eigen::Success) {
        throw NonPositiveDefinite("spd_inverse: Cholesky factorization failed");
    }
    count_inversion(counters);
    return symmetrize(llt.solve(Matrix::Identity(m.rows(), m.cols())));
}

GaussianCanonical to_canonical(const GaussianMoment& g, OpCounters* counters) {
    const Matrix prec = spd_inverse(g.cov, counters);
    return GaussianCanonical{prec * g.mean, prec};
}

GaussianMoment to_moment(const GaussianCanonical& c, OpCounters* counters) {
    // cov-then-multiply (rather than a direct solve for the mean) so that
    // shared-matrix and per-particle code paths perform identical arithmetic.
    const Matrix cov = spd_inverse(c.prec, counters);
    return GaussianMoment{cov * c.xi, cov};
}

GaussianCanonical product_canonical(const GaussianCanonical& a, const GaussianCanonical& b) {
    require_same_dim(a.dim(), b.dim(), "product_canonical");
    return GaussianCanonical{a.xi + b.xi, a.prec + b.prec};
}

GaussianMoment affine_push(const GaussianMoment& g, const Matrix& A, const Vector& b,
                           const Matrix& Q) {
    require_same_dim(A.cols(), g.dim(), "affine_push A columns");
    require_same_dim(A.rows(), b.size(), "affine_push A rows vs b");
    require_square(Q, "affine_push Q");
    require_same_dim(Q.rows(), A.rows(), "affine_push Q vs A rows");
    return GaussianMoment{A * g.mean + b, symmetrize(A * g.cov * A.transpose() + Q)};
}

GaussianMoment condense_mixture(const GaussianMixture& m) {
    if (m.components.empty()) throw EmptyMixture("condense_mixture: no components");
    require_same_dim(static_cast<Eigen::Index>(m.weights.size()),
                     static_cast<Eigen::Index>(m.components.size()),
                     "condense_mixture weights vs components");
    const Eigen::Index d = m.components.front().dim();
    Vector mean = Vector::Zero(d);
    Matrix cov_acc = Matrix::Zero(d, d);
    Matrix scatter = Matrix::Zero(d, d);
    for (std::size_t j = 0; j < m.components.size(); ++j) {
        const auto& c = m.components[j];
        require_same_dim(c.dim(), d, "condense_mixture component dimension");
        const double w = m.weights[j];
        mean += w * c.mean;
        cov_acc += w * c.cov;
        scatter += w * (c.mean * c.mean.transpose());
    }
    // Grouping the two outer-product terms first makes the correction vanish
    // exactly for a single-component mixture, so condensation is then the
    // bit-level identity.
    const Matrix cov = cov_acc + (scatter - mean * mean.transpose());
    return GaussianMoment{mean, psd_repair(cov)};
}

double log_correlation(const GaussianMoment& a, const GaussianMoment& b,
                       CorrelationConstant constant) {
    require_same_dim(a.dim(), b.dim(), "correlation");
    const auto d = static_cast<double>(a.dim());
    const Matrix sum_cov = symmetrize(a.cov + b.cov);
    const Eigen::LLT<Matrix> llt(sum_cov);
    if (llt.info() != Eigen::Success) {
        throw NonPositiveDefinite("correlation: C_a + C_b not positive definite");
    }
    const Vector r = a.mean - b.mean;
    const Vector y = llt.matrixL().solve(r);
    const double quad = y.squaredNorm();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < sum_cov.rows(); ++i) {
        log_det += 2.0 * std::log(llt.matrixL()(i, i));
    }
    const double log_2pi = std::log(2.0 * std::numbers::pi);
    switch (constant) {
    case CorrelationConstant::PaperLiteral:
        // Published closed form carries the determinant inside the d/2 power;
        // coincides with Standard only for d = 1.
        return -0.5 * d * (log_2pi + log_det) - 0.5 * quad;
    case CorrelationConstant::Standard:
    default:
        return -0.5 * (d * log_2pi + log_det) - 0.5 * quad;
    }
}

double correlation(const GaussianMoment& a, const GaussianMoment& b,
                   CorrelationConstant constant) {
    return std::exp(log_correlation(a, b, constant));
}

SamplingFactor::SamplingFactor(const Matrix& cov, OpCounters* counters) {
    require_square(cov, "SamplingFactor");
    if (cov.isZero(0.0)) {
        degenerate_ = true;
        l_ = Matrix::Zero(cov.rows(), cov.cols());
        return;
    }
    const Eigen::LLT<Matrix> llt(symmetrize(cov));
    if (llt.info() != Eigen::Success) {
        throw NonPositiveDefinite("SamplingFactor: covariance not positive definite");
    }
    count_cholesky(counters);
    l_ = llt.matrixL();
}

Vector SamplingFactor::draw(const Vector& mean, RandomStream& rng) const {
    require_same_dim(mean.size(), l_.rows(), "SamplingFactor::draw");
    if (degenerate_) return mean;
    Vector z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return mean + l_ * z;
}

Vector sample(const GaussianMoment& g, RandomStream& rng, OpCounters* counters) {
    return SamplingFactor(g.cov, counters).draw(g.mean, rng);
}

PreparedLogDensity::PreparedLogDensity(const GaussianMoment& g)
    : mean_(g.mean), llt_(g.cov) {
    if (llt_.info() != Eigen::Success) {
        throw NonPositiveDefinite("PreparedLogDensity: covariance not positive definite");
    }
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < g.cov.rows(); ++i) {
        log_det += 2.0 * std::log(llt_.matrixL()(i, i));
    }
    log_norm_constant_ =
        -0.5 * (static_cast<double>(g.dim()) * std::log(2.0 * std::numbers::pi) + log_det);
}

double PreparedLogDensity::operator()(const Vector& x, bool drop_det) const {
    require_same_dim(x.size(), mean_.size(), "PreparedLogDensity");
    const Vector y = llt_.matrixL().solve(x - mean_);
    const double quad = y.squaredNorm();
    return drop_det ? -0.5 * quad : log_norm_constant_ - 0.5 * quad;
}

double log_density(const GaussianMoment& g, const Vector& x, bool drop_det) {
    return PreparedLogDensity(g)(x, drop_det);
}

} // namespace clgfilt
