// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors

#include "clgfilt/particles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "clgfilt/errors.hpp"

namespace clgfilt {

namespace {

void require_nonempty(const ParticleCloud& cloud, const char* what) {
    if (cloud.particles.empty()) throw EmptyMixture(fmt::format("{}: empty cloud", what));
    if (cloud.particles.size() != cloud.log_weights.size()) {
        throw DimensionMismatch(fmt::format("{}: {} particles vs {} log-weights", what,
                                            cloud.particles.size(), cloud.log_weights.size()));
    }
}

/// Cumulative linear-domain weights with the final entry forced to 1 so the
/// largest stratum position cannot fall past the end.
std::vector<double> cumulative_weights(const ParticleCloud& cloud, const char* what) {
    require_nonempty(cloud, what);
    std::vector<double> cum(cloud.log_weights.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < cum.size(); ++j) {
        acc += std::exp(cloud.log_weights[j]);
        cum[j] = acc;
    }
    if (!(acc > 0.0) || !std::isfinite(acc)) {
        throw AllWeightsZero(fmt::format("{}: weight sum {}", what, acc));
    }
    cum.back() = 1.0;
    return cum;
}

std::size_t ancestor_at(const std::vector<double>& cum, double position) {
    // lower_bound = first boundary >= position: a position that exactly ties a
    // boundary resolves to the lower particle index.
    const auto it = std::lower_bound(cum.begin(), cum.end(), position);
    return static_cast<std::size_t>(std::distance(cum.begin(), it));
}

} // namespace

double normalize(ParticleCloud& cloud) {
    require_nonempty(cloud, "normalize");
    double max_lw = -std::numeric_limits<double>::infinity();
    for (double lw : cloud.log_weights) max_lw = std::max(max_lw, lw);
    if (!std::isfinite(max_lw)) throw AllWeightsZero("normalize: all log-weights are -inf");
    double sum = 0.0;
    for (double lw : cloud.log_weights) sum += std::exp(lw - max_lw);
    const double total = max_lw + std::log(sum);
    for (double& lw : cloud.log_weights) lw -= total;
    return total;
}

double ess(const ParticleCloud& cloud) {
    require_nonempty(cloud, "ess");
    double sum_sq = 0.0;
    for (double lw : cloud.log_weights) {
        const double w = std::exp(lw);
        sum_sq += w * w;
    }
    if (!(sum_sq > 0.0)) throw AllWeightsZero("ess: all weights zero");
    return 1.0 / sum_sq;
}

std::pair<ParticleCloud, ResamplePlan> resample(const ParticleCloud& cloud,
                                                ResampleScheme scheme, RandomStream& rng) {
    const std::vector<double> cum = cumulative_weights(cloud, "resample");
    const std::size_t n = cloud.particles.size();

    ResamplePlan plan;
    plan.scheme = scheme;
    plan.ancestor_indices.resize(n);
    switch (scheme) {
    case ResampleScheme::Systematic: {
        const double u = rng.uniform();
        for (std::size_t k = 0; k < n; ++k) {
            const double position = (static_cast<double>(k) + u) / static_cast<double>(n);
            plan.ancestor_indices[k] = ancestor_at(cum, position);
        }
        break;
    }
    case ResampleScheme::Multinomial: {
        for (std::size_t k = 0; k < n; ++k) {
            plan.ancestor_indices[k] = ancestor_at(cum, rng.uniform());
        }
        break;
    }
    }

    ParticleCloud out;
    out.particles.reserve(n);
    const double uniform_lw = -std::log(static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k) {
        out.particles.push_back(cloud.particles[plan.ancestor_indices[k]]);
    }
    out.log_weights.assign(n, uniform_lw);
    return {std::move(out), std::move(plan)};
}

Vector center_of_mass(const ParticleCloud& cloud) {
    require_nonempty(cloud, "center_of_mass");
    Vector acc = Vector::Zero(cloud.particles.front().size());
    for (const auto& p : cloud.particles) acc += p;
    return acc / static_cast<double>(cloud.particles.size());
}

Vector weighted_mean(const ParticleCloud& cloud) {
    require_nonempty(cloud, "weighted_mean");
    Vector acc = Vector::Zero(cloud.particles.front().size());
    for (std::size_t j = 0; j < cloud.particles.size(); ++j) {
        acc += std::exp(cloud.log_weights[j]) * cloud.particles[j];
    }
    return acc;
}

Matrix jitter(const Matrix& cov, double amount) {
    if (amount == 0.0) return cov;
    return cov + amount * Matrix::Identity(cov.rows(), cov.cols());
}

double default_jitter_amount(const Matrix& cov) {
    return 1e-6 * cov.trace() / static_cast<double>(cov.rows());
}

} // namespace clgfilt
