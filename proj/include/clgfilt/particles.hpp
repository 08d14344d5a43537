// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "clgfilt/gaussian.hpp"
#include "clgfilt/rng.hpp"

namespace clgfilt {

/// Weighted particle set over the nonlinear substate. Weights are kept in the
/// log domain throughout; normalize() is the only place the linear-domain sum
/// is formed.
struct ParticleCloud {
    std::vector<Vector> particles;
    std::vector<double> log_weights;

    std::size_t size() const { return particles.size(); }
};

enum class ResampleScheme { Systematic, Multinomial };

/// Record of one resampling pass. The ancestor indices let callers reorder
/// any per-particle side structures (Gaussian message banks) consistently.
struct ResamplePlan {
    ResampleScheme scheme = ResampleScheme::Systematic;
    std::vector<std::size_t> ancestor_indices;
};

/// Shifts log-weights so they sum to one in the linear domain; returns the
/// pre-normalization log-sum. Throws AllWeightsZero when no weight is finite
/// and EmptyMixture on an empty cloud.
double normalize(ParticleCloud& cloud);

/// Effective sample size 1/sum(w_j^2) on normalized weights; in [1, N_p].
double ess(const ParticleCloud& cloud);

/// Draws N_p ancestors with replacement per the scheme and returns the
/// resampled cloud (uniform log-weights) together with the plan.
/// Draw budget: systematic consumes exactly one uniform, multinomial exactly
/// N_p uniforms. Positions that tie a cumulative-weight boundary resolve to
/// the lower index.
std::pair<ParticleCloud, ResamplePlan> resample(const ParticleCloud& cloud,
                                                ResampleScheme scheme, RandomStream& rng);

/// Equal-weight average (1/N_p) sum x_j; ignores the weights by design.
Vector center_of_mass(const ParticleCloud& cloud);

/// Weighted average sum w_j x_j on normalized weights.
Vector weighted_mean(const ParticleCloud& cloud);

/// cov + amount * I.
Matrix jitter(const Matrix& cov, double amount);

/// Default jittering level when the configuration does not pin one:
/// 1e-6 * trace(cov) / d.
double default_jitter_amount(const Matrix& cov);

} // namespace clgfilt
