// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors
//
// Particle filter recursions for conditionally linear Gaussian models:
//   - marginalized particle filtering (MPF): one Kalman-style Gaussian belief
//     per particle for the linear substate, importance weights and sampling
//     for the nonlinear substate;
//   - simplified MPF (SMPF, variants 1 and 2): the per-particle Gaussian work
//     is condensed into shared quantities so each recursion performs exactly
//     one Cholesky factorization and O(1) matrix inversions;
//   - turbo filtering (TF): an iterative extension that feeds the refined
//     linear-substate beliefs back into the particle weights within each
//     recursion via an extrinsic correlation factor.
//
// Determinism contract: all randomness flows through an explicit RandomStream;
// per recursion (and per TF iteration) the draw order is: resampling draw(s)
// first, then per-particle prediction draws in index order. Under this
// contract two cross-filter equivalences hold bit-for-bit and are tested:
// SMPF#1 with one particle matches MPF with one particle, and TF with one
// iteration matches MPF with resampling disabled.

#pragma once

#include <cstdint>
#include <vector>

#include "clgfilt/gaussian.hpp"
#include "clgfilt/model.hpp"
#include "clgfilt/op_counters.hpp"
#include "clgfilt/particles.hpp"
#include "clgfilt/rng.hpp"

namespace clgfilt {

enum class FilterKind { Mpf, Smpf1, Smpf2, Tf };

struct FilterConfig {
    int n_particles = 100;
    int n_iterations = 1; ///< TF refinement passes per recursion (>= 1)
    ResampleScheme resample_scheme = ResampleScheme::Systematic;
    /// Diagonal inflation added to the nonlinear-prediction covariance before
    /// sampling; negative means the automatic rule 1e-6 * trace / d.
    double jitter_amount = -1.0;
    /// Drop the per-particle determinant factor from the measurement weights.
    bool drop_det_in_weights = true;
    /// Drop the determinant factor from the TF extrinsic weights.
    bool drop_D3_factor = true;
    std::uint64_t seed = 0;
    /// Which SMPF variant smpf_step runs: 1 keeps per-particle prior
    /// covariances, 2 carries one shared prior covariance across the bank.
    int smpf_case = 1;
    /// Diagnostic switch: disable the per-recursion resampling pass so the
    /// TF one-iteration equivalence is testable. Production runs keep it on.
    bool resample_enabled = true;
    /// Record per-particle log-weight decompositions in FilterOutput.
    bool record_decompositions = false;
    /// Normalization constant used by the TF extrinsic correlation when its
    /// determinant factor is kept (see CorrelationConstant).
    CorrelationConstant correlation_constant = CorrelationConstant::Standard;
};

/// Throws ConfigError on out-of-range values.
void validate(const FilterConfig& config);

/// One Gaussian belief kept in both parameterizations: canonical for additive
/// observation updates, moment for prediction and sampling.
struct LinearBelief {
    GaussianCanonical canonical;
    GaussianMoment moment;
};

/// Per-particle Gaussian beliefs over the linear substate, index-aligned with
/// a ParticleCloud.
using MpfBank = std::vector<GaussianMoment>;

/// Filter state carried between recursions: the predicted particle set
/// S_{l/(l-1)} and the per-particle linear-substate priors.
struct MpfState {
    ParticleCloud cloud;
    MpfBank bank;
};

/// Additive split of one particle's log-weight: carried-in weight, real
/// measurement factor, and (TF only) pseudo-measurement extrinsic factor.
/// l_total is defined as the sum of the three parts; the identity is exact.
struct WeightDecomposition {
    int iteration = 1;
    double l_apriori = 0.0;
    double l_measurement = 0.0;
    double l_pseudo = 0.0;
    double l_total = 0.0;
};

/// Per-recursion results reported by each step function.
struct StepEstimates {
    Vector linear;            ///< estimate of x^L at the processed step
    Vector nonlinear;         ///< estimate of x^N at the processed step
    double ess = 0.0;         ///< effective sample size of the estimate weights
    double log_total_weight = 0.0; ///< pre-normalization log weight sum
    bool weight_reset = false;     ///< all weights underflowed; reset to uniform
};

struct FilterOutput {
    std::vector<Vector> est_linear;
    std::vector<Vector> est_nonlinear;
    std::vector<double> ess;
    std::vector<double> log_total_weight;
    std::vector<int> weight_resets; ///< 1-based recursion indices of resets
    /// Per recursion, per iteration and particle (iteration-major); filled
    /// only when FilterConfig::record_decompositions is set.
    std::vector<std::vector<WeightDecomposition>> decompositions;
    OpCounters counters;
};

/// Constant noise precisions shared by every recursion; computing them once
/// keeps the per-recursion inversion counts intrinsic to the algorithms.
/// A zero nonlinear process covariance is admitted for noiseless test models:
/// its precision is left empty and the pseudo-measurement update (which would
/// carry infinite precision) is skipped.
struct NoisePrecisions {
    Matrix prec_e;
    Matrix prec_w_N;
    bool skip_pseudo_update = false;
};

NoisePrecisions make_noise_precisions(const CLGModel& model, OpCounters* counters = nullptr);

/// Draws n_particles from the model's nonlinear initializer (uniform weights)
/// and assigns every bank entry the linear-substate prior. Consumes only the
/// initializer's draws.
MpfState mpf_init(const CLGModel& model, const FilterConfig& config, RandomStream& rng);

/// Measurement update for the nonlinear substate: increments each log-weight
/// by log N(y; B_j eta_j + h_j, B_j C_j B_j^T + C_e) with B, h evaluated at
/// the pre-resampling particles, then normalizes. Returns the
/// pre-normalization log-sum. On total underflow the weights reset to uniform
/// and *weight_reset is set instead of throwing. When increments is given it
/// receives the raw per-particle log-likelihood terms.
double mpf_measurement_update_N(const CLGModel& model, int l, const Vector& y,
                                ParticleCloud& cloud, const MpfBank& bank,
                                const FilterConfig& config, bool* weight_reset = nullptr,
                                std::vector<double>* increments = nullptr);

/// Measurement update for the linear substate: per particle, adds the
/// observation information (B^T W_e B, B^T W_e (y - h)) to the prior in
/// canonical form and converts back. B, h are evaluated at the given
/// (post-resampling) particles.
std::vector<LinearBelief> mpf_measurement_update_L(const CLGModel& model, int l,
                                                   const Vector& y, const ParticleCloud& cloud,
                                                   const MpfBank& bank,
                                                   const NoisePrecisions& noise,
                                                   OpCounters* counters = nullptr);

/// Time update for the nonlinear substate: per particle, the one-step
/// predictive N(A^N_j eta_j + f^N_j, C_w^N + A^N_j C_j A^N_j^T + jitter I) is
/// factorized and sampled. Returns the new particle set (uniform weights) and
/// the predictive moments.
struct NPrediction {
    ParticleCloud cloud;
    std::vector<GaussianMoment> predictive;
};

NPrediction mpf_time_update_N(const CLGModel& model, int l, const ParticleCloud& cloud,
                              const std::vector<LinearBelief>& posteriors,
                              const FilterConfig& config, RandomStream& rng,
                              OpCounters* counters = nullptr);

/// Time update for the linear substate: per particle, the realized transition
/// of the nonlinear substate acts as a pseudo-measurement z_j (precision
/// A^N_j^T W_w^N A^N_j) refining the posterior, which is then pushed through
/// the linear dynamics to form the next prior.
struct LTimeUpdate {
    std::vector<GaussianMoment> refined; ///< beliefs after the pseudo-update
    MpfBank next_prior;
};

LTimeUpdate mpf_time_update_L(const CLGModel& model, int l, const ParticleCloud& cloud,
                              const std::vector<Vector>& next_particles,
                              const std::vector<LinearBelief>& posteriors,
                              const NoisePrecisions& noise, OpCounters* counters = nullptr);

/// One full MPF recursion: weight update, resampling (bank reordered by the
/// plan), linear measurement update, nonlinear time update, linear time
/// update. The nonlinear estimate uses the pre-resampling weighted mean; the
/// linear estimate averages the refined means.
StepEstimates mpf_step(const CLGModel& model, int l, const Vector& y, MpfState& state,
                       const FilterConfig& config, const NoisePrecisions& noise,
                       RandomStream& rng, OpCounters* counters = nullptr,
                       std::vector<WeightDecomposition>* decompositions = nullptr);

/// One SMPF recursion (variant per config.smpf_case). Identical schedule to
/// mpf_step with the shared-quantity substitutions: a single weight
/// covariance, a single posterior built from the condensed prior at the
/// particles' center of mass, a single sampling covariance, and a single
/// refined-posterior precision. Exactly one Cholesky factorization and three
/// matrix inversions per recursion.
StepEstimates smpf_step(const CLGModel& model, int l, const Vector& y, MpfState& state,
                        const FilterConfig& config, const NoisePrecisions& noise,
                        RandomStream& rng, OpCounters* counters = nullptr,
                        std::vector<WeightDecomposition>* decompositions = nullptr);

/// Gaussian statistics of the nonlinear-side pseudo-measurement z^N inferred
/// from the beliefs about the linear substate.
struct ZMessage {
    Vector eta;
    Matrix cov;
};

/// Direct form: eta_z = eta5 - A^L eta2, cov_z = C5 - A^L C2 (A^L)^T, with
/// A^L evaluated at the given particle. The covariance difference is
/// structurally indefinite during transients (a wide prior shrinks faster
/// than the process noise floor), so it is projected onto the PSD cone
/// rather than repaired-or-rejected.
ZMessage tf_z_N_message(const CLGModel& model, int l, const Vector& x_n,
                        const GaussianMoment& posterior, const GaussianMoment& next_prior);

/// Algebraically equal rewriting via the refined belief:
/// eta_z = f^L + A^L (eta4 - eta2), cov_z = C_w^L + A^L (C4 - C2) (A^L)^T.
/// Kept as an independent route for the identity cross-checks.
ZMessage tf_z_N_message_refined(const CLGModel& model, int l, const Vector& x_n,
                                const GaussianMoment& posterior,
                                const GaussianMoment& refined);

/// Extrinsic log-factor of one particle: the log-correlation of the z^N
/// belief with the Gaussian N(f^L(x_n), C_w^L) it is expected to match. With
/// drop_D3_factor only the quadratic exponent is kept (the determinant and
/// 2 pi constants are omitted); otherwise the constant follows
/// config.correlation_constant.
double tf_extrinsic_weight(const CLGModel& model, int l, const Vector& x_n, const ZMessage& z,
                           const FilterConfig& config);

/// Per-iteration diagnostics captured by tf_step when requested.
struct TfIterationState {
    int iteration = 1;
    std::vector<ZMessage> z_messages;   ///< empty in the first iteration
    std::vector<double> log_extrinsic;  ///< log p_j (zero in the first iteration)
    ParticleCloud cloud;                ///< particle set the iteration worked on
};

/// One TF recursion. Initialization computes the measurement weights and the
/// per-particle linear posteriors exactly as MPF but without resampling; both
/// stay fixed for the whole recursion. Iteration 1 uses unit extrinsic
/// factors and never resamples; iterations k >= 2 form z^N messages from the
/// previous iteration's next-prior bank, combine carried and extrinsic
/// weights, resample (reordering particles, posteriors and carried weights,
/// which are renormalized), and every iteration redraws the next particle set
/// and rebuilds the refined beliefs and next priors. Estimates are taken at
/// the last iteration: the weighted mean under the combined weights before
/// its resampling pass, and the average of the refined means after it.
StepEstimates tf_step(const CLGModel& model, int l, const Vector& y, MpfState& state,
                      const FilterConfig& config, const NoisePrecisions& noise,
                      RandomStream& rng, OpCounters* counters = nullptr,
                      std::vector<WeightDecomposition>* decompositions = nullptr,
                      std::vector<TfIterationState>* iteration_states = nullptr);

/// Runs the selected filter over a measurement sequence with a stream seeded
/// from config.seed. Serial reference semantics; bit-deterministic.
FilterOutput run_filter(const CLGModel& model, const std::vector<Vector>& measurements,
                        FilterKind kind, const FilterConfig& config);

} // namespace clgfilt
