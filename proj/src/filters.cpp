// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors

#include "clgfilt/filters.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>

#include <fmt/core.h>

#include "clgfilt/errors.hpp"

namespace clgfilt {

namespace {

double resolve_jitter(const FilterConfig& config, const Matrix& cov) {
    return config.jitter_amount >= 0.0 ? config.jitter_amount : default_jitter_amount(cov);
}

/// Information added to a canonical belief by observing residual = M x + noise
/// with noise precision prec_noise.
Matrix observed_precision(const Matrix& prec, const Matrix& M, const Matrix& prec_noise) {
    return prec + M.transpose() * prec_noise * M;
}

Vector observed_xi(const Vector& xi, const Matrix& M, const Matrix& prec_noise,
                   const Vector& residual) {
    return xi + M.transpose() * prec_noise * residual;
}

/// Sampling factor of a prediction covariance: inflate the diagonal first,
/// and if the factorization still fails, repair the spectrum once and retry.
SamplingFactor prediction_factor(const Matrix& cov, double amount, OpCounters* counters) {
    const Matrix inflated = jitter(cov, amount);
    try {
        return SamplingFactor(inflated, counters);
    } catch (const NonPositiveDefinite&) {
        return SamplingFactor(jitter(psd_repair(symmetrize(cov)), amount), counters);
    }
}

Vector average_means(const std::vector<GaussianMoment>& beliefs) {
    Vector acc = Vector::Zero(beliefs.front().mean.size());
    for (const auto& belief : beliefs) acc += belief.mean;
    return acc / static_cast<double>(beliefs.size());
}

template <typename T>
std::vector<T> reorder(const std::vector<T>& items, const ResamplePlan& plan) {
    std::vector<T> out;
    out.reserve(plan.ancestor_indices.size());
    for (std::size_t idx : plan.ancestor_indices) out.push_back(items[idx]);
    return out;
}

std::vector<double> uniform_weights(std::size_t n) {
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

double uniform_log_weight(std::size_t n) { return -std::log(static_cast<double>(n)); }

/// Normalizes in place; on total underflow resets to uniform weights, flags
/// the reset and reports a log-total of -inf instead of throwing.
double normalize_with_reset(ParticleCloud& cloud, bool* weight_reset) {
    try {
        return normalize(cloud);
    } catch (const AllWeightsZero&) {
        const double lw = uniform_log_weight(cloud.size());
        for (double& w : cloud.log_weights) w = lw;
        if (weight_reset != nullptr) *weight_reset = true;
        return -std::numeric_limits<double>::infinity();
    }
}

void require_aligned(const ParticleCloud& cloud, const MpfBank& bank, const char* where) {
    if (cloud.size() != bank.size()) {
        throw DimensionMismatch(fmt::format("{}: cloud holds {} particles but the belief bank "
                                            "holds {} entries",
                                            where, cloud.size(), bank.size()));
    }
    if (cloud.size() == 0) {
        throw EmptyMixture(fmt::format("{}: empty particle cloud", where));
    }
}

void require_measurement(const CLGModel& model, const Vector& y, const char* where) {
    if (y.size() != model.dim_meas) {
        throw DimensionMismatch(fmt::format("{}: measurement has dimension {} but the model "
                                            "declares {}",
                                            where, y.size(), model.dim_meas));
    }
}

void record_decompositions(std::vector<WeightDecomposition>* out, int iteration,
                           const std::vector<double>& apriori,
                           const std::vector<double>& measurement,
                           const std::vector<double>& pseudo) {
    if (out == nullptr) return;
    for (std::size_t j = 0; j < apriori.size(); ++j) {
        WeightDecomposition d;
        d.iteration = iteration;
        d.l_apriori = apriori[j];
        d.l_measurement = measurement[j];
        d.l_pseudo = pseudo[j];
        d.l_total = d.l_apriori + d.l_measurement + d.l_pseudo;
        out->push_back(d);
    }
}

} // namespace

void validate(const FilterConfig& config) {
    if (config.n_particles < 1) {
        throw ConfigError(fmt::format("n_particles must be >= 1, got {}", config.n_particles));
    }
    if (config.n_iterations < 1) {
        throw ConfigError(fmt::format("n_iterations must be >= 1, got {}", config.n_iterations));
    }
    if (std::isnan(config.jitter_amount)) {
        throw ConfigError("jitter_amount must not be NaN");
    }
    if (config.smpf_case != 1 && config.smpf_case != 2) {
        throw ConfigError(fmt::format("smpf_case must be 1 or 2, got {}", config.smpf_case));
    }
}

NoisePrecisions make_noise_precisions(const CLGModel& model, OpCounters* counters) {
    NoisePrecisions noise;
    noise.prec_e = spd_inverse(model.cov_e, counters);
    if (model.cov_w_N.isZero(0.0)) {
        noise.skip_pseudo_update = true;
    } else {
        noise.prec_w_N = spd_inverse(model.cov_w_N, counters);
    }
    return noise;
}

MpfState mpf_init(const CLGModel& model, const FilterConfig& config, RandomStream& rng) {
    validate(config);
    const std::size_t n = static_cast<std::size_t>(config.n_particles);
    MpfState state;
    state.cloud.particles.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        Vector x = model.init_nonlinear_sampler(rng);
        if (x.size() != model.dim_nonlinear) {
            throw DimensionMismatch(fmt::format("mpf_init: nonlinear initializer returned "
                                                "dimension {} but the model declares {}",
                                                x.size(), model.dim_nonlinear));
        }
        state.cloud.particles.push_back(std::move(x));
    }
    state.cloud.log_weights.assign(n, uniform_log_weight(n));
    state.bank.assign(n, model.init_linear);
    return state;
}

double mpf_measurement_update_N(const CLGModel& model, int l, const Vector& y,
                                ParticleCloud& cloud, const MpfBank& bank,
                                const FilterConfig& config, bool* weight_reset,
                                std::vector<double>* increments) {
    require_aligned(cloud, bank, "mpf_measurement_update_N");
    require_measurement(model, y, "mpf_measurement_update_N");
    if (increments != nullptr) increments->assign(cloud.size(), 0.0);
    for (std::size_t j = 0; j < cloud.size(); ++j) {
        const Vector& x = cloud.particles[j];
        const Matrix B = model.B(l, x);
        const Vector h = model.h(l, x);
        const GaussianMoment predicted(B * bank[j].mean + h,
                                       B * bank[j].cov * B.transpose() + model.cov_e);
        const double loglik = log_density(predicted, y, config.drop_det_in_weights);
        cloud.log_weights[j] += loglik;
        if (increments != nullptr) (*increments)[j] = loglik;
    }
    return normalize_with_reset(cloud, weight_reset);
}

std::vector<LinearBelief> mpf_measurement_update_L(const CLGModel& model, int l,
                                                   const Vector& y, const ParticleCloud& cloud,
                                                   const MpfBank& bank,
                                                   const NoisePrecisions& noise,
                                                   OpCounters* counters) {
    require_aligned(cloud, bank, "mpf_measurement_update_L");
    require_measurement(model, y, "mpf_measurement_update_L");
    std::vector<LinearBelief> out;
    out.reserve(cloud.size());
    for (std::size_t j = 0; j < cloud.size(); ++j) {
        const Vector& x = cloud.particles[j];
        const Matrix B = model.B(l, x);
        const Vector h = model.h(l, x);
        const GaussianCanonical prior = to_canonical(bank[j], counters);
        GaussianCanonical posterior(observed_xi(prior.xi, B, noise.prec_e, y - h),
                                    observed_precision(prior.prec, B, noise.prec_e));
        GaussianMoment moment = to_moment(posterior, counters);
        out.push_back(LinearBelief{std::move(posterior), std::move(moment)});
    }
    return out;
}

NPrediction mpf_time_update_N(const CLGModel& model, int l, const ParticleCloud& cloud,
                              const std::vector<LinearBelief>& posteriors,
                              const FilterConfig& config, RandomStream& rng,
                              OpCounters* counters) {
    if (cloud.size() != posteriors.size()) {
        throw DimensionMismatch(fmt::format("mpf_time_update_N: cloud holds {} particles but "
                                            "{} posteriors were given",
                                            cloud.size(), posteriors.size()));
    }
    NPrediction out;
    out.cloud.particles.reserve(cloud.size());
    out.predictive.reserve(cloud.size());
    for (std::size_t j = 0; j < cloud.size(); ++j) {
        const Vector& x = cloud.particles[j];
        const Matrix A = model.A_N(l, x);
        const Vector mean = A * posteriors[j].moment.mean + model.f_N(l, x);
        const Matrix cov =
            symmetrize(model.cov_w_N + A * posteriors[j].moment.cov * A.transpose());
        const Matrix inflated = jitter(cov, resolve_jitter(config, cov));
        const SamplingFactor factor = prediction_factor(cov, resolve_jitter(config, cov),
                                                        counters);
        out.cloud.particles.push_back(factor.draw(mean, rng));
        out.predictive.emplace_back(mean, inflated);
    }
    out.cloud.log_weights.assign(cloud.size(), uniform_log_weight(cloud.size()));
    return out;
}

LTimeUpdate mpf_time_update_L(const CLGModel& model, int l, const ParticleCloud& cloud,
                              const std::vector<Vector>& next_particles,
                              const std::vector<LinearBelief>& posteriors,
                              const NoisePrecisions& noise, OpCounters* counters) {
    if (cloud.size() != next_particles.size() || cloud.size() != posteriors.size()) {
        throw DimensionMismatch(fmt::format("mpf_time_update_L: got {} particles, {} successor "
                                            "particles and {} posteriors",
                                            cloud.size(), next_particles.size(),
                                            posteriors.size()));
    }
    LTimeUpdate out;
    out.refined.reserve(cloud.size());
    out.next_prior.reserve(cloud.size());
    for (std::size_t j = 0; j < cloud.size(); ++j) {
        const Vector& x = cloud.particles[j];
        GaussianMoment refined = [&] {
            if (noise.skip_pseudo_update) return posteriors[j].moment;
            const Matrix A = model.A_N(l, x);
            const Vector z = pseudo_z_L(model, l, x, next_particles[j]).value;
            const GaussianCanonical c(observed_xi(posteriors[j].canonical.xi, A, noise.prec_w_N,
                                                  z),
                                      observed_precision(posteriors[j].canonical.prec, A,
                                                         noise.prec_w_N));
            return to_moment(c, counters);
        }();
        out.next_prior.push_back(affine_push(refined, model.A_L(l, x), model.f_L(l, x),
                                             model.cov_w_L));
        out.refined.push_back(std::move(refined));
    }
    return out;
}

StepEstimates mpf_step(const CLGModel& model, int l, const Vector& y, MpfState& state,
                       const FilterConfig& config, const NoisePrecisions& noise,
                       RandomStream& rng, OpCounters* counters,
                       std::vector<WeightDecomposition>* decompositions) {
    StepEstimates est;
    std::vector<double> apriori;
    std::vector<double> increments;
    if (decompositions != nullptr) apriori = state.cloud.log_weights;
    bool reset = false;
    est.log_total_weight =
        mpf_measurement_update_N(model, l, y, state.cloud, state.bank, config, &reset,
                                 decompositions != nullptr ? &increments : nullptr);
    est.weight_reset = reset;
    est.nonlinear = weighted_mean(state.cloud);
    est.ess = ess(state.cloud);
    if (decompositions != nullptr) {
        record_decompositions(decompositions, 1, apriori, increments,
                              std::vector<double>(state.cloud.size(), 0.0));
    }

    if (config.resample_enabled) {
        auto [resampled, plan] = resample(state.cloud, config.resample_scheme, rng);
        state.bank = reorder(state.bank, plan);
        state.cloud = std::move(resampled);
    }

    const std::vector<LinearBelief> posteriors =
        mpf_measurement_update_L(model, l, y, state.cloud, state.bank, noise, counters);
    NPrediction prediction = mpf_time_update_N(model, l, state.cloud, posteriors, config, rng,
                                               counters);
    LTimeUpdate refinement = mpf_time_update_L(model, l, state.cloud,
                                               prediction.cloud.particles, posteriors, noise,
                                               counters);
    est.linear = average_means(refinement.refined);

    // The predicted set inherits the current weights: uniform after a
    // resampling pass, the carried weights when resampling is disabled.
    prediction.cloud.log_weights = state.cloud.log_weights;
    state.cloud = std::move(prediction.cloud);
    state.bank = std::move(refinement.next_prior);
    return est;
}

StepEstimates smpf_step(const CLGModel& model, int l, const Vector& y, MpfState& state,
                        const FilterConfig& config, const NoisePrecisions& noise,
                        RandomStream& rng, OpCounters* counters,
                        std::vector<WeightDecomposition>* decompositions) {
    require_aligned(state.cloud, state.bank, "smpf_step");
    require_measurement(model, y, "smpf_step");
    const std::size_t n = state.cloud.size();
    StepEstimates est;

    // Measurement update for the weights: per-particle predicted means, one
    // condensed predicted covariance shared by the whole bank. Evaluating
    // N(y; mean_j, C) as N(mean_j; y, C) reuses a single factorization.
    std::vector<double> apriori;
    if (decompositions != nullptr) apriori = state.cloud.log_weights;
    GaussianMixture weight_mix;
    weight_mix.components.reserve(n);
    weight_mix.weights = uniform_weights(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Vector& x = state.cloud.particles[j];
        const Matrix B = model.B(l, x);
        const Vector h = model.h(l, x);
        weight_mix.components.emplace_back(B * state.bank[j].mean + h,
                                           B * state.bank[j].cov * B.transpose() + model.cov_e);
    }
    const GaussianMoment condensed_weight = condense_mixture(weight_mix);
    const PreparedLogDensity weight_density(GaussianMoment(y, condensed_weight.cov));
    std::vector<double> increments(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        increments[j] = weight_density(weight_mix.components[j].mean,
                                       config.drop_det_in_weights);
        state.cloud.log_weights[j] += increments[j];
    }
    bool reset = false;
    est.log_total_weight = normalize_with_reset(state.cloud, &reset);
    est.weight_reset = reset;
    est.nonlinear = weighted_mean(state.cloud);
    est.ess = ess(state.cloud);
    record_decompositions(decompositions, 1, apriori, increments,
                          std::vector<double>(n, 0.0));

    // Condensed prior and the predicted set's center of mass, both taken
    // before resampling; the per-particle prior bank is fully consumed here.
    GaussianMixture prior_mix{state.bank, uniform_weights(n)};
    const GaussianMoment condensed_prior = condense_mixture(prior_mix);
    const Vector center_predicted = center_of_mass(state.cloud);

    if (config.resample_enabled) {
        auto [resampled, plan] = resample(state.cloud, config.resample_scheme, rng);
        state.cloud = std::move(resampled);
    }

    // Shared posterior for the linear substate at the predicted center of
    // mass (one inversion each way).
    const Matrix B_bar = model.B(l, center_predicted);
    const Vector h_bar = model.h(l, center_predicted);
    const GaussianCanonical prior_can = to_canonical(condensed_prior, counters);
    const GaussianCanonical post_can(observed_xi(prior_can.xi, B_bar, noise.prec_e, y - h_bar),
                                     observed_precision(prior_can.prec, B_bar, noise.prec_e));
    const GaussianMoment post_mom = to_moment(post_can, counters);

    // Nonlinear time update: per-particle predictive means, one condensed
    // predictive covariance, hence a single sampling factorization.
    GaussianMixture predictive_mix;
    predictive_mix.components.reserve(n);
    predictive_mix.weights = uniform_weights(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Vector& x = state.cloud.particles[j];
        const Matrix A = model.A_N(l, x);
        predictive_mix.components.emplace_back(A * post_mom.mean + model.f_N(l, x),
                                               model.cov_w_N +
                                                   A * post_mom.cov * A.transpose());
    }
    const GaussianMoment condensed_predictive = condense_mixture(predictive_mix);
    const SamplingFactor factor =
        prediction_factor(condensed_predictive.cov,
                          resolve_jitter(config, condensed_predictive.cov), counters);
    std::vector<Vector> next_particles;
    next_particles.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        next_particles.push_back(factor.draw(predictive_mix.components[j].mean, rng));
    }

    // Linear time update: one shared refined precision evaluated at the
    // updated set's center of mass, per-particle information vectors.
    std::vector<GaussianMoment> refined;
    refined.reserve(n);
    if (noise.skip_pseudo_update) {
        for (std::size_t j = 0; j < n; ++j) refined.push_back(post_mom);
    } else {
        const Matrix A_bar = model.A_N(l, center_of_mass(state.cloud));
        const Matrix shared_prec = observed_precision(post_can.prec, A_bar, noise.prec_w_N);
        const Matrix shared_cov = spd_inverse(shared_prec, counters);
        for (std::size_t j = 0; j < n; ++j) {
            const Vector z =
                pseudo_z_L(model, l, state.cloud.particles[j], next_particles[j]).value;
            refined.emplace_back(shared_cov * observed_xi(post_can.xi, A_bar, noise.prec_w_N, z),
                                 shared_cov);
        }
    }
    est.linear = average_means(refined);

    MpfBank next_bank;
    next_bank.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Vector& x = state.cloud.particles[j];
        next_bank.push_back(affine_push(refined[j], model.A_L(l, x), model.f_L(l, x),
                                        model.cov_w_L));
    }
    if (config.smpf_case == 2) {
        GaussianMixture bank_mix{next_bank, uniform_weights(n)};
        const GaussianMoment shared = condense_mixture(bank_mix);
        for (GaussianMoment& belief : next_bank) {
            belief = GaussianMoment(belief.mean, shared.cov);
        }
    }

    state.bank = std::move(next_bank);
    state.cloud.particles = std::move(next_particles);
    return est;
}

ZMessage tf_z_N_message(const CLGModel& model, int l, const Vector& x_n,
                        const GaussianMoment& posterior, const GaussianMoment& next_prior) {
    const Matrix A = model.A_L(l, x_n);
    ZMessage z;
    z.eta = next_prior.mean - A * posterior.mean;
    z.cov = psd_project(next_prior.cov - A * posterior.cov * A.transpose());
    return z;
}

ZMessage tf_z_N_message_refined(const CLGModel& model, int l, const Vector& x_n,
                                const GaussianMoment& posterior,
                                const GaussianMoment& refined) {
    const Matrix A = model.A_L(l, x_n);
    ZMessage z;
    z.eta = model.f_L(l, x_n) + A * (refined.mean - posterior.mean);
    z.cov = psd_project(model.cov_w_L + A * (refined.cov - posterior.cov) * A.transpose());
    return z;
}

double tf_extrinsic_weight(const CLGModel& model, int l, const Vector& x_n, const ZMessage& z,
                           const FilterConfig& config) {
    const Vector drift = model.f_L(l, x_n);
    if (!config.drop_D3_factor && config.correlation_constant == CorrelationConstant::PaperLiteral) {
        return log_correlation(GaussianMoment(z.eta, z.cov),
                               GaussianMoment(drift, model.cov_w_L),
                               CorrelationConstant::PaperLiteral);
    }
    return log_density(GaussianMoment(drift, z.cov + model.cov_w_L), z.eta,
                       config.drop_D3_factor);
}

StepEstimates tf_step(const CLGModel& model, int l, const Vector& y, MpfState& state,
                      const FilterConfig& config, const NoisePrecisions& noise,
                      RandomStream& rng, OpCounters* counters,
                      std::vector<WeightDecomposition>* decompositions,
                      std::vector<TfIterationState>* iteration_states) {
    require_aligned(state.cloud, state.bank, "tf_step");
    require_measurement(model, y, "tf_step");
    const std::size_t n = state.cloud.size();
    StepEstimates est;

    // Initialization: measurement weights and per-particle linear posteriors,
    // both computed on the predicted set without resampling. They stay fixed
    // for the whole recursion; resampling passes only reorder them.
    std::vector<double> apriori;
    std::vector<double> increments;
    const bool track_parts = decompositions != nullptr;
    if (track_parts) apriori = state.cloud.log_weights;
    bool reset = false;
    est.log_total_weight =
        mpf_measurement_update_N(model, l, y, state.cloud, state.bank, config, &reset,
                                 track_parts ? &increments : nullptr);
    est.weight_reset = reset;
    std::vector<LinearBelief> posteriors =
        mpf_measurement_update_L(model, l, y, state.cloud, state.bank, noise, counters);

    // Working set: particles plus the carried (renormalized) measurement
    // weights; iterations may permute it.
    ParticleCloud current = state.cloud;
    MpfBank next_prior;
    std::vector<GaussianMoment> refined;
    ParticleCloud predicted;

    for (int k = 1; k <= config.n_iterations; ++k) {
        // Extrinsic factors from the previous iteration's next priors; the
        // first iteration has no refined information yet and uses unit
        // factors on the carried weights, bit for bit.
        std::vector<double> log_extrinsic(n, 0.0);
        std::vector<ZMessage> z_messages;
        ParticleCloud combined = current;
        if (k > 1) {
            z_messages.reserve(n);
            for (std::size_t j = 0; j < n; ++j) {
                ZMessage z = tf_z_N_message(model, l, current.particles[j],
                                            posteriors[j].moment, next_prior[j]);
                log_extrinsic[j] =
                    tf_extrinsic_weight(model, l, current.particles[j], z, config);
                combined.log_weights[j] += log_extrinsic[j];
                z_messages.push_back(std::move(z));
            }
            bool combined_reset = false;
            normalize_with_reset(combined, &combined_reset);
            if (combined_reset) est.weight_reset = true;
        }
        if (track_parts) {
            record_decompositions(decompositions, k, apriori, increments, log_extrinsic);
        }
        if (k == config.n_iterations) {
            est.nonlinear = weighted_mean(combined);
            est.ess = ess(combined);
        }
        if (iteration_states != nullptr) {
            TfIterationState snapshot;
            snapshot.iteration = k;
            snapshot.z_messages = z_messages;
            snapshot.log_extrinsic = log_extrinsic;
            snapshot.cloud = combined;
            iteration_states->push_back(std::move(snapshot));
        }

        if (k > 1 && config.resample_enabled) {
            auto [resampled, plan] = resample(combined, config.resample_scheme, rng);
            posteriors = reorder(posteriors, plan);
            if (track_parts) {
                apriori = reorder(apriori, plan);
                increments = reorder(increments, plan);
            }
            // The carried measurement weights follow their particles and are
            // renormalized after the change of support.
            ParticleCloud renormalized{resampled.particles,
                                       reorder(current.log_weights, plan)};
            normalize_with_reset(renormalized, nullptr);
            current = std::move(renormalized);
        } else if (k > 1) {
            current.log_weights = combined.log_weights;
        }

        // Every iteration redraws the next particle set from the refined
        // alignment and rebuilds the refined beliefs and next priors.
        NPrediction prediction =
            mpf_time_update_N(model, l, current, posteriors, config, rng, counters);
        predicted = std::move(prediction.cloud);
        LTimeUpdate refinement = mpf_time_update_L(model, l, current, predicted.particles,
                                                   posteriors, noise, counters);
        refined = std::move(refinement.refined);
        next_prior = std::move(refinement.next_prior);
    }

    est.linear = average_means(refined);
    state.bank = std::move(next_prior);
    state.cloud.particles = std::move(predicted.particles);
    if (config.n_iterations == 1 || !config.resample_enabled) {
        // No resampling pass consumed the carried weights; they stay attached
        // to the exported set exactly as in a plain sequential update.
        state.cloud.log_weights = std::move(current.log_weights);
    } else {
        state.cloud.log_weights.assign(n, uniform_log_weight(n));
    }
    return est;
}

FilterOutput run_filter(const CLGModel& model, const std::vector<Vector>& measurements,
                        FilterKind kind, const FilterConfig& config) {
    validate(model);
    FilterConfig local = config;
    if (kind == FilterKind::Smpf1) local.smpf_case = 1;
    if (kind == FilterKind::Smpf2) local.smpf_case = 2;
    validate(local);

    FilterOutput out;
    RandomStream rng(local.seed);
    NoisePrecisions noise = make_noise_precisions(model, &out.counters);
    MpfState state = mpf_init(model, local, rng);

    const int steps = static_cast<int>(measurements.size());
    out.est_linear.reserve(steps);
    out.est_nonlinear.reserve(steps);
    out.ess.reserve(steps);
    out.log_total_weight.reserve(steps);
    for (int l = 1; l <= steps; ++l) {
        std::vector<WeightDecomposition> decomposition;
        std::vector<WeightDecomposition>* slot =
            local.record_decompositions ? &decomposition : nullptr;
        StepEstimates est;
        switch (kind) {
        case FilterKind::Mpf:
            est = mpf_step(model, l, measurements[l - 1], state, local, noise, rng,
                           &out.counters, slot);
            break;
        case FilterKind::Smpf1:
        case FilterKind::Smpf2:
            est = smpf_step(model, l, measurements[l - 1], state, local, noise, rng,
                            &out.counters, slot);
            break;
        case FilterKind::Tf:
            est = tf_step(model, l, measurements[l - 1], state, local, noise, rng,
                          &out.counters, slot);
            break;
        }
        out.est_linear.push_back(std::move(est.linear));
        out.est_nonlinear.push_back(std::move(est.nonlinear));
        out.ess.push_back(est.ess);
        out.log_total_weight.push_back(est.log_total_weight);
        if (est.weight_reset) out.weight_resets.push_back(l);
        if (local.record_decompositions) out.decompositions.push_back(std::move(decomposition));
    }
    return out;
}

} // namespace clgfilt
