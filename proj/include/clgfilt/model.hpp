// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "clgfilt/gaussian.hpp"
#include "clgfilt/rng.hpp"

namespace clgfilt {

/// Mixed linear/nonlinear (conditionally linear Gaussian) state-space model.
///
/// State x_l splits into a linear substate x^L (dimension dim_linear) and a
/// nonlinear substate x^N (dimension dim_nonlinear). Conditioned on x^N the
/// transitions and the measurement are affine with additive Gaussian noise:
///
///   x^L_{l+1} = A_L(l, x^N_l) x^L_l + f_L(l, x^N_l) + w^L_l
///   x^N_{l+1} = f_N(l, x^N_l) + A_N(l, x^N_l) x^L_l + w^N_l
///   y_l       = h(l, x^N_l) + B(l, x^N_l) x^L_l + e_l
///
/// Callables must be deterministic and side-effect free; all randomness flows
/// through explicitly passed streams. Time indices are 1-based; containers
/// store index l at position l-1.
struct CLGModel {
    using MatrixFn = std::function<Matrix(int l, const Vector& x_n)>;
    using VectorFn = std::function<Vector(int l, const Vector& x_n)>;

    Eigen::Index dim_linear = 0;
    Eigen::Index dim_nonlinear = 0;
    Eigen::Index dim_meas = 0;

    MatrixFn A_L; ///< (l, x^N) -> dim_linear x dim_linear
    VectorFn f_L; ///< (l, x^N) -> dim_linear
    MatrixFn A_N; ///< (l, x^N) -> dim_nonlinear x dim_linear
    VectorFn f_N; ///< (l, x^N) -> dim_nonlinear
    MatrixFn B;   ///< (l, x^N) -> dim_meas x dim_linear
    VectorFn h;   ///< (l, x^N) -> dim_meas

    Matrix cov_w_L; ///< linear process noise covariance, SPD
    Matrix cov_w_N; ///< nonlinear process noise covariance, SPD
    Matrix cov_e;   ///< measurement noise covariance, SPD

    GaussianMoment init_linear; ///< prior on x^L_1
    std::function<Vector(RandomStream&)> init_nonlinear_sampler; ///< draws x^N_1
};

/// Strict validation: positive dimensions, callable output shapes on a probe
/// set of (l, x^N) pairs, symmetric positive-definite noise covariances, and
/// consistent initial conditions. Throws DimensionMismatch, NonPositiveDefinite
/// or ConfigError. simulate() itself only shape-checks, so noiseless models
/// (zero covariances) remain simulatable for tests.
void validate(const CLGModel& model);

/// Jointly generated states and measurements for l = 1..T (stored 0-based).
struct Trajectory {
    std::vector<Vector> linear_states;
    std::vector<Vector> nonlinear_states;
    std::vector<Vector> measurements;

    std::size_t length() const { return measurements.size(); }
};

/// Optional instrumentation: the realized noise draws of one simulation.
/// noise_linear/noise_nonlinear hold w_l for l = 1..T-1; noise_meas holds
/// e_l for l = 1..T.
struct SimulationRecord {
    std::vector<Vector> noise_linear;
    std::vector<Vector> noise_nonlinear;
    std::vector<Vector> noise_meas;
};

/// Simulates T steps. Draw order is part of the reproducibility contract:
/// initialization draws the linear state before the nonlinear one; each step
/// draws the measurement noise, then (below step T) the linear process noise,
/// then the nonlinear process noise.
Trajectory simulate(const CLGModel& model, int T, RandomStream& rng,
                    SimulationRecord* record = nullptr);

enum class PseudoKind { LinearSide, NonlinearSide };

/// Synthetic measurement formed from realized states; which substate it
/// informs is tracked by kind.
struct PseudoMeasurement {
    Vector value;
    PseudoKind kind = PseudoKind::LinearSide;
};

/// z^L_l = x^N_{l+1} - f_N(l, x^N_l): observes A_N x^L + w^N.
PseudoMeasurement pseudo_z_L(const CLGModel& model, int l, const Vector& x_n_now,
                             const Vector& x_n_next);

/// z^N_l = x^L_{l+1} - A_L(l, x^N_l) x^L_l: observes f_L(x^N) + w^L.
PseudoMeasurement pseudo_z_N(const CLGModel& model, int l, const Vector& x_l_now,
                             const Vector& x_l_next, const Vector& x_n_now);

/// Built-in benchmark system (three linear states, scalar nonlinear state,
/// two measurements): rotation-like linear dynamics driven by trigonometric
/// functions of x^N, arctan nonlinear dynamics coupled to the first linear
/// state, a signed-quadratic observation of x^N, and isotropic noise
/// covariances sigma^2 I. Initial condition: x^L_1 ~ N(0, init_var_linear I),
/// x^N_1 ~ N(0, init_var_nonlinear).
///
/// The default initial variances are small (std about 0.03, a few times the
/// per-step process noise) so that the first few estimates start settled:
/// with a wide prior the first recursions dominate a 200-step RMSE and
/// spurious threshold crossings pollute the tracking-loss counts of every
/// filter before the first informative measurement arrives.
CLGModel benchmark_model(double sigma_w_L = 5e-3, double sigma_w_N = 5e-3,
                         double sigma_e = 1e-2, double init_var_linear = 1e-3,
                         double init_var_nonlinear = 1e-3);

} // namespace clgfilt
