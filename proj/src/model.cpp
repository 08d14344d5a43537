// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors

#include "clgfilt/model.hpp"

#include <cmath>

#include <fmt/format.h>

#include "clgfilt/errors.hpp"

namespace clgfilt {

namespace {

void check_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionMismatch(fmt::format("{} returned {}x{}, expected {}x{}", name, m.rows(),
                                            m.cols(), rows, cols));
    }
}

void check_length(const Vector& v, Eigen::Index n, const char* name) {
    if (v.size() != n) {
        throw DimensionMismatch(
            fmt::format("{} returned length {}, expected {}", name, v.size(), n));
    }
}

void check_spd(const Matrix& m, Eigen::Index n, const char* name) {
    check_shape(m, n, n, name);
    if (!m.isApprox(m.transpose(), 1e-12)) {
        throw NonPositiveDefinite(fmt::format("{} is not symmetric", name));
    }
    const Eigen::LLT<Matrix> llt(symmetrize(m));
    if (llt.info() != Eigen::Success) {
        throw NonPositiveDefinite(fmt::format("{} is not positive definite", name));
    }
}

/// Evaluates all six model callables at (l, x_n) and shape-checks the results.
void probe(const CLGModel& m, int l, const Vector& x_n) {
    check_shape(m.A_L(l, x_n), m.dim_linear, m.dim_linear, "A_L");
    check_length(m.f_L(l, x_n), m.dim_linear, "f_L");
    check_shape(m.A_N(l, x_n), m.dim_nonlinear, m.dim_linear, "A_N");
    check_length(m.f_N(l, x_n), m.dim_nonlinear, "f_N");
    check_shape(m.B(l, x_n), m.dim_meas, m.dim_linear, "B");
    check_length(m.h(l, x_n), m.dim_meas, "h");
}

} // namespace

void validate(const CLGModel& model) {
    if (model.dim_linear < 1 || model.dim_nonlinear < 1 || model.dim_meas < 1) {
        throw ConfigError(fmt::format("model dimensions must be positive (got {} / {} / {})",
                                      model.dim_linear, model.dim_nonlinear, model.dim_meas));
    }
    if (!model.A_L || !model.f_L || !model.A_N || !model.f_N || !model.B || !model.h ||
        !model.init_nonlinear_sampler) {
        throw ConfigError("model has an unset callable");
    }

    // Probe set: several time indices and nonlinear points, including the
    // origin and both signs, to catch shape bugs that depend on the input.
    RandomStream probe_rng(0xC16F117ULL);
    for (int l : {1, 2, 17}) {
        probe(model, l, Vector::Zero(model.dim_nonlinear));
        Vector x(model.dim_nonlinear);
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = 2.0 * probe_rng.normal();
        probe(model, l, x);
    }

    check_spd(model.cov_w_L, model.dim_linear, "cov_w_L");
    check_spd(model.cov_w_N, model.dim_nonlinear, "cov_w_N");
    check_spd(model.cov_e, model.dim_meas, "cov_e");

    if (model.init_linear.dim() != model.dim_linear) {
        throw DimensionMismatch(fmt::format("init_linear has dimension {}, expected {}",
                                            model.init_linear.dim(), model.dim_linear));
    }
    RandomStream init_rng(0xC16F117ULL + 1);
    check_length(model.init_nonlinear_sampler(init_rng), model.dim_nonlinear,
                 "init_nonlinear_sampler");
}

Trajectory simulate(const CLGModel& model, int T, RandomStream& rng, SimulationRecord* record) {
    if (T < 1) throw ConfigError(fmt::format("simulate: T must be >= 1 (got {})", T));

    // Factor the constant noise covariances once; zero covariances take the
    // degenerate no-draw path so noiseless models remain simulatable.
    const SamplingFactor factor_w_l(model.cov_w_L);
    const SamplingFactor factor_w_n(model.cov_w_N);
    const SamplingFactor factor_e(model.cov_e);
    const Vector zero_l = Vector::Zero(model.dim_linear);
    const Vector zero_n = Vector::Zero(model.dim_nonlinear);
    const Vector zero_p = Vector::Zero(model.dim_meas);

    Trajectory traj;
    traj.linear_states.reserve(static_cast<std::size_t>(T));
    traj.nonlinear_states.reserve(static_cast<std::size_t>(T));
    traj.measurements.reserve(static_cast<std::size_t>(T));

    Vector x_l = sample(model.init_linear, rng);
    Vector x_n = model.init_nonlinear_sampler(rng);
    check_length(x_l, model.dim_linear, "init_linear sample");
    check_length(x_n, model.dim_nonlinear, "init_nonlinear_sampler");

    for (int l = 1; l <= T; ++l) {
        traj.linear_states.push_back(x_l);
        traj.nonlinear_states.push_back(x_n);

        const Vector e = factor_e.draw(zero_p, rng);
        Vector y = model.h(l, x_n);
        check_length(y, model.dim_meas, "h");
        y += model.B(l, x_n) * x_l + e;
        traj.measurements.push_back(std::move(y));
        if (record) record->noise_meas.push_back(e);

        if (l == T) break;
        const Vector w_l = factor_w_l.draw(zero_l, rng);
        const Vector w_n = factor_w_n.draw(zero_n, rng);
        if (record) {
            record->noise_linear.push_back(w_l);
            record->noise_nonlinear.push_back(w_n);
        }
        Vector next_l = model.A_L(l, x_n) * x_l + model.f_L(l, x_n) + w_l;
        Vector next_n = model.f_N(l, x_n) + model.A_N(l, x_n) * x_l + w_n;
        check_length(next_l, model.dim_linear, "linear transition");
        check_length(next_n, model.dim_nonlinear, "nonlinear transition");
        x_l = std::move(next_l);
        x_n = std::move(next_n);
    }
    return traj;
}

PseudoMeasurement pseudo_z_L(const CLGModel& model, int l, const Vector& x_n_now,
                             const Vector& x_n_next) {
    const Vector drift = model.f_N(l, x_n_now);
    check_length(drift, x_n_next.size(), "pseudo_z_L f_N");
    return PseudoMeasurement{x_n_next - drift, PseudoKind::LinearSide};
}

PseudoMeasurement pseudo_z_N(const CLGModel& model, int l, const Vector& x_l_now,
                             const Vector& x_l_next, const Vector& x_n_now) {
    const Matrix a = model.A_L(l, x_n_now);
    check_shape(a, x_l_next.size(), x_l_now.size(), "pseudo_z_N A_L");
    return PseudoMeasurement{x_l_next - a * x_l_now, PseudoKind::NonlinearSide};
}

CLGModel benchmark_model(double sigma_w_L, double sigma_w_N, double sigma_e,
                         double init_var_linear, double init_var_nonlinear) {
    if (!(sigma_w_L > 0.0) || !(sigma_w_N > 0.0) || !(sigma_e > 0.0)) {
        throw ConfigError(fmt::format(
            "benchmark_model: noise levels must be positive (sigma_w_L={}, "
            "sigma_w_N={}, sigma_e={})",
            sigma_w_L, sigma_w_N, sigma_e));
    }
    if (!(init_var_linear > 0.0) || !(init_var_nonlinear > 0.0)) {
        throw ConfigError("benchmark_model: initial variances must be positive");
    }

    CLGModel m;
    m.dim_linear = 3;
    m.dim_nonlinear = 1;
    m.dim_meas = 2;

    Matrix a_l(3, 3);
    a_l << 0.8, 0.2, 0.0, //
        0.0, 0.7, -0.2,   //
        0.0, 0.2, 0.7;
    m.A_L = [a_l](int, const Vector&) { return a_l; };

    m.f_L = [](int, const Vector& xn) {
        const double x = xn[0];
        Vector f(3);
        f << std::cos(x), -std::sin(x), 0.5 * std::sin(2.0 * x);
        return f;
    };

    Matrix a_n(1, 3);
    a_n << 0.9, 0.0, 0.0;
    m.A_N = [a_n](int, const Vector&) { return a_n; };

    m.f_N = [](int, const Vector& xn) {
        Vector f(1);
        f << std::atan(xn[0]);
        return f;
    };

    m.h = [](int, const Vector& xn) {
        const double x = xn[0];
        const double sgn = (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        Vector v(2);
        v << 0.1 * x * x * sgn, 0.0;
        return v;
    };

    Matrix b(2, 3);
    b << 0.0, 0.0, 0.0, //
        1.0, -1.0, 1.0;
    m.B = [b](int, const Vector&) { return b; };

    m.cov_w_L = (sigma_w_L * sigma_w_L) * Matrix::Identity(3, 3);
    m.cov_w_N = (sigma_w_N * sigma_w_N) * Matrix::Identity(1, 1);
    m.cov_e = (sigma_e * sigma_e) * Matrix::Identity(2, 2);

    m.init_linear = GaussianMoment{Vector::Zero(3), init_var_linear * Matrix::Identity(3, 3)};
    const double init_std_n = std::sqrt(init_var_nonlinear);
    m.init_nonlinear_sampler = [init_std_n](RandomStream& rng) {
        Vector x(1);
        x << init_std_n * rng.normal();
        return x;
    };
    return m;
}

} // namespace clgfilt
