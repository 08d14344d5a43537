// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors
//
// CLG model definition, simulation, pseudo-measurement extraction, and the
// built-in benchmark system.

#include <doctest.h>

#include <cmath>

#include "clgfilt/errors.hpp"
#include "clgfilt/model.hpp"
#include "clgfilt/rng.hpp"

using namespace clgfilt;

namespace {

Vector scalar(double x) {
    Vector v(1);
    v << x;
    return v;
}

/// Minimal two/one/one-dimensional model with every map zero and no noise.
CLGModel zero_model() {
    CLGModel m;
    m.dim_linear = 2;
    m.dim_nonlinear = 1;
    m.dim_meas = 1;
    m.A_L = [](int, const Vector&) { return Matrix::Zero(2, 2); };
    m.f_L = [](int, const Vector&) { return Vector::Zero(2); };
    m.A_N = [](int, const Vector&) { return Matrix::Zero(1, 2); };
    m.f_N = [](int, const Vector&) { return Vector::Zero(1); };
    m.B = [](int, const Vector&) { return Matrix::Zero(1, 2); };
    m.h = [](int, const Vector&) { return Vector::Zero(1); };
    m.cov_w_L = Matrix::Zero(2, 2);
    m.cov_w_N = Matrix::Zero(1, 1);
    m.cov_e = Matrix::Zero(1, 1);
    m.init_linear = GaussianMoment{Vector::Zero(2), Matrix::Zero(2, 2)};
    m.init_nonlinear_sampler = [](RandomStream&) { return Vector::Zero(1); };
    return m;
}

} // namespace

TEST_CASE("simulate: the all-zero model yields an all-zero trajectory") {
    RandomStream rng(1);
    const Trajectory traj = simulate(zero_model(), 5, rng);
    REQUIRE(traj.length() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(traj.linear_states[i].isZero(0.0));
        CHECK(traj.nonlinear_states[i].isZero(0.0));
        CHECK(traj.measurements[i].isZero(0.0));
    }
}

TEST_CASE("simulate: bit-identical under a fixed seed") {
    const CLGModel model = benchmark_model();
    RandomStream rng_a(77);
    RandomStream rng_b(77);
    const Trajectory a = simulate(model, 3, rng_a);
    const Trajectory b = simulate(model, 3, rng_b);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a.linear_states[i] == b.linear_states[i]);
        CHECK(a.nonlinear_states[i] == b.nonlinear_states[i]);
        CHECK(a.measurements[i] == b.measurements[i]);
    }
}

TEST_CASE("simulate: decoupled nonlinear chain stays constant") {
    // With f_N the identity, A_N = 0, and no nonlinear noise, the update
    // reduces to x^N_{l+1} = x^N_l.
    CLGModel m = zero_model();
    m.f_N = [](int, const Vector& xn) { return xn; };
    m.init_nonlinear_sampler = [](RandomStream&) { return scalar(0.37); };
    RandomStream rng(5);
    const Trajectory traj = simulate(m, 6, rng);
    for (std::size_t i = 0; i < 6; ++i) CHECK(traj.nonlinear_states[i][0] == 0.37);

    // Spec-literal variant: f_N = 0 forces the chain to zero from step 2 on,
    // so with a zero start it is constant as well.
    RandomStream rng2(5);
    const Trajectory z = simulate(zero_model(), 6, rng2);
    for (std::size_t i = 0; i < 6; ++i) CHECK(z.nonlinear_states[i][0] == 0.0);
}

TEST_CASE("simulate consumes draws in the documented order") {
    // Order per step: measurement noise, then linear process noise, then
    // nonlinear process noise; initialization draws linear before nonlinear.
    const CLGModel model = benchmark_model();
    RandomStream used(1234);
    SimulationRecord record;
    (void)simulate(model, 2, used, &record);
    RandomStream fresh(1234);
    // init: 3 linear + 1 nonlinear; step 1: 2 meas + 3 linear + 1 nonlinear;
    // step 2: 2 meas. Total 12 normal draws.
    for (int i = 0; i < 4; ++i) (void)fresh.normal();
    for (int i = 0; i < 2; ++i) CHECK(record.noise_meas[0][i] == 1e-2 * fresh.normal());
    for (int i = 0; i < 3; ++i) CHECK(record.noise_linear[0][i] == 5e-3 * fresh.normal());
    CHECK(record.noise_nonlinear[0][0] == 5e-3 * fresh.normal());
    for (int i = 0; i < 2; ++i) (void)fresh.normal();
    CHECK(used.uniform() == fresh.uniform());
}

TEST_CASE("simulate: recorded noises satisfy the reconstruction identities") {
    const CLGModel model = benchmark_model();
    RandomStream rng(2024);
    SimulationRecord record;
    const Trajectory traj = simulate(model, 50, rng, &record);
    REQUIRE(record.noise_linear.size() == 49);
    REQUIRE(record.noise_nonlinear.size() == 49);
    REQUIRE(record.noise_meas.size() == 50);

    for (int l = 1; l < 50; ++l) {
        const Vector& xn = traj.nonlinear_states[l - 1];
        const Vector& xl = traj.linear_states[l - 1];

        // z^(L) minus the linear contribution recovers the nonlinear noise.
        const PseudoMeasurement zl =
            pseudo_z_L(model, l, xn, traj.nonlinear_states[l]);
        const Vector wn = zl.value - model.A_N(l, xn) * xl;
        CHECK((wn - record.noise_nonlinear[l - 1]).norm() < 1e-12);

        // z^(N) minus the nonlinear contribution recovers the linear noise.
        const PseudoMeasurement zn =
            pseudo_z_N(model, l, xl, traj.linear_states[l], xn);
        const Vector wl = zn.value - model.f_L(l, xn);
        CHECK((wl - record.noise_linear[l - 1]).norm() < 1e-12);
    }
    for (int l = 1; l <= 50; ++l) {
        const Vector& xn = traj.nonlinear_states[l - 1];
        const Vector& xl = traj.linear_states[l - 1];
        const Vector e = traj.measurements[l - 1] - model.h(l, xn) - model.B(l, xn) * xl;
        CHECK((e - record.noise_meas[l - 1]).norm() < 1e-12);
    }
}

TEST_CASE("pseudo_z_L: definition cases") {
    CLGModel m = zero_model();
    SUBCASE("zero f_N passes the successor through") {
        const auto p = pseudo_z_L(m, 1, scalar(0.3), scalar(1.7));
        CHECK(p.kind == PseudoKind::LinearSide);
        CHECK(p.value[0] == 1.7);
    }
    SUBCASE("successor equal to f_N gives zero") {
        m.f_N = [](int, const Vector& xn) { return (2.0 * xn).eval(); };
        const auto p = pseudo_z_L(m, 1, scalar(0.3), scalar(0.6));
        CHECK(p.value[0] == 0.0);
    }
    SUBCASE("benchmark arctan dynamics") {
        const CLGModel bench = benchmark_model();
        const auto p = pseudo_z_L(bench, 1, scalar(0.0), scalar(0.5));
        CHECK(p.value[0] == doctest::Approx(0.5).epsilon(1e-14));
    }
}

TEST_CASE("pseudo_z_N: definition cases") {
    SUBCASE("zero A_L passes the successor through") {
        const CLGModel m = zero_model();
        Vector next(2);
        next << 4.0, -1.0;
        const auto p = pseudo_z_N(m, 1, Vector::Zero(2), next, scalar(0.0));
        CHECK(p.kind == PseudoKind::NonlinearSide);
        CHECK(p.value == next);
    }
    SUBCASE("noiseless linear step with zero f_L gives zero") {
        const CLGModel bench = benchmark_model();
        Vector xl(3);
        xl << 0.5, -0.2, 1.0;
        const Vector xn = scalar(0.1);
        const Vector next = bench.A_L(1, xn) * xl;
        const auto p = pseudo_z_N(bench, 1, xl, next, xn);
        CHECK(p.value.isZero(0.0));
    }
    SUBCASE("benchmark hand arithmetic") {
        const CLGModel bench = benchmark_model();
        Vector xl(3);
        xl << 1.0, 2.0, 3.0;
        Vector next(3);
        next << 2.0, 2.0, 2.0;
        // A_L (1,2,3)^T = (1.2, 0.8, 2.5)^T.
        const auto p = pseudo_z_N(bench, 1, xl, next, scalar(0.0));
        CHECK(p.value[0] == doctest::Approx(0.8).epsilon(1e-12));
        CHECK(p.value[1] == doctest::Approx(1.2).epsilon(1e-12));
        CHECK(p.value[2] == doctest::Approx(-0.5).epsilon(1e-12));
    }
}

TEST_CASE("benchmark_model: published coefficients") {
    const CLGModel m = benchmark_model();
    CHECK(m.dim_linear == 3);
    CHECK(m.dim_nonlinear == 1);
    CHECK(m.dim_meas == 2);

    const Vector xn = scalar(0.0);
    const Matrix a_l = m.A_L(1, xn);
    CHECK(a_l.row(0).sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(a_l.row(1).sum() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(a_l.row(2).sum() == doctest::Approx(0.9).epsilon(1e-14));

    const Matrix a_n = m.A_N(1, xn);
    CHECK(a_n(0, 0) == 0.9);
    CHECK(a_n(0, 1) == 0.0);
    CHECK(a_n(0, 2) == 0.0);

    CHECK(m.f_N(1, scalar(0.5))[0] == std::atan(0.5));

    const Vector f_l = m.f_L(3, scalar(0.25));
    CHECK(f_l[0] == std::cos(0.25));
    CHECK(f_l[1] == -std::sin(0.25));
    CHECK(f_l[2] == 0.5 * std::sin(0.5));

    CHECK(m.h(1, scalar(2.0))[0] == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(m.h(1, scalar(2.0))[1] == 0.0);
    CHECK(m.h(1, scalar(-2.0))[0] == doctest::Approx(-0.4).epsilon(1e-14));
    CHECK(m.h(1, scalar(0.0))[0] == 0.0);

    const Matrix b = m.B(1, xn);
    CHECK(b.row(0).isZero(0.0));
    CHECK(b(1, 0) == 1.0);
    CHECK(b(1, 1) == -1.0);
    CHECK(b(1, 2) == 1.0);

    CHECK(m.cov_w_L == (2.5e-5 * Matrix::Identity(3, 3)).eval());
    CHECK(m.cov_w_N(0, 0) == 2.5e-5);
    CHECK(m.cov_e == (1e-4 * Matrix::Identity(2, 2)).eval());

    CHECK(m.init_linear.mean.isZero(0.0));
    CHECK(m.init_linear.cov == (1e-3 * Matrix::Identity(3, 3)).eval());
}

TEST_CASE("benchmark_model rejects nonpositive noise levels") {
    CHECK_THROWS_AS(benchmark_model(0.0, 5e-3, 1e-2), ConfigError);
    CHECK_THROWS_AS(benchmark_model(5e-3, -1.0, 1e-2), ConfigError);
    CHECK_THROWS_AS(benchmark_model(5e-3, 5e-3, 0.0), ConfigError);
}

TEST_CASE("validate accepts the benchmark and rejects malformed models") {
    CHECK_NOTHROW(validate(benchmark_model()));

    SUBCASE("wrong-shape callable") {
        CLGModel bad = benchmark_model();
        bad.A_L = [](int, const Vector&) { return Matrix::Zero(2, 2); };
        CHECK_THROWS_AS(validate(bad), DimensionMismatch);
    }
    SUBCASE("wrong-length nonlinear drift") {
        CLGModel bad = benchmark_model();
        bad.f_N = [](int, const Vector&) { return Vector::Zero(2); };
        CHECK_THROWS_AS(validate(bad), DimensionMismatch);
    }
    SUBCASE("indefinite measurement covariance") {
        CLGModel bad = benchmark_model();
        bad.cov_e = -Matrix::Identity(2, 2);
        CHECK_THROWS_AS(validate(bad), NonPositiveDefinite);
    }
    SUBCASE("init dimension mismatch") {
        CLGModel bad = benchmark_model();
        bad.init_linear = GaussianMoment{Vector::Zero(2), Matrix::Identity(2, 2)};
        CHECK_THROWS_AS(validate(bad), DimensionMismatch);
    }
}
