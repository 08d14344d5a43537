// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors
//
// Particle-set mechanics: normalization, ESS, resampling, means, jitter.
// Statistical checks (multinomial frequencies, chi-squared multiplicity) use
// fixed seeds and 3-sigma / p>0.001 bounds.

#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "clgfilt/errors.hpp"
#include "clgfilt/particles.hpp"
#include "clgfilt/rng.hpp"

using namespace clgfilt;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector scalar(double x) {
    Vector v(1);
    v << x;
    return v;
}

ParticleCloud make_cloud(std::vector<double> values, std::vector<double> log_weights) {
    ParticleCloud cloud;
    for (double v : values) cloud.particles.push_back(scalar(v));
    cloud.log_weights = std::move(log_weights);
    return cloud;
}

double logsumexp(const std::vector<double>& logs) {
    double m = -kInf;
    for (double v : logs) m = std::max(m, v);
    if (!std::isfinite(m)) return -kInf;
    double s = 0.0;
    for (double v : logs) s += std::exp(v - m);
    return m + std::log(s);
}

} // namespace

TEST_CASE("normalize: uniform log-weights become 1/N and return the log-sum") {
    auto cloud = make_cloud({1.0, 2.0, 3.0, 4.0}, {0.7, 0.7, 0.7, 0.7});
    const double total = normalize(cloud);
    CHECK(total == doctest::Approx(0.7 + std::log(4.0)).epsilon(1e-12));
    for (double lw : cloud.log_weights) {
        CHECK(std::exp(lw) == doctest::Approx(0.25).epsilon(1e-12));
    }
    CHECK(std::abs(logsumexp(cloud.log_weights)) < 1e-10);
}

TEST_CASE("normalize: weights proportional to (2,1,1) become (0.5,0.25,0.25)") {
    auto cloud = make_cloud({0.0, 0.0, 0.0}, {std::log(2.0), 0.0, 0.0});
    const double total = normalize(cloud);
    CHECK(total == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(std::exp(cloud.log_weights[0]) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::exp(cloud.log_weights[1]) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(std::exp(cloud.log_weights[2]) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("normalize: single particle gets weight one") {
    auto cloud = make_cloud({5.0}, {-3.2});
    const double total = normalize(cloud);
    CHECK(total == doctest::Approx(-3.2).epsilon(1e-12));
    CHECK(cloud.log_weights[0] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("normalize: all-zero weights throw AllWeightsZero") {
    auto cloud = make_cloud({1.0, 2.0}, {-kInf, -kInf});
    CHECK_THROWS_AS(normalize(cloud), AllWeightsZero);
}

TEST_CASE("normalize is idempotent") {
    auto cloud = make_cloud({1.0, 2.0, 3.0}, {0.3, -1.7, 2.2});
    normalize(cloud);
    const std::vector<double> first = cloud.log_weights;
    const double second_total = normalize(cloud);
    CHECK(std::abs(second_total) < 1e-12);
    for (std::size_t j = 0; j < first.size(); ++j) {
        CHECK(cloud.log_weights[j] == doctest::Approx(first[j]).epsilon(1e-12));
    }
}

TEST_CASE("ess: uniform weights give N_p, a point mass gives 1") {
    auto uniform = make_cloud({0.0, 1.0, 2.0, 3.0, 4.0}, {0, 0, 0, 0, 0});
    normalize(uniform);
    CHECK(ess(uniform) == doctest::Approx(5.0).epsilon(1e-12));

    auto point = make_cloud({0.0, 1.0}, {0.0, -kInf});
    normalize(point);
    CHECK(ess(point) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ess: weights (0.5,0.25,0.25) give 8/3") {
    auto cloud = make_cloud({0.0, 0.0, 0.0}, {std::log(2.0), 0.0, 0.0});
    normalize(cloud);
    CHECK(ess(cloud) == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("resample: point-mass weights map every ancestor to that particle") {
    auto cloud = make_cloud({7.0, 8.0, 9.0}, {0.0, -kInf, -kInf});
    normalize(cloud);
    for (ResampleScheme scheme : {ResampleScheme::Systematic, ResampleScheme::Multinomial}) {
        RandomStream rng(11);
        auto [resampled, plan] = resample(cloud, scheme, rng);
        REQUIRE(plan.ancestor_indices.size() == 3);
        for (std::size_t a : plan.ancestor_indices) CHECK(a == 0);
        for (const auto& p : resampled.particles) CHECK(p[0] == 7.0);
        for (double lw : resampled.log_weights) {
            CHECK(lw == doctest::Approx(-std::log(3.0)).epsilon(1e-14));
        }
    }
}

TEST_CASE("resample: systematic scheme under uniform weights is the identity") {
    auto cloud = make_cloud({1.0, 2.0, 3.0, 4.0, 5.0, 6.0}, {0, 0, 0, 0, 0, 0});
    normalize(cloud);
    RandomStream rng(42);
    auto [resampled, plan] = resample(cloud, ResampleScheme::Systematic, rng);
    CHECK(plan.scheme == ResampleScheme::Systematic);
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK(plan.ancestor_indices[k] == k);
        CHECK(resampled.particles[k][0] == cloud.particles[k][0]);
    }
}

TEST_CASE("resample: systematic consumes exactly one uniform draw") {
    auto cloud = make_cloud({1.0, 2.0, 3.0, 4.0}, {0.1, -0.4, 0.2, 0.0});
    normalize(cloud);
    RandomStream used(314);
    auto result = resample(cloud, ResampleScheme::Systematic, used);
    (void)result;
    RandomStream fresh(314);
    (void)fresh.uniform(); // the single resampling draw
    CHECK(used.uniform() == fresh.uniform());
}

TEST_CASE("resample: multinomial consumes exactly N_p uniform draws") {
    auto cloud = make_cloud({1.0, 2.0, 3.0, 4.0}, {0.1, -0.4, 0.2, 0.0});
    normalize(cloud);
    RandomStream used(314);
    auto result = resample(cloud, ResampleScheme::Multinomial, used);
    (void)result;
    RandomStream fresh(314);
    for (int k = 0; k < 4; ++k) (void)fresh.uniform();
    CHECK(used.uniform() == fresh.uniform());
}

TEST_CASE("resample: multinomial ancestor frequency matches the weights (3-sigma)") {
    auto cloud = make_cloud({0.0, 1.0}, {std::log(0.9), std::log(0.1)});
    normalize(cloud);
    RandomStream rng(2718);
    const int trials = 50000; // two ancestor draws per trial -> 1e5 draws
    long hits0 = 0;
    long draws = 0;
    for (int t = 0; t < trials; ++t) {
        auto [resampled, plan] = resample(cloud, ResampleScheme::Multinomial, rng);
        for (std::size_t a : plan.ancestor_indices) {
            hits0 += (a == 0) ? 1 : 0;
            ++draws;
        }
    }
    const double freq = static_cast<double>(hits0) / static_cast<double>(draws);
    const double sigma = std::sqrt(0.9 * 0.1 / static_cast<double>(draws));
    CHECK(std::abs(freq - 0.9) < 3.0 * sigma);
}

TEST_CASE("resample: multinomial multiplicities pass a chi-squared test") {
    auto cloud = make_cloud({0.0, 1.0, 2.0}, {std::log(0.2), std::log(0.3), std::log(0.5)});
    normalize(cloud);
    RandomStream rng(99991);
    const int trials = 10000;
    long counts[3] = {0, 0, 0};
    for (int t = 0; t < trials; ++t) {
        auto [resampled, plan] = resample(cloud, ResampleScheme::Multinomial, rng);
        for (std::size_t a : plan.ancestor_indices) ++counts[a];
    }
    const double n = 3.0 * trials;
    const double expected[3] = {0.2 * n, 0.3 * n, 0.5 * n};
    double chi2 = 0.0;
    for (int j = 0; j < 3; ++j) {
        const double d = static_cast<double>(counts[j]) - expected[j];
        chi2 += d * d / expected[j];
    }
    // df = 2, p > 0.001 <=> chi2 below the 13.816 quantile.
    CHECK(chi2 < 13.816);
}

TEST_CASE("resample preserves particle support") {
    auto cloud = make_cloud({-2.0, -1.0, 0.5, 3.0, 10.0}, {0.2, -0.8, 1.1, -0.3, 0.0});
    normalize(cloud);
    for (ResampleScheme scheme : {ResampleScheme::Systematic, ResampleScheme::Multinomial}) {
        RandomStream rng(7);
        auto [resampled, plan] = resample(cloud, scheme, rng);
        for (std::size_t k = 0; k < resampled.particles.size(); ++k) {
            const std::size_t a = plan.ancestor_indices[k];
            REQUIRE(a < cloud.particles.size());
            CHECK(resampled.particles[k] == cloud.particles[a]);
        }
    }
}

TEST_CASE("center_of_mass: equal-weight average regardless of weights") {
    auto cloud = make_cloud({1.0, 2.0, 3.0}, {5.0, -2.0, 0.0});
    CHECK(center_of_mass(cloud)[0] == doctest::Approx(2.0).epsilon(1e-14));

    auto pair = make_cloud({-1.0, 1.0}, {0.0, 0.0});
    CHECK(center_of_mass(pair)[0] == doctest::Approx(0.0).epsilon(1e-14));

    auto same = make_cloud({4.5, 4.5, 4.5, 4.5}, {0, 0, 0, 0});
    CHECK(center_of_mass(same)[0] == 4.5);
}

TEST_CASE("weighted_mean: normalized-weight average") {
    auto point = make_cloud({5.0, 9.0}, {0.0, -kInf});
    normalize(point);
    CHECK(weighted_mean(point)[0] == doctest::Approx(5.0).epsilon(1e-14));

    auto skewed = make_cloud({0.0, 4.0}, {std::log(0.25), std::log(0.75)});
    normalize(skewed);
    CHECK(weighted_mean(skewed)[0] == doctest::Approx(3.0).epsilon(1e-12));

    auto uniform = make_cloud({1.0, 2.0, 6.0}, {0.0, 0.0, 0.0});
    normalize(uniform);
    CHECK(weighted_mean(uniform)[0] ==
          doctest::Approx(center_of_mass(uniform)[0]).epsilon(1e-12));
}

TEST_CASE("jitter: diagonal inflation and exact eigenvalue shift") {
    Matrix eye = Matrix::Identity(3, 3);
    CHECK(jitter(eye, 0.0) == eye);
    CHECK(jitter(eye, 0.5) == (1.5 * eye).eval());

    Matrix spd(2, 2);
    spd << 2.0, 0.3, 0.3, 1.0;
    const double amount = 0.125;
    Eigen::SelfAdjointEigenSolver<Matrix> before(spd);
    Eigen::SelfAdjointEigenSolver<Matrix> after(jitter(spd, amount));
    for (Eigen::Index i = 0; i < 2; ++i) {
        CHECK(after.eigenvalues()[i] ==
              doctest::Approx(before.eigenvalues()[i] + amount).epsilon(1e-12));
    }
}

TEST_CASE("default_jitter_amount: 1e-6 of the mean diagonal") {
    Matrix spd(2, 2);
    spd << 3.0, 0.0, 0.0, 1.0;
    CHECK(default_jitter_amount(spd) == doctest::Approx(1e-6 * 2.0).epsilon(1e-14));
}

TEST_CASE("empty cloud is rejected") {
    ParticleCloud empty;
    CHECK_THROWS_AS(normalize(empty), EmptyMixture);
    CHECK_THROWS_AS(center_of_mass(empty), EmptyMixture);
}
