// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "clgfilt/filters.hpp"
#include "clgfilt/model.hpp"
#include "clgfilt/op_counters.hpp"

namespace clgfilt::bench {

/// Algorithm selector for one benchmark entry. Truth replays the simulated
/// states as estimates; it calibrates the harness itself (its RMSE is exactly
/// zero) and is not a real filter.
enum class Algorithm { Mpf, Smpf1, Smpf2, Tf, Truth };

std::string to_string(Algorithm algorithm);

/// Accepts the lower-case names "mpf", "smpf1", "smpf2", "tf", "truth".
/// Throws ConfigError on anything else.
Algorithm parse_algorithm(const std::string& name);

/// Maps a benchmark algorithm onto the filter it drives. Throws ConfigError
/// for Truth, which has no filter behind it.
FilterKind to_filter_kind(Algorithm algorithm);

/// One competitor in an experiment. The label names the CSV `algorithm`
/// column; when empty it defaults to to_string(algorithm). Distinct labels
/// let two entries share an algorithm but differ in configuration (for
/// example tf at different iteration counts).
struct FilterEntry {
    Algorithm algorithm = Algorithm::Mpf;
    FilterConfig config;
    std::string label;

    std::string effective_label() const {
        return label.empty() ? to_string(algorithm) : label;
    }
};

/// Scalar noise levels of the built-in benchmark system (isotropic
/// covariances sigma^2 I); see benchmark_model for the dynamics.
struct ModelParams {
    double sigma_w_linear = 5e-3;
    double sigma_w_nonlinear = 5e-3;
    double sigma_e = 1e-2;
};

/// What the experiment varies across its grid. NParticles substitutes each
/// sweep value for every entry's particle count; SigmaE rebuilds the model
/// with the swept measurement noise. None runs the single configured point.
enum class SweepAxis { None, NParticles, SigmaE };

std::string to_string(SweepAxis axis);

/// Nonlinear-estimate error norm beyond which a step counts as a tracking
/// loss. Calibrated once against this project's benchmark system: ten times
/// the long-run RMSE of the mpf nonlinear estimate at n_particles = 300
/// (aggregate over 50 runs of 200 steps, base_seed 1), rounded to two
/// significant digits. Config-exposed for other models.
inline constexpr double kDefaultLossThreshold = 0.098;

/// Full description of one Monte-Carlo experiment.
struct ExperimentConfig {
    ModelParams model;
    std::vector<FilterEntry> filters;
    int n_runs = 50;
    int horizon = 200;
    std::uint64_t base_seed = 1;
    SweepAxis sweep_axis = SweepAxis::None;
    /// Sweep points; NParticles values must be positive integers. Ignored
    /// (and required empty) when sweep_axis is None.
    std::vector<double> sweep_values;
    double loss_threshold = kDefaultLossThreshold;
    /// When false (the default) wall_ms is reported as 0 so that fixed-seed
    /// outputs are byte-identical across executions; timing is opt-in.
    bool measure_wall_time = false;
    /// Worker threads for independent runs; 1 is the serial reference.
    int jobs = 1;
};

/// Throws ConfigError (naming the offending field) on invalid settings.
void validate(const ExperimentConfig& config);

/// One CSV row. run >= 1 identifies a Monte-Carlo repetition; run == -1
/// marks the aggregate row of its (algorithm, sweep point) cell, in which
/// rmse columns hold the square root of the mean per-run MSE and the
/// additive columns (tracking_losses, the operation counters, wall_ms) hold
/// sums over the cell's runs.
struct ResultRow {
    std::string algorithm;
    int n_particles = 0;
    int n_iterations = 0;
    double sigma_e = 0.0;
    double sigma_w_l = 0.0;
    double sigma_w_n = 0.0;
    int run = 0;
    double rmse_l = 0.0;
    double rmse_n = 0.0;
    std::int64_t tracking_losses = 0;
    std::int64_t cholesky_count = 0;
    std::int64_t inversion_count = 0;
    double wall_ms = 0.0;
    /// Per-run rows: the trajectory seed of that run. Aggregate rows: the
    /// experiment base seed.
    std::uint64_t seed = 0;
};

/// Experiment results plus the `#` metadata lines that precede the CSV
/// header (seeds and settings, so any figure is regenerable from its file).
struct ResultTable {
    std::vector<ResultRow> rows;
    std::uint64_t base_seed = 0;
    std::vector<std::string> metadata;
};

/// Trajectory and filter seeds for run r (1-based), shared by every
/// algorithm and sweep point so that comparisons are paired and adding runs
/// or sweep points never perturbs earlier ones.
std::uint64_t trajectory_seed(std::uint64_t base_seed, int run);
std::uint64_t filter_seed(std::uint64_t base_seed, int run);

/// Runs the full grid (sweep points x filters x runs). Per-run rows appear
/// in deterministic (sweep, filter, run) order, each cell followed by its
/// aggregate row, regardless of the worker count. A run that throws is
/// recorded as a metadata line and excluded from its aggregate instead of
/// aborting the experiment.
ResultTable run_experiment(const ExperimentConfig& config);

/// Plain-text CSV: metadata lines prefixed "# ", then the fixed header, then
/// one line per row. Floating-point columns carry 17 significant digits so
/// a read-back reproduces every double bit-exactly. Throws Error on IO
/// failure.
void write_csv(const ResultTable& table, std::ostream& out);
void write_csv(const ResultTable& table, const std::string& path);

/// Inverse of write_csv (used by tests and the plot emitter); tolerates
/// arbitrary `#` comments. Throws Error on IO failure or malformed content.
ResultTable read_csv(std::istream& in);
ResultTable read_csv(const std::string& path);

/// Writes one curve file per algorithm label, named <prefix><label>.csv
/// inside the directory, with header x,rmse_l,rmse_n and one row per sweep
/// point (ascending x). Rows come from the aggregate rows only; x is the
/// swept quantity (particle count when nothing is swept). Returns the
/// written paths in label order.
std::vector<std::string> emit_plot_data(const ResultTable& table, SweepAxis axis,
                                        const std::string& directory,
                                        const std::string& prefix = "curve_");

} // namespace clgfilt::bench
