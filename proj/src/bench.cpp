// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors

#include "clgfilt/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "clgfilt/errors.hpp"
#include "clgfilt/rng.hpp"

namespace clgfilt::bench {
namespace {

constexpr char kCsvHeader[] =
    "algorithm,n_particles,n_iterations,sigma_e,sigma_w_l,sigma_w_n,run,"
    "rmse_l,rmse_n,tracking_losses,cholesky_count,inversion_count,wall_ms,seed";

/// Data columns carry 17 significant digits: enough for any double to
/// round-trip bit-exactly through text.
std::string data_digits(double value) { return fmt::format("{:.17g}", value); }

void require_positive_finite(double value, const char* name) {
    if (!std::isfinite(value) || value <= 0.0) {
        throw ConfigError(fmt::format("{}: must be positive and finite, got {}", name, value));
    }
}

bool label_char_ok(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-' || c == '.' || c == '+';
}

int sweep_point_count(const ExperimentConfig& config) {
    return config.sweep_axis == SweepAxis::None
               ? 1
               : static_cast<int>(config.sweep_values.size());
}

ModelParams swept_params(const ExperimentConfig& config, int sweep_idx) {
    ModelParams params = config.model;
    if (config.sweep_axis == SweepAxis::SigmaE) {
        params.sigma_e = config.sweep_values[static_cast<std::size_t>(sweep_idx)];
    }
    return params;
}

FilterConfig swept_filter_config(const ExperimentConfig& config, int sweep_idx,
                                 const FilterEntry& entry) {
    FilterConfig filter_config = entry.config;
    if (config.sweep_axis == SweepAxis::NParticles) {
        filter_config.n_particles =
            static_cast<int>(config.sweep_values[static_cast<std::size_t>(sweep_idx)]);
    }
    return filter_config;
}

double rmse(const std::vector<Vector>& estimates, const std::vector<Vector>& truth) {
    double sum_sq = 0.0;
    std::size_t n_terms = 0;
    for (std::size_t l = 0; l < truth.size(); ++l) {
        sum_sq += (estimates[l] - truth[l]).squaredNorm();
        n_terms += static_cast<std::size_t>(truth[l].size());
    }
    return std::sqrt(sum_sq / static_cast<double>(n_terms));
}

/// A step is lost when the filter's total weight underflowed there or the
/// nonlinear estimate strayed beyond the threshold; each step counts once.
std::int64_t count_tracking_losses(const std::vector<Vector>& est_nonlinear,
                                   const std::vector<Vector>& truth_nonlinear,
                                   const std::vector<int>& weight_resets, double threshold) {
    std::int64_t losses = 0;
    std::size_t next_reset = 0;
    for (std::size_t l = 0; l < truth_nonlinear.size(); ++l) {
        bool reset_here = false;
        if (next_reset < weight_resets.size() &&
            weight_resets[next_reset] == static_cast<int>(l) + 1) {
            reset_here = true;
            ++next_reset;
        }
        const double error_norm = (est_nonlinear[l] - truth_nonlinear[l]).norm();
        if (reset_here || error_norm > threshold) {
            ++losses;
        }
    }
    return losses;
}

struct Job {
    int sweep_idx = 0;
    int filter_idx = 0;
    int run = 1;
};

struct JobOutcome {
    ResultRow row;
    bool failed = false;
    std::string error;
};

JobOutcome execute_job(const ExperimentConfig& config, const Job& job) {
    JobOutcome outcome;
    const FilterEntry& entry = config.filters[static_cast<std::size_t>(job.filter_idx)];
    const ModelParams params = swept_params(config, job.sweep_idx);
    const FilterConfig filter_config = swept_filter_config(config, job.sweep_idx, entry);

    ResultRow& row = outcome.row;
    row.algorithm = entry.effective_label();
    row.n_particles = filter_config.n_particles;
    row.n_iterations = filter_config.n_iterations;
    row.sigma_e = params.sigma_e;
    row.sigma_w_l = params.sigma_w_linear;
    row.sigma_w_n = params.sigma_w_nonlinear;
    row.run = job.run;
    row.seed = trajectory_seed(config.base_seed, job.run);

    try {
        const CLGModel model =
            benchmark_model(params.sigma_w_linear, params.sigma_w_nonlinear, params.sigma_e);
        RandomStream rng(row.seed);
        const Trajectory truth = simulate(model, config.horizon, rng);

        std::vector<Vector> est_linear;
        std::vector<Vector> est_nonlinear;
        std::vector<int> weight_resets;
        const auto started = std::chrono::steady_clock::now();
        if (entry.algorithm == Algorithm::Truth) {
            est_linear = truth.linear_states;
            est_nonlinear = truth.nonlinear_states;
        } else {
            FilterConfig run_config = filter_config;
            run_config.seed = filter_seed(config.base_seed, job.run);
            FilterOutput output = run_filter(model, truth.measurements,
                                             to_filter_kind(entry.algorithm), run_config);
            est_linear = std::move(output.est_linear);
            est_nonlinear = std::move(output.est_nonlinear);
            weight_resets = std::move(output.weight_resets);
            row.cholesky_count = output.counters.cholesky_count;
            row.inversion_count = output.counters.inversion_count;
        }
        const auto finished = std::chrono::steady_clock::now();

        row.rmse_l = rmse(est_linear, truth.linear_states);
        row.rmse_n = rmse(est_nonlinear, truth.nonlinear_states);
        row.tracking_losses = count_tracking_losses(est_nonlinear, truth.nonlinear_states,
                                                    weight_resets, config.loss_threshold);
        if (config.measure_wall_time) {
            row.wall_ms =
                std::chrono::duration<double, std::milli>(finished - started).count();
        }
    } catch (const std::exception& failure) {
        outcome.failed = true;
        outcome.error = failure.what();
    }
    return outcome;
}

std::vector<std::string> initial_metadata(const ExperimentConfig& config) {
    std::vector<std::string> lines;
    lines.push_back("clgfilt bench results");
    lines.push_back(fmt::format("base_seed={}", config.base_seed));
    lines.push_back(fmt::format("horizon={} n_runs={} jobs={}", config.horizon, config.n_runs,
                                config.jobs));
    lines.push_back(fmt::format("model sigma_w_linear={} sigma_w_nonlinear={} sigma_e={}",
                                config.model.sigma_w_linear, config.model.sigma_w_nonlinear,
                                config.model.sigma_e));
    std::string sweep = fmt::format("sweep_axis={}", to_string(config.sweep_axis));
    if (config.sweep_axis != SweepAxis::None) {
        sweep += " values=";
        for (std::size_t i = 0; i < config.sweep_values.size(); ++i) {
            if (i > 0) {
                sweep += ';';
            }
            sweep += fmt::format("{}", config.sweep_values[i]);
        }
    }
    lines.push_back(std::move(sweep));
    lines.push_back(fmt::format("loss_threshold={}", config.loss_threshold));
    lines.push_back(fmt::format("timing={}", config.measure_wall_time ? "on" : "off"));
    lines.push_back(
        "seed_scheme trajectory=derive_seed(base_seed,run,0) filter=derive_seed(base_seed,run,1)");
    std::string filters = "filters";
    for (const FilterEntry& entry : config.filters) {
        filters += fmt::format(" {}:{}(np={},nit={})", entry.effective_label(),
                               to_string(entry.algorithm), entry.config.n_particles,
                               entry.config.n_iterations);
    }
    lines.push_back(std::move(filters));
    return lines;
}

/// Locale-independent numeric parsing (the format pins '.' as the decimal
/// point); unlike std::stod it also accepts subnormal magnitudes.
template <typename T>
T parse_number(const std::string& field) {
    T value{};
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw Error(fmt::format("unparsable numeric field '{}'", field));
    }
    return value;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string::size_type start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::string format_row(const ResultRow& row) {
    return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}", row.algorithm,
                       row.n_particles, row.n_iterations, data_digits(row.sigma_e),
                       data_digits(row.sigma_w_l), data_digits(row.sigma_w_n), row.run,
                       data_digits(row.rmse_l), data_digits(row.rmse_n), row.tracking_losses,
                       row.cholesky_count, row.inversion_count, data_digits(row.wall_ms),
                       row.seed);
}

} // namespace

std::string to_string(Algorithm algorithm) {
    switch (algorithm) {
    case Algorithm::Mpf:
        return "mpf";
    case Algorithm::Smpf1:
        return "smpf1";
    case Algorithm::Smpf2:
        return "smpf2";
    case Algorithm::Tf:
        return "tf";
    case Algorithm::Truth:
        return "truth";
    }
    throw ConfigError("algorithm: unrecognized enumerator");
}

Algorithm parse_algorithm(const std::string& name) {
    if (name == "mpf") {
        return Algorithm::Mpf;
    }
    if (name == "smpf1") {
        return Algorithm::Smpf1;
    }
    if (name == "smpf2") {
        return Algorithm::Smpf2;
    }
    if (name == "tf") {
        return Algorithm::Tf;
    }
    if (name == "truth") {
        return Algorithm::Truth;
    }
    throw ConfigError(fmt::format(
        "algorithm: unknown name '{}' (expected mpf, smpf1, smpf2, tf, or truth)", name));
}

FilterKind to_filter_kind(Algorithm algorithm) {
    switch (algorithm) {
    case Algorithm::Mpf:
        return FilterKind::Mpf;
    case Algorithm::Smpf1:
        return FilterKind::Smpf1;
    case Algorithm::Smpf2:
        return FilterKind::Smpf2;
    case Algorithm::Tf:
        return FilterKind::Tf;
    case Algorithm::Truth:
        break;
    }
    throw ConfigError("algorithm: truth is an oracle, not a runnable filter");
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::None:
        return "none";
    case SweepAxis::NParticles:
        return "n_particles";
    case SweepAxis::SigmaE:
        return "sigma_e";
    }
    throw ConfigError("sweep_axis: unrecognized enumerator");
}

void validate(const ExperimentConfig& config) {
    if (config.filters.empty()) {
        throw ConfigError("filters: at least one entry is required");
    }
    if (config.n_runs < 1) {
        throw ConfigError(fmt::format("n_runs: must be >= 1, got {}", config.n_runs));
    }
    if (config.horizon < 1) {
        throw ConfigError(fmt::format("horizon: must be >= 1, got {}", config.horizon));
    }
    if (config.jobs < 1) {
        throw ConfigError(fmt::format("jobs: must be >= 1, got {}", config.jobs));
    }
    require_positive_finite(config.loss_threshold, "loss_threshold");
    require_positive_finite(config.model.sigma_w_linear, "sigma_w_linear");
    require_positive_finite(config.model.sigma_w_nonlinear, "sigma_w_nonlinear");
    require_positive_finite(config.model.sigma_e, "sigma_e");

    if (config.sweep_axis == SweepAxis::None) {
        if (!config.sweep_values.empty()) {
            throw ConfigError("sweep_values: set a sweep axis before supplying sweep values");
        }
    } else {
        if (config.sweep_values.empty()) {
            throw ConfigError("sweep_values: at least one value is required for a sweep");
        }
        for (const double value : config.sweep_values) {
            require_positive_finite(value, "sweep_values");
            if (config.sweep_axis == SweepAxis::NParticles &&
                (value != std::floor(value) || value < 1.0 ||
                 value > static_cast<double>(std::numeric_limits<int>::max()))) {
                throw ConfigError(fmt::format(
                    "sweep_values: n_particles values must be positive integers, got {}", value));
            }
        }
    }

    std::unordered_set<std::string> labels;
    for (const FilterEntry& entry : config.filters) {
        clgfilt::validate(entry.config);
        const std::string label = entry.effective_label();
        for (const char c : label) {
            if (!label_char_ok(c)) {
                throw ConfigError(fmt::format(
                    "filters: label '{}' may only contain [A-Za-z0-9_.+-]", label));
            }
        }
        if (!labels.insert(label).second) {
            throw ConfigError(fmt::format("filters: duplicate label '{}'", label));
        }
    }
}

std::uint64_t trajectory_seed(std::uint64_t base_seed, int run) {
    return derive_seed(base_seed, static_cast<std::uint64_t>(run), 0);
}

std::uint64_t filter_seed(std::uint64_t base_seed, int run) {
    return derive_seed(base_seed, static_cast<std::uint64_t>(run), 1);
}

ResultTable run_experiment(const ExperimentConfig& config) {
    validate(config);
    const int n_points = sweep_point_count(config);
    const int n_filters = static_cast<int>(config.filters.size());

    std::vector<Job> jobs;
    jobs.reserve(static_cast<std::size_t>(n_points) * static_cast<std::size_t>(n_filters) *
                 static_cast<std::size_t>(config.n_runs));
    for (int p = 0; p < n_points; ++p) {
        for (int f = 0; f < n_filters; ++f) {
            for (int r = 1; r <= config.n_runs; ++r) {
                jobs.push_back(Job{p, f, r});
            }
        }
    }

    std::vector<JobOutcome> outcomes(jobs.size());
    std::atomic<std::size_t> cursor{0};
    const auto drain = [&config, &jobs, &outcomes, &cursor] {
        for (;;) {
            const std::size_t index = cursor.fetch_add(1);
            if (index >= jobs.size()) {
                return;
            }
            outcomes[index] = execute_job(config, jobs[index]);
        }
    };
    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(config.jobs),
                                                 jobs.size());
    if (n_workers <= 1) {
        drain();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) {
            pool.emplace_back(drain);
        }
        for (std::thread& worker : pool) {
            worker.join();
        }
    }

    ResultTable table;
    table.base_seed = config.base_seed;
    table.metadata = initial_metadata(config);
    std::vector<double> cell_wall(static_cast<std::size_t>(n_points) *
                                      static_cast<std::size_t>(n_filters),
                                  std::numeric_limits<double>::quiet_NaN());

    std::size_t job_index = 0;
    for (int p = 0; p < n_points; ++p) {
        for (int f = 0; f < n_filters; ++f) {
            ResultRow aggregate;
            bool have_template = false;
            double sum_mse_l = 0.0;
            double sum_mse_n = 0.0;
            std::int64_t losses = 0;
            std::int64_t cholesky = 0;
            std::int64_t inversions = 0;
            double wall = 0.0;
            int succeeded = 0;
            for (int r = 1; r <= config.n_runs; ++r, ++job_index) {
                const JobOutcome& outcome = outcomes[job_index];
                if (outcome.failed) {
                    table.metadata.push_back(fmt::format(
                        "failed algorithm={} sweep_index={} run={} error={}",
                        config.filters[static_cast<std::size_t>(f)].effective_label(), p, r,
                        outcome.error));
                    continue;
                }
                table.rows.push_back(outcome.row);
                if (!have_template) {
                    aggregate = outcome.row;
                    have_template = true;
                }
                sum_mse_l += outcome.row.rmse_l * outcome.row.rmse_l;
                sum_mse_n += outcome.row.rmse_n * outcome.row.rmse_n;
                losses += outcome.row.tracking_losses;
                cholesky += outcome.row.cholesky_count;
                inversions += outcome.row.inversion_count;
                wall += outcome.row.wall_ms;
                ++succeeded;
            }
            if (succeeded == 0) {
                table.metadata.push_back(fmt::format(
                    "cell without successful runs: algorithm={} sweep_index={}",
                    config.filters[static_cast<std::size_t>(f)].effective_label(), p));
                continue;
            }
            aggregate.run = -1;
            aggregate.rmse_l = std::sqrt(sum_mse_l / static_cast<double>(succeeded));
            aggregate.rmse_n = std::sqrt(sum_mse_n / static_cast<double>(succeeded));
            aggregate.tracking_losses = losses;
            aggregate.cholesky_count = cholesky;
            aggregate.inversion_count = inversions;
            aggregate.wall_ms = config.measure_wall_time ? wall : 0.0;
            aggregate.seed = config.base_seed;
            table.rows.push_back(aggregate);
            cell_wall[static_cast<std::size_t>(p) * static_cast<std::size_t>(n_filters) +
                      static_cast<std::size_t>(f)] = wall;
        }
    }

    // Informational compute-time variation of each competitor against the
    // first mpf entry, in percent; meaningful only when timing is on.
    if (config.measure_wall_time) {
        int baseline = -1;
        for (int f = 0; f < n_filters; ++f) {
            if (config.filters[static_cast<std::size_t>(f)].algorithm == Algorithm::Mpf) {
                baseline = f;
                break;
            }
        }
        if (baseline >= 0) {
            for (int p = 0; p < n_points; ++p) {
                const double base_wall =
                    cell_wall[static_cast<std::size_t>(p) * static_cast<std::size_t>(n_filters) +
                              static_cast<std::size_t>(baseline)];
                if (!(base_wall > 0.0)) {
                    continue;
                }
                for (int f = 0; f < n_filters; ++f) {
                    if (f == baseline) {
                        continue;
                    }
                    const double wall = cell_wall[static_cast<std::size_t>(p) *
                                                      static_cast<std::size_t>(n_filters) +
                                                  static_cast<std::size_t>(f)];
                    if (std::isnan(wall)) {
                        continue;
                    }
                    table.metadata.push_back(fmt::format(
                        "delta_c algorithm={} sweep_index={} percent={:.2f}",
                        config.filters[static_cast<std::size_t>(f)].effective_label(), p,
                        (wall - base_wall) / base_wall * 100.0));
                }
            }
        }
    }
    return table;
}

void write_csv(const ResultTable& table, std::ostream& out) {
    for (const std::string& line : table.metadata) {
        out << "# " << line << '\n';
    }
    out << kCsvHeader << '\n';
    for (const ResultRow& row : table.rows) {
        out << format_row(row) << '\n';
    }
    if (!out) {
        throw Error("write_csv: stream write failed");
    }
}

void write_csv(const ResultTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(fmt::format("write_csv: cannot open '{}' for writing", path));
    }
    write_csv(table, out);
    out.flush();
    if (!out) {
        throw Error(fmt::format("write_csv: failed while writing '{}'", path));
    }
}

ResultTable read_csv(std::istream& in) {
    ResultTable table;
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line.front() == '#') {
            std::string payload = line.substr(1);
            if (!payload.empty() && payload.front() == ' ') {
                payload.erase(0, 1);
            }
            constexpr char kSeedKey[] = "base_seed=";
            if (payload.rfind(kSeedKey, 0) == 0) {
                try {
                    table.base_seed =
                        parse_number<std::uint64_t>(payload.substr(sizeof(kSeedKey) - 1));
                } catch (const std::exception&) {
                    // Free-form comments are tolerated; only well-formed
                    // base_seed lines populate the field.
                }
            }
            table.metadata.push_back(std::move(payload));
            continue;
        }
        if (!header_seen) {
            if (line != kCsvHeader) {
                throw Error(fmt::format("read_csv: line {}: unexpected header", line_no));
            }
            header_seen = true;
            continue;
        }
        const std::vector<std::string> fields = split_fields(line);
        if (fields.size() != 14) {
            throw Error(fmt::format("read_csv: line {}: expected 14 fields, found {}", line_no,
                                    fields.size()));
        }
        ResultRow row;
        try {
            row.algorithm = fields[0];
            row.n_particles = parse_number<int>(fields[1]);
            row.n_iterations = parse_number<int>(fields[2]);
            row.sigma_e = parse_number<double>(fields[3]);
            row.sigma_w_l = parse_number<double>(fields[4]);
            row.sigma_w_n = parse_number<double>(fields[5]);
            row.run = parse_number<int>(fields[6]);
            row.rmse_l = parse_number<double>(fields[7]);
            row.rmse_n = parse_number<double>(fields[8]);
            row.tracking_losses = parse_number<std::int64_t>(fields[9]);
            row.cholesky_count = parse_number<std::int64_t>(fields[10]);
            row.inversion_count = parse_number<std::int64_t>(fields[11]);
            row.wall_ms = parse_number<double>(fields[12]);
            row.seed = parse_number<std::uint64_t>(fields[13]);
        } catch (const std::exception&) {
            throw Error(fmt::format("read_csv: line {}: malformed numeric field", line_no));
        }
        table.rows.push_back(std::move(row));
    }
    if (!header_seen) {
        throw Error("read_csv: missing header line");
    }
    return table;
}

ResultTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(fmt::format("read_csv: cannot open '{}'", path));
    }
    return read_csv(in);
}

std::vector<std::string> emit_plot_data(const ResultTable& table, SweepAxis axis,
                                        const std::string& directory,
                                        const std::string& prefix) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) {
        throw Error(fmt::format("emit_plot_data: cannot create directory '{}': {}", directory,
                                ec.message()));
    }

    struct CurvePoint {
        double x;
        double rmse_l;
        double rmse_n;
    };
    std::vector<std::pair<std::string, std::vector<CurvePoint>>> curves;
    for (const ResultRow& row : table.rows) {
        if (row.run != -1) {
            continue;
        }
        const double x = axis == SweepAxis::SigmaE ? row.sigma_e
                                                   : static_cast<double>(row.n_particles);
        auto it = std::find_if(curves.begin(), curves.end(),
                               [&row](const auto& curve) { return curve.first == row.algorithm; });
        if (it == curves.end()) {
            curves.emplace_back(row.algorithm, std::vector<CurvePoint>{});
            it = std::prev(curves.end());
        }
        it->second.push_back(CurvePoint{x, row.rmse_l, row.rmse_n});
    }

    std::vector<std::string> written;
    written.reserve(curves.size());
    for (auto& [label, points] : curves) {
        std::stable_sort(points.begin(), points.end(),
                         [](const CurvePoint& a, const CurvePoint& b) { return a.x < b.x; });
        const fs::path path = fs::path(directory) / (prefix + label + ".csv");
        std::ofstream out(path);
        if (!out) {
            throw Error(fmt::format("emit_plot_data: cannot open '{}'", path.string()));
        }
        out << "x,rmse_l,rmse_n\n";
        for (const CurvePoint& point : points) {
            out << fmt::format("{},{},{}\n", data_digits(point.x), data_digits(point.rmse_l),
                               data_digits(point.rmse_n));
        }
        out.flush();
        if (!out) {
            throw Error(fmt::format("emit_plot_data: failed while writing '{}'", path.string()));
        }
        written.push_back(path.string());
    }
    return written;
}

} // namespace clgfilt::bench
