// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors
//
// Command-line driver for the clgfilt library.
//
//   clgfilt simulate   generate a benchmark trajectory file
//   clgfilt filter     run one filter over a fresh or loaded trajectory
//   clgfilt bench      Monte-Carlo filter comparison at a single design point
//   clgfilt sweep      the same comparison across an n_particles or sigma_e grid
//
// Every subcommand accepts --config FILE, a flat `key = value` text file
// (`#` starts a comment) whose keys are the long option names without the
// leading dashes; explicit command-line flags take precedence over config
// values, and unknown config keys are errors. The file is applied by a
// second parse pass that injects `--key=value` tokens for the options the
// command line left unset (CLI11's own config reader only runs on the root
// app, so it cannot serve per-subcommand flat files). Relative output paths
// resolve under --out-dir, which defaults to the CLGFILT_OUT_DIR environment
// variable (falling back to the working directory). With a fixed seed and
// --jobs 1 every output file is byte-identical across executions because
// wall-clock timing is opt-in (--timing) and everything else is
// deterministic. All outputs are UTF-8 with '\n' newlines and '.' decimal
// points; seeds appear in the `#` metadata of every file so any result is
// regenerable from the file alone.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "clgfilt/bench.hpp"
#include "clgfilt/errors.hpp"
#include "clgfilt/filters.hpp"
#include "clgfilt/model.hpp"
#include "clgfilt/rng.hpp"

namespace {

using clgfilt::CLGModel;
using clgfilt::ConfigError;
using clgfilt::FilterConfig;
using clgfilt::FilterOutput;
using clgfilt::RandomStream;
using clgfilt::Trajectory;
using clgfilt::Vector;

std::string digits(double value) { return fmt::format("{:.17g}", value); }

template <typename T>
T parse_number(const std::string& field, const std::string& what) {
    T value{};
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError(fmt::format("{}: unparsable numeric value '{}'", what, field));
    }
    return value;
}

/// Scalar knobs of the built-in benchmark model, mirrored as CLI options.
struct ModelFlags {
    double sigma_wl = 5e-3;
    double sigma_wn = 5e-3;
    double sigma_e = 1e-2;
    double init_var_l = 1e-3;
    double init_var_n = 1e-3;
};

/// The option handles let `filter` detect which values the user set
/// explicitly, so trajectory-file metadata can fill in the rest.
struct ModelOptions {
    CLI::Option* sigma_wl = nullptr;
    CLI::Option* sigma_wn = nullptr;
    CLI::Option* sigma_e = nullptr;
    CLI::Option* init_var_l = nullptr;
    CLI::Option* init_var_n = nullptr;
};

ModelOptions add_model_options(CLI::App& cmd, ModelFlags& flags) {
    ModelOptions opts;
    opts.sigma_wl = cmd.add_option("--sigma-wl", flags.sigma_wl,
                                   "Linear process noise std dev")
                        ->capture_default_str();
    opts.sigma_wn = cmd.add_option("--sigma-wn", flags.sigma_wn,
                                   "Nonlinear process noise std dev")
                        ->capture_default_str();
    opts.sigma_e = cmd.add_option("--sigma-e", flags.sigma_e, "Measurement noise std dev")
                       ->capture_default_str();
    opts.init_var_l = cmd.add_option("--init-var-l", flags.init_var_l,
                                     "Initial linear-state variance")
                          ->capture_default_str();
    opts.init_var_n = cmd.add_option("--init-var-n", flags.init_var_n,
                                     "Initial nonlinear-state variance")
                          ->capture_default_str();
    return opts;
}

CLGModel build_model(const ModelFlags& flags) {
    return clgfilt::benchmark_model(flags.sigma_wl, flags.sigma_wn, flags.sigma_e,
                                    flags.init_var_l, flags.init_var_n);
}

/// Joins a relative path onto the output directory; absolute paths pass
/// through untouched.
std::string resolve_out(const std::string& out_dir, const std::string& path) {
    const std::filesystem::path p(path);
    if (out_dir.empty() || p.is_absolute()) {
        return path;
    }
    return (std::filesystem::path(out_dir) / p).string();
}

std::ofstream open_output(const std::string& path) {
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw clgfilt::Error(fmt::format("cannot open '{}' for writing", path));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory files
//
// Format: `# key = value` metadata lines, then a CSV header and one row per
// step. Values carry 17 significant digits, so a loaded trajectory is
// bit-identical to the simulated one and `simulate` + `filter --traj` equals
// `filter --steps` at the same seeds.
// ---------------------------------------------------------------------------

struct TrajectoryFile {
    Trajectory trajectory;
    ModelFlags model;
    std::uint64_t seed = 0;
};

void write_trajectory(const TrajectoryFile& file, const std::string& path) {
    std::ofstream out = open_output(path);
    const Trajectory& t = file.trajectory;
    const auto d_l = static_cast<int>(t.linear_states.front().size());
    const auto d_n = static_cast<int>(t.nonlinear_states.front().size());
    const auto d_y = static_cast<int>(t.measurements.front().size());
    out << "# clgfilt trajectory\n";
    out << "# model = benchmark\n";
    out << fmt::format("# steps = {}\n", t.length());
    out << fmt::format("# seed = {}\n", file.seed);
    out << fmt::format("# sigma-wl = {}\n", digits(file.model.sigma_wl));
    out << fmt::format("# sigma-wn = {}\n", digits(file.model.sigma_wn));
    out << fmt::format("# sigma-e = {}\n", digits(file.model.sigma_e));
    out << fmt::format("# init-var-l = {}\n", digits(file.model.init_var_l));
    out << fmt::format("# init-var-n = {}\n", digits(file.model.init_var_n));
    out << fmt::format("# d-l = {}\n# d-n = {}\n# d-y = {}\n", d_l, d_n, d_y);
    out << "l";
    for (int i = 1; i <= d_l; ++i) out << fmt::format(",xl{}", i);
    for (int i = 1; i <= d_n; ++i) out << fmt::format(",xn{}", i);
    for (int i = 1; i <= d_y; ++i) out << fmt::format(",y{}", i);
    out << '\n';
    for (std::size_t l = 0; l < t.length(); ++l) {
        out << l + 1;
        for (int i = 0; i < d_l; ++i) out << ',' << digits(t.linear_states[l][i]);
        for (int i = 0; i < d_n; ++i) out << ',' << digits(t.nonlinear_states[l][i]);
        for (int i = 0; i < d_y; ++i) out << ',' << digits(t.measurements[l][i]);
        out << '\n';
    }
    if (!out) {
        throw clgfilt::Error(fmt::format("write failed for '{}'", path));
    }
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string trim(const std::string& s) {
    const std::size_t first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return "";
    }
    const std::size_t last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

TrajectoryFile load_trajectory(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw clgfilt::Error(fmt::format("cannot open trajectory file '{}'", path));
    }
    TrajectoryFile file;
    int d_l = -1;
    int d_n = -1;
    int d_y = -1;
    long steps = -1;
    std::string line;
    // Metadata block: "# key = value" lines until the CSV header.
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (line[0] != '#') {
            break;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            continue; // free-form comment
        }
        const std::string key = trim(line.substr(1, eq - 1));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "model" && value != "benchmark") {
            throw ConfigError(fmt::format("trajectory '{}': unsupported model '{}'", path, value));
        } else if (key == "steps") {
            steps = parse_number<long>(value, key);
        } else if (key == "seed") {
            file.seed = parse_number<std::uint64_t>(value, key);
        } else if (key == "sigma-wl") {
            file.model.sigma_wl = parse_number<double>(value, key);
        } else if (key == "sigma-wn") {
            file.model.sigma_wn = parse_number<double>(value, key);
        } else if (key == "sigma-e") {
            file.model.sigma_e = parse_number<double>(value, key);
        } else if (key == "init-var-l") {
            file.model.init_var_l = parse_number<double>(value, key);
        } else if (key == "init-var-n") {
            file.model.init_var_n = parse_number<double>(value, key);
        } else if (key == "d-l") {
            d_l = parse_number<int>(value, key);
        } else if (key == "d-n") {
            d_n = parse_number<int>(value, key);
        } else if (key == "d-y") {
            d_y = parse_number<int>(value, key);
        }
    }
    if (d_l < 1 || d_n < 1 || d_y < 1 || steps < 1) {
        throw clgfilt::Error(
            fmt::format("trajectory '{}': missing d-l/d-n/d-y/steps metadata", path));
    }
    const std::size_t expected_fields = 1 + static_cast<std::size_t>(d_l + d_n + d_y);
    if (split(line, ',').size() != expected_fields) {
        throw clgfilt::Error(fmt::format("trajectory '{}': malformed header '{}'", path, line));
    }
    Trajectory& t = file.trajectory;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> fields = split(line, ',');
        if (fields.size() != expected_fields) {
            throw clgfilt::Error(fmt::format("trajectory '{}': malformed row '{}'", path, line));
        }
        std::size_t next = 1;
        Vector xl(d_l);
        for (int i = 0; i < d_l; ++i) xl[i] = parse_number<double>(fields[next++], "state");
        Vector xn(d_n);
        for (int i = 0; i < d_n; ++i) xn[i] = parse_number<double>(fields[next++], "state");
        Vector y(d_y);
        for (int i = 0; i < d_y; ++i) y[i] = parse_number<double>(fields[next++], "measurement");
        t.linear_states.push_back(std::move(xl));
        t.nonlinear_states.push_back(std::move(xn));
        t.measurements.push_back(std::move(y));
    }
    if (t.length() != static_cast<std::size_t>(steps)) {
        throw clgfilt::Error(fmt::format("trajectory '{}': metadata says {} steps, file has {}",
                                         path, steps, t.length()));
    }
    return file;
}

// ---------------------------------------------------------------------------
// Sweep grammar: AXIS=V1,V2,... or AXIS=LO:HI:{lin|log}:N with AXIS one of
// np, sigma_e.
// ---------------------------------------------------------------------------

std::vector<double> parse_sweep_values(const std::string& spec, bool integer_axis) {
    std::vector<double> values;
    if (spec.find(':') != std::string::npos) {
        const std::vector<std::string> parts = split(spec, ':');
        if (parts.size() != 4 || (parts[2] != "lin" && parts[2] != "log")) {
            throw ConfigError(fmt::format(
                "sweep: range must be LO:HI:{{lin|log}}:N, got '{}'", spec));
        }
        const double lo = parse_number<double>(parts[0], "sweep");
        const double hi = parse_number<double>(parts[1], "sweep");
        const int n = parse_number<int>(parts[3], "sweep");
        const bool log_scale = parts[2] == "log";
        if (n < 2) {
            throw ConfigError(fmt::format("sweep: ranges need N >= 2 points, got {}", n));
        }
        if (log_scale && (lo <= 0.0 || hi <= 0.0)) {
            throw ConfigError("sweep: log ranges need positive endpoints");
        }
        for (int i = 0; i < n; ++i) {
            const double a = static_cast<double>(i) / (n - 1);
            double v = log_scale ? lo * std::pow(hi / lo, a) : lo + a * (hi - lo);
            if (integer_axis) {
                v = std::round(v);
            }
            values.push_back(v);
        }
        if (integer_axis) {
            for (std::size_t i = 1; i < values.size(); ++i) {
                if (values[i] <= values[i - 1]) {
                    throw ConfigError(fmt::format(
                        "sweep: n_particles range collapses to duplicates near {}", values[i]));
                }
            }
        }
    } else {
        for (const std::string& field : split(spec, ',')) {
            values.push_back(parse_number<double>(trim(field), "sweep"));
        }
    }
    return values;
}

std::pair<clgfilt::bench::SweepAxis, std::vector<double>> parse_sweep_spec(
    const std::string& spec) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos) {
        throw ConfigError(fmt::format("sweep: expected AXIS=VALUES, got '{}'", spec));
    }
    const std::string axis = trim(spec.substr(0, eq));
    const std::string rest = trim(spec.substr(eq + 1));
    if (axis == "np") {
        return {clgfilt::bench::SweepAxis::NParticles, parse_sweep_values(rest, true)};
    }
    if (axis == "sigma_e") {
        return {clgfilt::bench::SweepAxis::SigmaE, parse_sweep_values(rest, false)};
    }
    throw ConfigError(fmt::format("sweep: unknown axis '{}' (use np or sigma_e)", axis));
}

// ---------------------------------------------------------------------------
// Flat config files: `key = value` lines, `#` comments, keys = long option
// names without the dashes. Returns the argv tokens to append for every key
// whose option the command line (pass one) left unset, so explicit flags
// always win; unknown keys are errors.
// ---------------------------------------------------------------------------

std::vector<std::string> config_tokens(const CLI::App& cmd, const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("config: cannot open '{}'", path));
    }
    std::vector<std::string> tokens;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        if (trim(line).empty()) {
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(
                fmt::format("config: {}:{}: expected `key = value`", path, line_no));
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(fmt::format("config: {}:{}: empty key", path, line_no));
        }
        if (key == "config") {
            throw ConfigError(fmt::format("config: {}:{}: config files cannot nest", path,
                                          line_no));
        }
        const CLI::Option* option = cmd.get_option_no_throw("--" + key);
        if (option == nullptr) {
            throw ConfigError(fmt::format("config: {}:{}: unknown key '{}'", path, line_no, key));
        }
        if (option->count() > 0) {
            continue; // the command line already set it
        }
        if (option->get_expected_min() == 0) {
            // Flag: accept a boolean literal instead of a value.
            if (value == "true" || value == "1" || value == "on" || value == "yes") {
                tokens.push_back("--" + key);
            } else if (value != "false" && value != "0" && value != "off" && value != "no") {
                throw ConfigError(fmt::format(
                    "config: {}:{}: '{}' is a flag and needs a boolean, got '{}'", path, line_no,
                    key, value));
            }
        } else {
            tokens.push_back(fmt::format("--{}={}", key, value));
        }
    }
    return tokens;
}

void require_set(const std::string& value, const char* key) {
    if (value.empty()) {
        throw ConfigError(
            fmt::format("{}: required (give --{} or a config `{}` entry)", key, key, key));
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string model = "benchmark";
    int steps = 200;
    std::uint64_t seed = 1;
    std::string out;
    ModelFlags flags;
};

void run_simulate(const SimulateArgs& args, const std::string& out_dir) {
    require_set(args.out, "out");
    if (args.model != "benchmark") {
        throw ConfigError(fmt::format("model: unknown model '{}' (only benchmark is built in)",
                                      args.model));
    }
    if (args.steps < 1) {
        throw ConfigError(fmt::format("steps: must be >= 1, got {}", args.steps));
    }
    const CLGModel model = build_model(args.flags);
    RandomStream rng(args.seed);
    TrajectoryFile file;
    file.trajectory = clgfilt::simulate(model, args.steps, rng);
    file.model = args.flags;
    file.seed = args.seed;
    const std::string path = resolve_out(out_dir, args.out);
    write_trajectory(file, path);
    std::cout << fmt::format("wrote {} ({} steps, seed {})\n", path, args.steps, args.seed);
}

// ---------------------------------------------------------------------------
// filter
// ---------------------------------------------------------------------------

struct FilterArgs {
    std::string alg;
    int np = 100;
    int nit = 1;
    std::uint64_t seed = 1;
    std::string traj;
    int steps = 200;
    std::uint64_t sim_seed = 1;
    double loss_threshold = clgfilt::bench::kDefaultLossThreshold;
    bool timing = false;
    std::string out;
    ModelFlags flags;
    ModelOptions model_opts;
};

double step_error(const Vector& estimate, const Vector& truth) {
    return (estimate - truth).norm() / std::sqrt(static_cast<double>(truth.size()));
}

void run_filter_cmd(const FilterArgs& args, const std::string& out_dir) {
    require_set(args.alg, "alg");
    require_set(args.out, "out");
    const clgfilt::bench::Algorithm algorithm = clgfilt::bench::parse_algorithm(args.alg);
    const clgfilt::FilterKind kind = clgfilt::bench::to_filter_kind(algorithm);

    ModelFlags flags = args.flags;
    TrajectoryFile source;
    if (!args.traj.empty()) {
        source = load_trajectory(args.traj);
        // File metadata supplies model parameters the user did not override.
        if (args.model_opts.sigma_wl->count() == 0) flags.sigma_wl = source.model.sigma_wl;
        if (args.model_opts.sigma_wn->count() == 0) flags.sigma_wn = source.model.sigma_wn;
        if (args.model_opts.sigma_e->count() == 0) flags.sigma_e = source.model.sigma_e;
        if (args.model_opts.init_var_l->count() == 0) flags.init_var_l = source.model.init_var_l;
        if (args.model_opts.init_var_n->count() == 0) flags.init_var_n = source.model.init_var_n;
    }
    const CLGModel model = build_model(flags);
    if (args.traj.empty()) {
        if (args.steps < 1) {
            throw ConfigError(fmt::format("steps: must be >= 1, got {}", args.steps));
        }
        RandomStream rng(args.sim_seed);
        source.trajectory = clgfilt::simulate(model, args.steps, rng);
        source.model = flags;
        source.seed = args.sim_seed;
    }
    const Trajectory& truth = source.trajectory;

    FilterConfig config;
    config.n_particles = args.np;
    config.n_iterations = args.nit;
    config.seed = args.seed;
    if (algorithm == clgfilt::bench::Algorithm::Smpf2) {
        config.smpf_case = 2;
    }
    clgfilt::validate(config);

    const auto start = std::chrono::steady_clock::now();
    const FilterOutput output = clgfilt::run_filter(model, truth.measurements, kind, config);
    const auto stop = std::chrono::steady_clock::now();
    const double wall_ms =
        args.timing ? std::chrono::duration<double, std::milli>(stop - start).count() : 0.0;

    double sum_sq_l = 0.0;
    double sum_sq_n = 0.0;
    std::int64_t losses = 0;
    std::size_t next_reset = 0;
    const auto T = truth.length();
    for (std::size_t l = 0; l < T; ++l) {
        sum_sq_l += (output.est_linear[l] - truth.linear_states[l]).squaredNorm();
        sum_sq_n += (output.est_nonlinear[l] - truth.nonlinear_states[l]).squaredNorm();
        bool reset_here = false;
        if (next_reset < output.weight_resets.size() &&
            output.weight_resets[next_reset] == static_cast<int>(l) + 1) {
            reset_here = true;
            ++next_reset;
        }
        const double err = (output.est_nonlinear[l] - truth.nonlinear_states[l]).norm();
        if (reset_here || err > args.loss_threshold) {
            ++losses;
        }
    }
    const auto d_l = static_cast<double>(truth.linear_states.front().size());
    const auto d_n = static_cast<double>(truth.nonlinear_states.front().size());
    const double rmse_l = std::sqrt(sum_sq_l / (static_cast<double>(T) * d_l));
    const double rmse_n = std::sqrt(sum_sq_n / (static_cast<double>(T) * d_n));

    const std::string path = resolve_out(out_dir, args.out);
    std::ofstream out = open_output(path);
    out << "# clgfilt filter run\n";
    out << fmt::format("# algorithm = {}\n", to_string(algorithm));
    out << fmt::format("# n-particles = {}\n# n-iterations = {}\n", args.np, args.nit);
    out << fmt::format("# seed = {}\n", args.seed);
    out << fmt::format("# trajectory = {}\n", args.traj.empty() ? "simulated" : args.traj);
    out << fmt::format("# trajectory-seed = {}\n", source.seed);
    out << fmt::format("# sigma-wl = {}\n# sigma-wn = {}\n# sigma-e = {}\n",
                       digits(flags.sigma_wl), digits(flags.sigma_wn), digits(flags.sigma_e));
    out << fmt::format("# init-var-l = {}\n# init-var-n = {}\n", digits(flags.init_var_l),
                       digits(flags.init_var_n));
    out << fmt::format("# rmse-l = {}\n# rmse-n = {}\n", digits(rmse_l), digits(rmse_n));
    out << fmt::format("# tracking-losses = {} (threshold = {})\n", losses,
                       digits(args.loss_threshold));
    out << fmt::format("# cholesky-count = {}\n# inversion-count = {}\n",
                       output.counters.cholesky_count, output.counters.inversion_count);
    out << fmt::format("# wall-ms = {}\n", digits(wall_ms));
    std::string resets = "# weight-reset-steps =";
    for (const int step : output.weight_resets) {
        resets += fmt::format(" {}", step);
    }
    out << resets << '\n';
    const auto n_l = static_cast<int>(d_l);
    const auto n_n = static_cast<int>(d_n);
    out << "l";
    for (int i = 1; i <= n_l; ++i) out << fmt::format(",est_l{}", i);
    for (int i = 1; i <= n_n; ++i) out << fmt::format(",est_n{}", i);
    out << ",err_l,err_n,ess\n";
    for (std::size_t l = 0; l < T; ++l) {
        out << l + 1;
        for (int i = 0; i < n_l; ++i) out << ',' << digits(output.est_linear[l][i]);
        for (int i = 0; i < n_n; ++i) out << ',' << digits(output.est_nonlinear[l][i]);
        out << ',' << digits(step_error(output.est_linear[l], truth.linear_states[l]));
        out << ',' << digits(step_error(output.est_nonlinear[l], truth.nonlinear_states[l]));
        out << ',' << digits(output.ess[l]);
        out << '\n';
    }
    if (!out) {
        throw clgfilt::Error(fmt::format("write failed for '{}'", path));
    }
    std::cout << fmt::format("wrote {} (rmse_l {:.6g}, rmse_n {:.6g}, losses {})\n", path, rmse_l,
                             rmse_n, losses);
}

// ---------------------------------------------------------------------------
// bench / sweep
// ---------------------------------------------------------------------------

struct BenchArgs {
    std::string algs = "mpf,smpf1,smpf2,tf";
    int np = 200;
    int nit = 2;
    int runs = 50;
    int horizon = 200;
    std::uint64_t seed = 1;
    double loss_threshold = clgfilt::bench::kDefaultLossThreshold;
    bool timing = false;
    int jobs = 1;
    std::string sweep;
    std::string out;
    std::string plots;
    ModelFlags flags;
};

void run_bench_cmd(const BenchArgs& args, const std::string& out_dir, bool sweeping) {
    require_set(args.out, "out");
    if (sweeping) {
        require_set(args.sweep, "sweep");
    }
    namespace bench = clgfilt::bench;
    bench::ExperimentConfig config;
    config.model.sigma_w_linear = args.flags.sigma_wl;
    config.model.sigma_w_nonlinear = args.flags.sigma_wn;
    config.model.sigma_e = args.flags.sigma_e;
    config.n_runs = args.runs;
    config.horizon = args.horizon;
    config.base_seed = args.seed;
    config.loss_threshold = args.loss_threshold;
    config.measure_wall_time = args.timing;
    config.jobs = args.jobs;
    for (const std::string& name : split(args.algs, ',')) {
        bench::FilterEntry entry;
        entry.algorithm = bench::parse_algorithm(trim(name));
        entry.config.n_particles = args.np;
        entry.config.n_iterations = args.nit;
        if (entry.algorithm == bench::Algorithm::Smpf2) {
            entry.config.smpf_case = 2;
        }
        config.filters.push_back(std::move(entry));
    }
    if (sweeping) {
        auto [axis, values] = parse_sweep_spec(args.sweep);
        config.sweep_axis = axis;
        config.sweep_values = std::move(values);
    }
    bench::validate(config);

    const bench::ResultTable table = bench::run_experiment(config);
    const std::string path = resolve_out(out_dir, args.out);
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    bench::write_csv(table, path);
    std::cout << fmt::format("wrote {} ({} rows)\n", path, table.rows.size());
    if (!args.plots.empty()) {
        const std::string dir = resolve_out(out_dir, args.plots);
        const std::vector<std::string> curves =
            bench::emit_plot_data(table, config.sweep_axis, dir);
        std::cout << fmt::format("wrote {} curve files under {}\n", curves.size(), dir);
    }
}

void add_bench_options(CLI::App& cmd, BenchArgs& args) {
    cmd.add_option("--algs", args.algs, "Comma list of mpf, smpf1, smpf2, tf, truth")
        ->capture_default_str();
    cmd.add_option("--np", args.np, "Particles per filter")->capture_default_str();
    cmd.add_option("--nit", args.nit, "Turbo iterations (tf only)")->capture_default_str();
    cmd.add_option("--runs", args.runs, "Monte-Carlo repetitions")->capture_default_str();
    cmd.add_option("--horizon", args.horizon, "Steps per run")->capture_default_str();
    cmd.add_option("--seed", args.seed, "Base seed; per-run seeds derive from it")
        ->capture_default_str();
    cmd.add_option("--loss-threshold", args.loss_threshold,
                   "Nonlinear error norm that counts a step as a tracking loss")
        ->capture_default_str();
    cmd.add_flag("--timing", args.timing,
                 "Measure wall time (off by default: it breaks byte-identical reruns)");
    cmd.add_option("--jobs", args.jobs, "Worker threads (1 = serial reference)")
        ->capture_default_str();
    cmd.add_option("--out", args.out, "Results CSV path (required)");
    cmd.add_option("--plots", args.plots, "Also emit per-curve x,rmse_l,rmse_n files here");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"clgfilt: marginalized particle filtering on conditionally "
                 "linear Gaussian models"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    std::string out_dir;
    if (const char* env = std::getenv("CLGFILT_OUT_DIR")) {
        out_dir = env;
    }
    std::string config_path;
    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path,
                        "Flat `key = value` config file; keys are long option names without "
                        "dashes, `#` comments; explicit flags take precedence");
        cmd->add_option("--out-dir", out_dir,
                        "Directory for relative output paths (default: $CLGFILT_OUT_DIR, "
                        "else cwd)")
            ->capture_default_str();
    };

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "Generate a trajectory file");
    add_common(simulate);
    simulate->add_option("--model", sim.model, "Model family")->capture_default_str();
    simulate->add_option("--steps", sim.steps, "Trajectory length")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Simulation seed")->capture_default_str();
    simulate->add_option("--out", sim.out, "Trajectory CSV path (required)");
    add_model_options(*simulate, sim.flags);

    FilterArgs fil;
    CLI::App* filter = app.add_subcommand("filter", "Run one filter over a trajectory");
    add_common(filter);
    filter->add_option("--alg", fil.alg, "One of mpf, smpf1, smpf2, tf (required)");
    filter->add_option("--np", fil.np, "Particle count")->capture_default_str();
    filter->add_option("--nit", fil.nit, "Turbo iterations (tf only)")->capture_default_str();
    filter->add_option("--seed", fil.seed, "Filter seed")->capture_default_str();
    CLI::Option* traj_opt =
        filter->add_option("--traj", fil.traj, "Load this trajectory file instead of simulating");
    filter->add_option("--steps", fil.steps, "Steps to simulate when no --traj is given")
        ->capture_default_str()
        ->excludes(traj_opt);
    filter->add_option("--sim-seed", fil.sim_seed, "Simulation seed when no --traj is given")
        ->capture_default_str()
        ->excludes(traj_opt);
    filter->add_option("--loss-threshold", fil.loss_threshold,
                       "Nonlinear error norm that counts a step as a tracking loss")
        ->capture_default_str();
    filter->add_flag("--timing", fil.timing, "Record wall time in the output metadata");
    filter->add_option("--out", fil.out, "Estimates CSV path (required)");
    fil.model_opts = add_model_options(*filter, fil.flags);

    BenchArgs bench_args;
    CLI::App* bench =
        app.add_subcommand("bench", "Monte-Carlo comparison at a single design point");
    add_common(bench);
    add_bench_options(*bench, bench_args);
    add_model_options(*bench, bench_args.flags);

    BenchArgs sweep_args;
    CLI::App* sweep =
        app.add_subcommand("sweep", "Monte-Carlo comparison across a parameter grid");
    add_common(sweep);
    add_bench_options(*sweep, sweep_args);
    sweep->add_option("--sweep", sweep_args.sweep,
                      "AXIS=V1,V2,... or AXIS=LO:HI:{lin|log}:N with AXIS np or sigma_e "
                      "(required)");
    add_model_options(*sweep, sweep_args.flags);

    try {
        app.parse(argc, argv);
        if (!config_path.empty()) {
            CLI::App* active = app.get_subcommands().front();
            const std::vector<std::string> extra = config_tokens(*active, config_path);
            if (!extra.empty()) {
                // Second pass with the config-supplied tokens appended; the
                // vector overload expects reversed argument order.
                std::vector<std::string> args;
                for (int i = 1; i < argc; ++i) {
                    args.emplace_back(argv[i]);
                }
                args.insert(args.end(), extra.begin(), extra.end());
                std::reverse(args.begin(), args.end());
                app.parse(std::move(args));
            }
        }
        if (simulate->parsed()) {
            run_simulate(sim, out_dir);
        } else if (filter->parsed()) {
            run_filter_cmd(fil, out_dir);
        } else if (bench->parsed()) {
            run_bench_cmd(bench_args, out_dir, false);
        } else if (sweep->parsed()) {
            run_bench_cmd(sweep_args, out_dir, true);
        }
    } catch (const CLI::ParseError& parse_error) {
        return app.exit(parse_error);
    } catch (const std::exception& failure) {
        std::cerr << fmt::format("error: {}\n", failure.what());
        return 1;
    }
    return 0;
}
