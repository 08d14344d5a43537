// SPDX-License-Identifier: MIT
// Copyright (c) 2026 the clgfilt authors
//
// Monte-Carlo benchmark harness: seed scheme, paired-trajectory design,
// aggregation arithmetic, CSV format round-trips, plot-data emission, and
// the deterministic merge of parallel runs.

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "clgfilt/bench.hpp"
#include "clgfilt/errors.hpp"
#include "clgfilt/rng.hpp"

using namespace clgfilt;
using namespace clgfilt::bench;

namespace {

FilterEntry entry_of(Algorithm algorithm, int n_particles, int n_iterations = 1,
                     const std::string& label = "") {
    FilterEntry entry;
    entry.algorithm = algorithm;
    entry.config.n_particles = n_particles;
    entry.config.n_iterations = n_iterations;
    entry.label = label;
    return entry;
}

ExperimentConfig small_experiment() {
    ExperimentConfig config;
    config.filters = {entry_of(Algorithm::Mpf, 8)};
    config.n_runs = 3;
    config.horizon = 12;
    config.base_seed = 42;
    return config;
}

bool rows_equal(const ResultRow& a, const ResultRow& b) {
    return a.algorithm == b.algorithm && a.n_particles == b.n_particles &&
           a.n_iterations == b.n_iterations && a.sigma_e == b.sigma_e &&
           a.sigma_w_l == b.sigma_w_l && a.sigma_w_n == b.sigma_w_n && a.run == b.run &&
           a.rmse_l == b.rmse_l && a.rmse_n == b.rmse_n &&
           a.tracking_losses == b.tracking_losses && a.cholesky_count == b.cholesky_count &&
           a.inversion_count == b.inversion_count && a.wall_ms == b.wall_ms && a.seed == b.seed;
}

bool tables_equal(const ResultTable& a, const ResultTable& b) {
    if (a.base_seed != b.base_seed || a.metadata != b.metadata ||
        a.rows.size() != b.rows.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        if (!rows_equal(a.rows[i], b.rows[i])) {
            return false;
        }
    }
    return true;
}

std::vector<ResultRow> run_rows(const ResultTable& table, const std::string& algorithm) {
    std::vector<ResultRow> out;
    for (const ResultRow& row : table.rows) {
        if (row.run >= 1 && row.algorithm == algorithm) {
            out.push_back(row);
        }
    }
    return out;
}

std::vector<ResultRow> aggregate_rows(const ResultTable& table, const std::string& algorithm) {
    std::vector<ResultRow> out;
    for (const ResultRow& row : table.rows) {
        if (row.run == -1 && row.algorithm == algorithm) {
            out.push_back(row);
        }
    }
    return out;
}

} // namespace

TEST_CASE("seed scheme is splittable and collision-free across roles") {
    CHECK(trajectory_seed(42, 1) == derive_seed(42, 1, 0));
    CHECK(filter_seed(42, 1) == derive_seed(42, 1, 1));

    // Distinct runs, roles, and base seeds all land on distinct streams.
    std::set<std::uint64_t> seen;
    for (std::uint64_t base : {1ULL, 42ULL, 0xDEADBEEFULL}) {
        for (int run = 1; run <= 50; ++run) {
            seen.insert(trajectory_seed(base, run));
            seen.insert(filter_seed(base, run));
        }
    }
    CHECK(seen.size() == 3 * 50 * 2);
}

TEST_CASE("experiment validation names the offending field") {
    ExperimentConfig config = small_experiment();
    CHECK_NOTHROW(validate(config));

    SUBCASE("no filters") {
        config.filters.clear();
        CHECK_THROWS_WITH_AS(validate(config), doctest::Contains("filters"), ConfigError);
    }
    SUBCASE("bad run count") {
        config.n_runs = 0;
        CHECK_THROWS_WITH_AS(validate(config), doctest::Contains("n_runs"), ConfigError);
    }
    SUBCASE("bad horizon") {
        config.horizon = 0;
        CHECK_THROWS_WITH_AS(validate(config), doctest::Contains("horizon"), ConfigError);
    }
    SUBCASE("bad jobs") {
        config.jobs = 0;
        CHECK_THROWS_WITH_AS(validate(config), doctest::Contains("jobs"), ConfigError);
    }
    SUBCASE("bad threshold") {
        config.loss_threshold = 0.0;
        CHECK_THROWS_WITH_AS(validate(config), doctest::Contains("loss_threshold"), ConfigError);
    }
    SUBCASE("bad noise level") {
        config.model.sigma_e = -1.0;
        CHECK_THROWS_WITH_AS(validate(config), doctest::Contains("sigma_e"), ConfigError);
    }
    SUBCASE("sweep values without an axis") {
        config.sweep_values = {10.0};
        CHECK_THROWS_WITH_AS(validate(config), doctest::Contains("sweep_values"), ConfigError);
    }
    SUBCASE("axis without sweep values") {
        config.sweep_axis = SweepAxis::NParticles;
        CHECK_THROWS_WITH_AS(validate(config), doctest::Contains("sweep_values"), ConfigError);
    }
    SUBCASE("fractional particle count") {
        config.sweep_axis = SweepAxis::NParticles;
        config.sweep_values = {10.5};
        CHECK_THROWS_WITH_AS(validate(config), doctest::Contains("positive integers"),
                             ConfigError);
    }
    SUBCASE("nonpositive sigma sweep") {
        config.sweep_axis = SweepAxis::SigmaE;
        config.sweep_values = {1e-2, 0.0};
        CHECK_THROWS_WITH_AS(validate(config), doctest::Contains("sweep_values"), ConfigError);
    }
    SUBCASE("duplicate labels") {
        config.filters = {entry_of(Algorithm::Mpf, 8), entry_of(Algorithm::Mpf, 16)};
        CHECK_THROWS_WITH_AS(validate(config), doctest::Contains("duplicate label"), ConfigError);
    }
    SUBCASE("label with unsupported characters") {
        config.filters = {entry_of(Algorithm::Mpf, 8, 1, "has space")};
        CHECK_THROWS_WITH_AS(validate(config), doctest::Contains("label"), ConfigError);
    }
    SUBCASE("invalid nested filter config") {
        config.filters = {entry_of(Algorithm::Mpf, 0)};
        CHECK_THROWS_AS(validate(config), ConfigError);
    }
}

TEST_CASE("algorithm names round-trip and reject unknowns") {
    for (Algorithm algorithm : {Algorithm::Mpf, Algorithm::Smpf1, Algorithm::Smpf2, Algorithm::Tf,
                                Algorithm::Truth}) {
        CHECK(parse_algorithm(to_string(algorithm)) == algorithm);
    }
    CHECK_THROWS_AS(parse_algorithm("ekf"), ConfigError);
    CHECK(to_filter_kind(Algorithm::Smpf2) == FilterKind::Smpf2);
    CHECK_THROWS_AS(to_filter_kind(Algorithm::Truth), ConfigError);
}

TEST_CASE("truth oracle scores exactly zero error") {
    ExperimentConfig config = small_experiment();
    config.filters = {entry_of(Algorithm::Truth, 1)};
    const ResultTable table = run_experiment(config);

    REQUIRE(table.rows.size() == 4); // three runs + one aggregate
    for (const ResultRow& row : table.rows) {
        CHECK(row.rmse_l == 0.0);
        CHECK(row.rmse_n == 0.0);
        CHECK(row.tracking_losses == 0);
        CHECK(row.cholesky_count == 0);
        CHECK(row.inversion_count == 0);
        CHECK(row.wall_ms == 0.0);
    }
    CHECK(table.rows[0].run == 1);
    CHECK(table.rows[3].run == -1);
    CHECK(table.rows[3].seed == config.base_seed);
}

TEST_CASE("identically configured entries see identical trajectories and draws") {
    ExperimentConfig config = small_experiment();
    config.filters = {entry_of(Algorithm::Mpf, 8, 1, "first"),
                      entry_of(Algorithm::Mpf, 8, 1, "second")};
    const ResultTable table = run_experiment(config);

    const std::vector<ResultRow> first = run_rows(table, "first");
    const std::vector<ResultRow> second = run_rows(table, "second");
    REQUIRE(first.size() == 3);
    REQUIRE(second.size() == 3);
    for (std::size_t r = 0; r < first.size(); ++r) {
        // Same trajectory seed, same filter seed: bit-identical scores.
        CHECK(first[r].seed == second[r].seed);
        CHECK(first[r].rmse_l == second[r].rmse_l);
        CHECK(first[r].rmse_n == second[r].rmse_n);
        CHECK(first[r].tracking_losses == second[r].tracking_losses);
    }
}

TEST_CASE("aggregate rows recompute from the per-run rows") {
    ExperimentConfig config = small_experiment();
    config.n_runs = 4;
    config.filters = {entry_of(Algorithm::Mpf, 6), entry_of(Algorithm::Smpf1, 6)};
    const ResultTable table = run_experiment(config);

    for (const std::string label : {"mpf", "smpf1"}) {
        const std::vector<ResultRow> runs = run_rows(table, label);
        const std::vector<ResultRow> aggregates = aggregate_rows(table, label);
        REQUIRE(runs.size() == 4);
        REQUIRE(aggregates.size() == 1);

        double sum_mse_l = 0.0;
        double sum_mse_n = 0.0;
        std::int64_t losses = 0;
        std::int64_t cholesky = 0;
        std::int64_t inversions = 0;
        for (const ResultRow& row : runs) {
            sum_mse_l += row.rmse_l * row.rmse_l;
            sum_mse_n += row.rmse_n * row.rmse_n;
            losses += row.tracking_losses;
            cholesky += row.cholesky_count;
            inversions += row.inversion_count;
        }
        CHECK(aggregates[0].rmse_l == std::sqrt(sum_mse_l / 4.0));
        CHECK(aggregates[0].rmse_n == std::sqrt(sum_mse_n / 4.0));
        CHECK(aggregates[0].tracking_losses == losses);
        CHECK(aggregates[0].cholesky_count == cholesky);
        CHECK(aggregates[0].inversion_count == inversions);
        CHECK(aggregates[0].wall_ms == 0.0);
    }

    // The per-run operation counts are deterministic functions of the
    // configuration: for mpf, one factorization per particle per recursion
    // and three inversions per particle per recursion on top of the two
    // initialization inversions.
    for (const ResultRow& row : run_rows(table, "mpf")) {
        CHECK(row.cholesky_count == 6 * config.horizon);
        CHECK(row.inversion_count == 2 + 3 * 6 * config.horizon);
    }
    for (const ResultRow& row : run_rows(table, "smpf1")) {
        CHECK(row.cholesky_count == config.horizon);
        CHECK(row.inversion_count == 2 + 3 * config.horizon);
    }
}

TEST_CASE("same base seed reproduces the table; different seed does not") {
    const ExperimentConfig config = small_experiment();
    const ResultTable first = run_experiment(config);
    const ResultTable second = run_experiment(config);
    CHECK(tables_equal(first, second));

    ExperimentConfig reseeded = config;
    reseeded.base_seed = 43;
    const ResultTable third = run_experiment(reseeded);
    CHECK_FALSE(tables_equal(first, third));
}

TEST_CASE("parallel execution merges into the serial table") {
    ExperimentConfig config = small_experiment();
    config.n_runs = 4;
    config.filters = {entry_of(Algorithm::Mpf, 10), entry_of(Algorithm::Tf, 10, 2)};
    config.sweep_axis = SweepAxis::NParticles;
    config.sweep_values = {4.0, 10.0};

    const ResultTable serial = run_experiment(config);
    config.jobs = 3;
    const ResultTable parallel = run_experiment(config);

    // jobs is recorded in the metadata preamble, so compare rows directly.
    REQUIRE(serial.rows.size() == parallel.rows.size());
    for (std::size_t i = 0; i < serial.rows.size(); ++i) {
        CHECK(rows_equal(serial.rows[i], parallel.rows[i]));
    }
}

TEST_CASE("particle sweep applies per point and orders rows cell by cell") {
    ExperimentConfig config = small_experiment();
    config.n_runs = 2;
    config.horizon = 9;
    config.filters = {entry_of(Algorithm::Mpf, 999)};
    config.sweep_axis = SweepAxis::NParticles;
    config.sweep_values = {2.0, 5.0};
    const ResultTable table = run_experiment(config);

    REQUIRE(table.rows.size() == 6); // (2 runs + aggregate) x 2 points
    CHECK(table.rows[0].n_particles == 2);
    CHECK(table.rows[1].n_particles == 2);
    CHECK(table.rows[2].n_particles == 2);
    CHECK(table.rows[2].run == -1);
    CHECK(table.rows[3].n_particles == 5);
    CHECK(table.rows[5].run == -1);
    for (const ResultRow& row : table.rows) {
        if (row.run == -1) {
            continue;
        }
        CHECK(row.cholesky_count == row.n_particles * config.horizon);
        CHECK(row.inversion_count == 2 + 3 * row.n_particles * config.horizon);
    }
}

TEST_CASE("measurement-noise sweep rebuilds the model per point") {
    ExperimentConfig config = small_experiment();
    config.n_runs = 2;
    config.filters = {entry_of(Algorithm::Mpf, 8)};
    config.sweep_axis = SweepAxis::SigmaE;
    config.sweep_values = {1e-2, 5e-2};
    const ResultTable table = run_experiment(config);

    const std::vector<ResultRow> runs = run_rows(table, "mpf");
    REQUIRE(runs.size() == 4);
    CHECK(runs[0].sigma_e == 1e-2);
    CHECK(runs[1].sigma_e == 1e-2);
    CHECK(runs[2].sigma_e == 5e-2);
    CHECK(runs[3].sigma_e == 5e-2);
    // Same trajectory seeds, different noise level: the scores must move.
    CHECK(runs[0].seed == runs[2].seed);
    CHECK(runs[0].rmse_n != runs[2].rmse_n);
}

TEST_CASE("tracking losses count threshold crossings per step") {
    ExperimentConfig config = small_experiment();
    config.horizon = 11;
    config.n_runs = 2;
    config.loss_threshold = 1e-300; // any nonzero error trips the counter
    config.filters = {entry_of(Algorithm::Mpf, 8), entry_of(Algorithm::Truth, 1)};
    const ResultTable table = run_experiment(config);

    for (const ResultRow& row : run_rows(table, "mpf")) {
        CHECK(row.tracking_losses == config.horizon);
    }
    for (const ResultRow& row : run_rows(table, "truth")) {
        CHECK(row.tracking_losses == 0); // exact zero error never exceeds
    }
}

TEST_CASE("individual run failures are recorded, not fatal") {
    ExperimentConfig config = small_experiment();
    config.n_runs = 2;
    // Finite by itself, but the implied covariance sigma^2 overflows to
    // infinity, so every run's model rejects validation inside the filter.
    config.model.sigma_e = 1e300;
    const ResultTable table = run_experiment(config);

    CHECK(table.rows.empty());
    int failure_lines = 0;
    int empty_cell_lines = 0;
    for (const std::string& line : table.metadata) {
        if (line.rfind("failed algorithm=mpf", 0) == 0) {
            ++failure_lines;
        }
        if (line.rfind("cell without successful runs", 0) == 0) {
            ++empty_cell_lines;
        }
    }
    CHECK(failure_lines == 2);
    CHECK(empty_cell_lines == 1);
}

TEST_CASE("csv writing and reading round-trip bit-exactly") {
    ExperimentConfig config = small_experiment();
    config.filters = {entry_of(Algorithm::Mpf, 5), entry_of(Algorithm::Truth, 1)};
    const ResultTable table = run_experiment(config);

    std::stringstream buffer;
    write_csv(table, buffer);
    const ResultTable replica = read_csv(buffer);
    CHECK(tables_equal(table, replica));

    SUBCASE("extreme values survive the 17-digit format") {
        ResultTable synthetic;
        synthetic.base_seed = 0xFFFFFFFFFFFFFFFFULL;
        synthetic.metadata = {"base_seed=18446744073709551615", "arbitrary note"};
        ResultRow row;
        row.algorithm = "tf";
        row.n_particles = 300;
        row.n_iterations = 4;
        row.sigma_e = 0.1;                      // not exactly representable
        row.sigma_w_l = 5e-324;                 // smallest subnormal
        row.sigma_w_n = 1.7976931348623157e308; // largest finite double
        row.run = -1;
        row.rmse_l = 1.0 / 3.0;
        row.rmse_n = 6.02214076e23;
        row.tracking_losses = 0;
        row.cholesky_count = 9223372036854775807LL;
        row.inversion_count = -1;
        row.wall_ms = 0.30000000000000004;
        row.seed = 18446744073709551615ULL;
        synthetic.rows = {row};

        std::stringstream extreme;
        write_csv(synthetic, extreme);
        const ResultTable back = read_csv(extreme);
        CHECK(tables_equal(synthetic, back));
    }

    SUBCASE("empty table gives a header-only file") {
        std::stringstream empty;
        write_csv(ResultTable{}, empty);
        CHECK(empty.str() == "algorithm,n_particles,n_iterations,sigma_e,sigma_w_l,sigma_w_n,"
                             "run,rmse_l,rmse_n,tracking_losses,cholesky_count,inversion_count,"
                             "wall_ms,seed\n");
        const ResultTable parsed = read_csv(empty);
        CHECK(parsed.rows.empty());
    }

    SUBCASE("file-path overloads") {
        const std::string path = "bench_roundtrip_test.csv";
        write_csv(table, path);
        const ResultTable from_file = read_csv(path);
        CHECK(tables_equal(table, from_file));
        std::filesystem::remove(path);
        CHECK_THROWS_AS(read_csv("definitely_missing_directory/x.csv"), Error);
    }
}

TEST_CASE("csv reader rejects malformed input") {
    SUBCASE("wrong header") {
        std::stringstream in("algorithm,foo\n");
        CHECK_THROWS_AS(read_csv(in), Error);
    }
    SUBCASE("missing header") {
        std::stringstream in("");
        CHECK_THROWS_AS(read_csv(in), Error);
    }
    SUBCASE("wrong field count") {
        std::stringstream in;
        write_csv(ResultTable{}, in);
        in << "mpf,1,1\n";
        CHECK_THROWS_AS(read_csv(in), Error);
    }
    SUBCASE("malformed number") {
        std::stringstream in;
        write_csv(ResultTable{}, in);
        in << "mpf,abc,1,0.1,0.1,0.1,1,0.1,0.1,0,0,0,0,7\n";
        CHECK_THROWS_AS(read_csv(in), Error);
    }
}

TEST_CASE("plot data emits one sorted curve file per algorithm") {
    namespace fs = std::filesystem;
    const std::string directory = "bench_plot_test_dir";

    ExperimentConfig config = small_experiment();
    config.n_runs = 2;
    config.horizon = 8;
    config.filters = {entry_of(Algorithm::Mpf, 999), entry_of(Algorithm::Smpf1, 999)};
    config.sweep_axis = SweepAxis::NParticles;
    config.sweep_values = {5.0, 3.0}; // deliberately unsorted
    const ResultTable table = run_experiment(config);

    const std::vector<std::string> written =
        emit_plot_data(table, config.sweep_axis, directory, "fig_");
    REQUIRE(written.size() == 2);
    CHECK(written[0] == (fs::path(directory) / "fig_mpf.csv").string());
    CHECK(written[1] == (fs::path(directory) / "fig_smpf1.csv").string());

    std::ifstream curve(written[0]);
    REQUIRE(curve.good());
    std::string line;
    std::getline(curve, line);
    CHECK(line == "x,rmse_l,rmse_n");
    std::getline(curve, line);
    CHECK(line.rfind("3,", 0) == 0); // ascending x despite unsorted sweep
    std::getline(curve, line);
    CHECK(line.rfind("5,", 0) == 0);
    CHECK_FALSE(std::getline(curve, line));
    curve.close();

    SUBCASE("single point without a sweep gives single-row curves") {
        ExperimentConfig flat = small_experiment();
        flat.n_runs = 2;
        flat.horizon = 8;
        flat.filters = {entry_of(Algorithm::Truth, 17)};
        const ResultTable single = run_experiment(flat);
        const std::vector<std::string> files =
            emit_plot_data(single, SweepAxis::None, directory);
        REQUIRE(files.size() == 1);
        std::ifstream one(files[0]);
        std::getline(one, line);
        CHECK(line == "x,rmse_l,rmse_n");
        std::getline(one, line);
        CHECK(line == "17,0,0");
        CHECK_FALSE(std::getline(one, line));
        one.close();
    }

    fs::remove_all(directory);
}
