#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "driftstream/enhash.hpp"
#include "driftstream/metrics.hpp"
#include "driftstream/stream.hpp"

namespace driftstream {

// Either a CSV file on disk or a generator record (see parse_generator_spec).
struct StreamSource {
    std::string csv_path;
    bool csv_has_header = false;
    int label_column = -1;
    std::string generator_record;

    std::string name() const;  // csv stem or generator kind, for report rows
};

Stream load_source(const StreamSource& source);

struct ExperimentConfig {
    StreamSource source;
    EnhashConfig learner;                     // seed and bin_width overridden per run
    std::vector<double> bin_widths{0.1, 0.01};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::uint64_t window = 0;                 // per-run trace window, 0 = off
    std::string output_dir;                   // empty = keep everything in memory
    unsigned jobs = 1;
    bool meter_enabled = true;

    void validate() const;
};

struct RunResult {
    double bin_width = 0.0;
    std::uint64_t seed = 0;
    RunReport report;
};

// One row per bin_width (median error/kappas over seeds, mean wall/ram) plus
// a clearly labeled best-of row picking the lowest median error.
struct SummaryRow {
    std::string label;
    double bin_width = 0.0;
    std::uint64_t runs = 0;
    double median_error = 0.0;
    double median_kappa_m = 0.0;
    double median_kappa_t = 0.0;
    double mean_wall_time = 0.0;
    double mean_ram_hours = 0.0;
};

struct ExperimentResult {
    std::string stream_name;
    ExperimentConfig config;
    std::vector<RunResult> runs;
    std::vector<SummaryRow> summary;
};

// Runs every bin_width x seed combination (parallel up to config.jobs) and,
// when output_dir is set, writes summary.csv, per-run report/trace files.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct SweepPoint {
    double value = 0.0;
    double error = 0.0;
    double wall_time = 0.0;
    double ram_hours = 0.0;
};

// One experiment per value of `parameter` in {"L", "bin_width", "lambda"},
// seeds fixed from config; rows sorted by value; writes sweep.csv under
// output_dir.  A crashed sweep leaves sweep.manifest + completed rows and
// resumes from there on the next identical invocation.
std::vector<SweepPoint> sweep(const ExperimentConfig& config, const std::string& parameter,
                              std::vector<double> values);
std::string sweep_csv(std::span<const SweepPoint> points);

enum class TableFormat { csv, markdown, plain };
TableFormat parse_table_format(const std::string& name);

std::string format_percent(double fraction);  // 0.1288 -> "12.88"
std::string format_sci(double value);         // 0.000012 -> "1.2e-5"

// Human-facing summary table, one row per summary entry.
std::string emit_report(const ExperimentResult& result, TableFormat format);

// Plain-text config: one key=value per line, '#' comments, later keys win.
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Runs tasks on up to `jobs` threads; rethrows the first task exception.
void run_parallel(std::vector<std::function<void()>> tasks, unsigned jobs);

}  // namespace driftstream
