#include "driftstream/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "driftstream/generators.hpp"

namespace fs = std::filesystem;

namespace driftstream {

namespace {

std::string full_precision(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string compact_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

double nan_aware_median(std::vector<double> values) {
    std::erase_if(values, [](double v) { return std::isnan(v); });
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

double nan_aware_mean(const std::vector<double>& values) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        if (std::isnan(v)) continue;
        sum += v;
        ++n;
    }
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    return sum / static_cast<double>(n);
}

}  // namespace

std::string StreamSource::name() const {
    if (!csv_path.empty()) return fs::path(csv_path).stem().string();
    if (!generator_record.empty()) {
        return generator_kind_name(parse_generator_spec(generator_record).kind);
    }
    return "stream";
}

Stream load_source(const StreamSource& source) {
    const bool from_csv = !source.csv_path.empty();
    const bool from_generator = !source.generator_record.empty();
    if (from_csv == from_generator) {
        throw std::invalid_argument("stream source needs exactly one of csv path or generator record");
    }
    if (from_csv) return load_csv_stream(source.csv_path, source.label_column, source.csv_has_header);
    return generate(parse_generator_spec(source.generator_record));
}

void ExperimentConfig::validate() const {
    std::vector<std::string> problems;
    if (source.csv_path.empty() == source.generator_record.empty()) {
        problems.push_back("exactly one of csv path or generator record must be set");
    }
    if (bin_widths.empty()) problems.push_back("bin_widths must be nonempty");
    for (double bw : bin_widths) {
        if (!(bw > 0.0)) problems.push_back("bin_width " + compact_double(bw) + " must be positive");
    }
    if (seeds.empty()) problems.push_back("seeds must be nonempty");
    if (jobs < 1) problems.push_back("jobs must be >= 1");
    try {
        EnhashConfig probe = learner;
        probe.bin_width = bin_widths.empty() ? learner.bin_width : bin_widths.front();
        probe.validate();
    } catch (const std::exception& err) {
        problems.push_back(err.what());
    }
    if (!problems.empty()) {
        std::string msg = "invalid experiment config:";
        for (const auto& p : problems) msg += " " + p + ";";
        msg.pop_back();
        throw std::invalid_argument(msg);
    }
}

void run_parallel(std::vector<std::function<void()>> tasks, unsigned jobs) {
    if (tasks.empty()) return;
    const unsigned workers = std::min<unsigned>(std::max(1u, jobs), tasks.size());
    if (workers == 1) {
        for (auto& task : tasks) task();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (!failed.load(std::memory_order_relaxed)) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) break;
                try {
                    tasks[i]();
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

RunResult run_once(const Stream& stream, const ExperimentConfig& config, double bin_width,
                   std::uint64_t seed) {
    EnhashConfig learner = config.learner;
    learner.bin_width = bin_width;
    learner.seed = seed;
    EnhashModel model(stream.descriptor, learner);
    EvalOptions opts;
    opts.meter_enabled = config.meter_enabled;
    opts.window = config.window;
    RunResult result;
    result.bin_width = bin_width;
    result.seed = seed;
    result.report = prequential_run(model, stream, opts);
    return result;
}

SummaryRow summarize(const std::string& label, double bin_width,
                     std::span<const RunResult> runs) {
    std::vector<double> errors;
    std::vector<double> kappa_ms;
    std::vector<double> kappa_ts;
    std::vector<double> walls;
    std::vector<double> rams;
    for (const auto& run : runs) {
        errors.push_back(run.report.error);
        kappa_ms.push_back(run.report.kappa_m);
        kappa_ts.push_back(run.report.kappa_t);
        walls.push_back(run.report.wall_time);
        rams.push_back(run.report.ram_hours);
    }
    SummaryRow row;
    row.label = label;
    row.bin_width = bin_width;
    row.runs = runs.size();
    row.median_error = nan_aware_median(errors);
    row.median_kappa_m = nan_aware_median(kappa_ms);
    row.median_kappa_t = nan_aware_median(kappa_ts);
    row.mean_wall_time = nan_aware_mean(walls);
    row.mean_ram_hours = nan_aware_mean(rams);
    return row;
}

std::string run_file_stem(double bin_width, std::uint64_t seed) {
    return "run_bw" + compact_double(bin_width) + "_seed" + std::to_string(seed);
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw std::runtime_error("short write to " + path.string());
}

std::string summary_csv_header() {
    return "stream,label,bin_width,runs,median_error,median_kappa_m,median_kappa_t,"
           "mean_wall_time,mean_ram_hours";
}

std::string summary_csv_row(const std::string& stream_name, const SummaryRow& row) {
    std::ostringstream out;
    out << stream_name << "," << row.label << "," << full_precision(row.bin_width) << ","
        << row.runs << "," << full_precision(row.median_error) << ","
        << full_precision(row.median_kappa_m) << "," << full_precision(row.median_kappa_t) << ","
        << full_precision(row.mean_wall_time) << "," << full_precision(row.mean_ram_hours);
    return out.str();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const Stream stream = load_source(config.source);

    ExperimentResult result;
    result.stream_name = config.source.name();
    result.config = config;
    result.runs.resize(config.bin_widths.size() * config.seeds.size());

    std::vector<std::function<void()>> tasks;
    for (std::size_t b = 0; b < config.bin_widths.size(); ++b) {
        for (std::size_t s = 0; s < config.seeds.size(); ++s) {
            const std::size_t slot = b * config.seeds.size() + s;
            tasks.push_back([&, b, s, slot] {
                result.runs[slot] = run_once(stream, config, config.bin_widths[b], config.seeds[s]);
            });
        }
    }
    run_parallel(std::move(tasks), config.jobs);

    for (std::size_t b = 0; b < config.bin_widths.size(); ++b) {
        const double bw = config.bin_widths[b];
        std::span<const RunResult> slice(result.runs.data() + b * config.seeds.size(),
                                         config.seeds.size());
        result.summary.push_back(summarize("bin_width=" + compact_double(bw), bw, slice));
    }
    const auto error_key = [](const SummaryRow& row) {
        return std::isnan(row.median_error) ? std::numeric_limits<double>::infinity()
                                            : row.median_error;
    };
    const auto best = std::min_element(
        result.summary.begin(), result.summary.end(),
        [&](const SummaryRow& a, const SummaryRow& b) { return error_key(a) < error_key(b); });
    SummaryRow best_row = *best;
    best_row.label = "best(" + best_row.label + ")";
    result.summary.push_back(best_row);

    if (!config.output_dir.empty()) {
        const fs::path dir(config.output_dir);
        fs::create_directories(dir);
        std::ostringstream summary;
        summary << summary_csv_header() << "\n";
        for (const auto& row : result.summary) {
            summary << summary_csv_row(result.stream_name, row) << "\n";
        }
        write_text_file(dir / "summary.csv", summary.str());
        for (const auto& run : result.runs) {
            const std::string stem = run_file_stem(run.bin_width, run.seed);
            write_text_file(dir / (stem + ".report"), report_record(run.report));
            if (config.window > 0) {
                write_text_file(dir / (stem + ".trace.csv"), window_trace_csv(run.report));
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

namespace {

void apply_sweep_value(ExperimentConfig& config, const std::string& parameter, double value) {
    if (parameter == "L") {
        const auto l = static_cast<std::size_t>(value);
        if (static_cast<double>(l) != value || l == 0) {
            throw std::invalid_argument("L sweep value must be a positive integer, got " +
                                        compact_double(value));
        }
        config.learner.num_estimators = l;
    } else if (parameter == "bin_width") {
        config.bin_widths = {value};
    } else if (parameter == "lambda") {
        config.learner.decay_rate = value;
    } else {
        throw std::invalid_argument("unknown sweep parameter '" + parameter +
                                    "' (expected L, bin_width or lambda)");
    }
}

nlohmann::json manifest_key(const std::string& parameter, std::span<const double> values) {
    nlohmann::json key;
    key["parameter"] = parameter;
    auto& list = key["values"] = nlohmann::json::array();
    for (double v : values) list.push_back(full_precision(v));
    return key;
}

}  // namespace

std::string sweep_csv(std::span<const SweepPoint> points) {
    std::ostringstream out;
    out << "value,error,wall_time,ram_hours\n";
    for (const auto& p : points) {
        out << full_precision(p.value) << "," << full_precision(p.error) << ","
            << full_precision(p.wall_time) << "," << full_precision(p.ram_hours) << "\n";
    }
    return out.str();
}

std::vector<SweepPoint> sweep(const ExperimentConfig& config, const std::string& parameter,
                              std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("sweep: values list is empty");
    {
        ExperimentConfig probe = config;
        if (probe.bin_widths.size() > 1) probe.bin_widths.resize(1);
        for (double v : values) {
            ExperimentConfig point = probe;
            apply_sweep_value(point, parameter, v);
            point.validate();
        }
    }
    std::sort(values.begin(), values.end());

    const fs::path dir = config.output_dir.empty() ? fs::path() : fs::path(config.output_dir);
    const fs::path manifest_path = dir.empty() ? fs::path() : dir / "sweep.manifest";
    nlohmann::json manifest;
    manifest["key"] = manifest_key(parameter, values);
    manifest["done"] = nlohmann::json::object();
    if (!manifest_path.empty()) {
        fs::create_directories(dir);
        if (fs::exists(manifest_path)) {
            std::ifstream in(manifest_path);
            nlohmann::json previous = nlohmann::json::parse(in, nullptr, false);
            if (!previous.is_discarded() && previous.contains("key") &&
                previous["key"] == manifest["key"]) {
                manifest = previous;  // resume: completed points carry over
            }
        }
    }

    const Stream stream = load_source(config.source);
    std::vector<SweepPoint> points;
    for (double value : values) {
        const std::string key = full_precision(value);
        if (manifest["done"].contains(key)) {
            const auto& row = manifest["done"][key];
            points.push_back({value, row["error"].get<double>(), row["wall_time"].get<double>(),
                              row["ram_hours"].get<double>()});
            continue;
        }

        ExperimentConfig point_config = config;
        point_config.output_dir.clear();
        if (point_config.bin_widths.size() > 1) point_config.bin_widths.resize(1);
        apply_sweep_value(point_config, parameter, value);

        std::vector<RunResult> runs(point_config.seeds.size());
        std::vector<std::function<void()>> tasks;
        for (std::size_t s = 0; s < point_config.seeds.size(); ++s) {
            tasks.push_back([&, s] {
                runs[s] = run_once(stream, point_config, point_config.bin_widths.front(),
                                   point_config.seeds[s]);
            });
        }
        try {
            run_parallel(std::move(tasks), config.jobs);
        } catch (...) {
            if (!manifest_path.empty()) {
                write_text_file(manifest_path, manifest.dump(2));
                write_text_file(dir / "sweep.partial.csv", sweep_csv(points));
            }
            throw;
        }

        const SummaryRow row = summarize(key, point_config.bin_widths.front(), runs);
        SweepPoint point{value, row.median_error, row.mean_wall_time, row.mean_ram_hours};
        points.push_back(point);
        manifest["done"][key] = {{"error", point.error},
                                 {"wall_time", point.wall_time},
                                 {"ram_hours", point.ram_hours}};
        if (!manifest_path.empty()) write_text_file(manifest_path, manifest.dump(2));
    }

    if (!dir.empty()) {
        write_text_file(dir / "sweep.csv", sweep_csv(points));
        std::error_code ignored;
        fs::remove(manifest_path, ignored);
        fs::remove(dir / "sweep.partial.csv", ignored);
    }
    return points;
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

TableFormat parse_table_format(const std::string& name) {
    if (name == "csv") return TableFormat::csv;
    if (name == "markdown" || name == "markdown-table" || name == "md") return TableFormat::markdown;
    if (name == "plain") return TableFormat::plain;
    throw std::invalid_argument("unknown table format '" + name + "' (expected csv, markdown or plain)");
}

std::string format_percent(double fraction) {
    if (std::isnan(fraction)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
    return buf;
}

std::string format_sci(double value) {
    if (std::isnan(value)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.1e", value);
    std::string text = buf;
    const auto e = text.find('e');
    if (e == std::string::npos) return text;
    std::string mantissa = text.substr(0, e);
    std::string exponent = text.substr(e + 1);
    bool negative = false;
    if (!exponent.empty() && (exponent[0] == '+' || exponent[0] == '-')) {
        negative = exponent[0] == '-';
        exponent.erase(0, 1);
    }
    while (exponent.size() > 1 && exponent[0] == '0') exponent.erase(0, 1);
    return mantissa + "e" + (negative ? "-" : "") + exponent;
}

namespace {

std::string fixed_digits(double value, int digits) {
    if (std::isnan(value)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
    return buf;
}

}  // namespace

std::string emit_report(const ExperimentResult& result, TableFormat format) {
    if (result.summary.empty()) throw std::invalid_argument("emit_report: no summary rows");
    const std::vector<std::string> header = {"stream",  "config",  "bin_width",
                                             "runs",    "error_%", "kappa_m",
                                             "kappa_t", "wall_s",  "ram_hours"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : result.summary) {
        rows.push_back({result.stream_name, row.label, compact_double(row.bin_width),
                        std::to_string(row.runs), format_percent(row.median_error),
                        fixed_digits(row.median_kappa_m, 4), fixed_digits(row.median_kappa_t, 4),
                        fixed_digits(row.mean_wall_time, 3), format_sci(row.mean_ram_hours)});
    }

    std::ostringstream out;
    switch (format) {
        case TableFormat::csv: {
            for (std::size_t c = 0; c < header.size(); ++c) {
                out << header[c] << (c + 1 < header.size() ? "," : "\n");
            }
            for (const auto& row : rows) {
                for (std::size_t c = 0; c < row.size(); ++c) {
                    out << row[c] << (c + 1 < row.size() ? "," : "\n");
                }
            }
            break;
        }
        case TableFormat::markdown: {
            out << "|";
            for (const auto& cell : header) out << " " << cell << " |";
            out << "\n|";
            for (std::size_t c = 0; c < header.size(); ++c) out << " --- |";
            out << "\n";
            for (const auto& row : rows) {
                out << "|";
                for (const auto& cell : row) out << " " << cell << " |";
                out << "\n";
            }
            break;
        }
        case TableFormat::plain: {
            std::vector<std::size_t> widths(header.size());
            for (std::size_t c = 0; c < header.size(); ++c) widths[c] = header[c].size();
            for (const auto& row : rows) {
                for (std::size_t c = 0; c < row.size(); ++c) {
                    widths[c] = std::max(widths[c], row[c].size());
                }
            }
            auto emit_row = [&](const std::vector<std::string>& row) {
                for (std::size_t c = 0; c < row.size(); ++c) {
                    out << std::left << std::setw(static_cast<int>(widths[c])) << row[c];
                    out << (c + 1 < row.size() ? "  " : "");
                }
                out << "\n";
            };
            emit_row(header);
            for (const auto& row : rows) emit_row(row);
            break;
        }
    }
    return out.str();
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::map<std::string, std::string> entries;
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const auto begin = s.find_first_not_of(" \t\r");
        if (begin == std::string::npos) return std::string();
        const auto end = s.find_last_not_of(" \t\r");
        return s.substr(begin, end - begin + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected key=value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty key");
        }
        entries[key] = value;
    }
    return entries;
}

}  // namespace driftstream
