#include "driftstream/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace driftstream {

ClassId MajorityBaseline::predict() const { return best_; }

void MajorityBaseline::observe(ClassId label) {
    const std::uint64_t count = ++counts_[label];
    if (count > best_count_ || (count == best_count_ && label < best_)) {
        best_ = label;
        best_count_ = count;
    }
}

double error_rate(std::span<const Outcome> outcomes) {
    if (outcomes.empty()) throw std::invalid_argument("error_rate: no outcomes");
    std::uint64_t wrong = 0;
    for (const auto& o : outcomes) {
        if (o.predicted_label != o.true_label) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(outcomes.size());
}

namespace {

double kappa_against(std::span<const Outcome> outcomes, std::uint64_t baseline_correct,
                     const char* baseline_name, std::string* note) {
    if (outcomes.empty()) throw std::invalid_argument("kappa: no outcomes");
    const auto n = static_cast<double>(outcomes.size());
    const double p_ref = static_cast<double>(baseline_correct) / n;
    if (baseline_correct == outcomes.size()) {
        if (note != nullptr) {
            *note = std::string(baseline_name) + " baseline was perfect; kappa undefined";
        }
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double p0 = 1.0 - error_rate(outcomes);
    return (p0 - p_ref) / (1.0 - p_ref);
}

}  // namespace

double kappa_m(std::span<const Outcome> outcomes, std::uint64_t baseline_correct, std::string* note) {
    return kappa_against(outcomes, baseline_correct, "majority", note);
}

double kappa_t(std::span<const Outcome> outcomes, std::uint64_t nochange_correct, std::string* note) {
    return kappa_against(outcomes, nochange_correct, "no-change", note);
}

double ram_hours(std::span<const MemorySample> series) {
    double gb_seconds = 0.0;
    for (std::size_t i = 1; i < series.size(); ++i) {
        const double dt = series[i].seconds - series[i - 1].seconds;
        if (dt < 0.0) throw std::invalid_argument("ram_hours: series not time-ordered");
        gb_seconds += 0.5 * (series[i].resident_gb + series[i - 1].resident_gb) * dt;
    }
    return gb_seconds / 3600.0;
}

namespace {

std::string full_precision(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_cell(const std::string& cell, const char* what) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0') {
        throw std::invalid_argument(std::string("report row: bad ") + what + " '" + cell + "'");
    }
    return v;
}

}  // namespace

std::string report_record(const RunReport& report) {
    std::ostringstream out;
    out << "n=" << report.n << "\n";
    out << "error=" << full_precision(report.error) << "\n";
    out << "kappa_m=" << full_precision(report.kappa_m) << "\n";
    out << "kappa_t=" << full_precision(report.kappa_t) << "\n";
    out << "wall_time=" << full_precision(report.wall_time) << "\n";
    out << "ram_hours=" << full_precision(report.ram_hours) << "\n";
    for (const auto& note : report.notes) out << "note=" << note << "\n";
    return out.str();
}

std::string report_csv_header() { return "n,error,kappa_m,kappa_t,wall_time,ram_hours"; }

std::string report_csv_row(const RunReport& report) {
    std::ostringstream out;
    out << report.n << "," << full_precision(report.error) << "," << full_precision(report.kappa_m)
        << "," << full_precision(report.kappa_t) << "," << full_precision(report.wall_time) << ","
        << full_precision(report.ram_hours);
    return out.str();
}

RunReport parse_report_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    if (cells.size() != 6) {
        throw std::invalid_argument("report row: expected 6 cells, got " + std::to_string(cells.size()));
    }
    RunReport report;
    report.n = static_cast<std::uint64_t>(parse_cell(cells[0], "n"));
    report.error = parse_cell(cells[1], "error");
    report.kappa_m = parse_cell(cells[2], "kappa_m");
    report.kappa_t = parse_cell(cells[3], "kappa_t");
    report.wall_time = parse_cell(cells[4], "wall_time");
    report.ram_hours = parse_cell(cells[5], "ram_hours");
    return report;
}

std::string window_trace_csv(const RunReport& report) {
    std::ostringstream out;
    out << "step,windowed_error\n";
    for (const auto& point : report.window_trace) {
        out << point.end_step << "," << full_precision(point.error) << "\n";
    }
    return out.str();
}

}  // namespace driftstream
