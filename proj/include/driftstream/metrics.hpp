#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftstream/meter.hpp"
#include "driftstream/stream.hpp"

namespace driftstream {

struct Outcome {
    std::uint64_t step = 0;
    ClassId true_label = 0;
    ClassId predicted_label = 0;
};

struct WindowPoint {
    std::uint64_t end_step = 0;
    double error = 0.0;
};

struct RunReport {
    std::uint64_t n = 0;
    double error = 0.0;
    double kappa_m = 0.0;
    double kappa_t = 0.0;
    double wall_time = 0.0;   // seconds
    double ram_hours = 0.0;   // NaN when the sampler is unavailable or disabled
    std::vector<WindowPoint> window_trace;
    std::vector<std::string> notes;
};

// Prequential majority-class reference: predicts the most frequent label of
// the steps seen so far, class id 0 before any label, smallest id on ties.
class MajorityBaseline {
  public:
    ClassId predict() const;
    void observe(ClassId label);

  private:
    std::map<ClassId, std::uint64_t> counts_;
    ClassId best_ = 0;
    std::uint64_t best_count_ = 0;
};

// No-change reference: predicts the previous true label; the first prediction
// of a run counts as wrong.
class NoChangeBaseline {
  public:
    bool would_be_correct(ClassId truth) const { return last_ && *last_ == truth; }
    void observe(ClassId truth) { last_ = truth; }

  private:
    std::optional<ClassId> last_;
};

double error_rate(std::span<const Outcome> outcomes);

// (p0 - p_ref) / (1 - p_ref); NaN with a diagnostic in *note when the
// reference classifier was perfect.
double kappa_m(std::span<const Outcome> outcomes, std::uint64_t baseline_correct,
               std::string* note = nullptr);
double kappa_t(std::span<const Outcome> outcomes, std::uint64_t nochange_correct,
               std::string* note = nullptr);

// Trapezoidal integral of a time-ordered resident-memory series, in GB·hours.
double ram_hours(std::span<const MemorySample> series);

struct EvalOptions {
    bool meter_enabled = true;
    std::chrono::milliseconds meter_period{100};
    std::uint64_t window = 0;                  // 0 disables the trace
    std::vector<Outcome>* outcomes = nullptr;  // optional sink for the full sequence
};

// Interleaved test-train pass over the whole stream.  Model is anything with
// process(const LabeledInstance&) returning a struct with a .label, fresh and
// step-aligned with stream.instances.front().step - 1.
template <typename Model>
RunReport prequential_run(Model& model, const Stream& stream, const EvalOptions& opts = {}) {
    if (stream.instances.empty()) {
        throw std::invalid_argument("prequential_run: empty stream");
    }

    std::vector<Outcome> outcomes;
    outcomes.reserve(stream.instances.size());
    MajorityBaseline majority;
    NoChangeBaseline nochange;
    std::uint64_t majority_correct = 0;
    std::uint64_t nochange_correct = 0;

    RunReport report;
    std::uint64_t window_wrong = 0;
    std::uint64_t window_filled = 0;

    const auto wall_start = std::chrono::steady_clock::now();
    std::optional<ResourceMeter> meter;
    if (opts.meter_enabled) meter.emplace(opts.meter_period);

    for (const auto& inst : stream.instances) {
        const ClassId predicted = model.process(inst).label;
        outcomes.push_back({inst.step, inst.label, predicted});

        if (majority.predict() == inst.label) ++majority_correct;
        majority.observe(inst.label);
        if (nochange.would_be_correct(inst.label)) ++nochange_correct;
        nochange.observe(inst.label);

        if (opts.window > 0) {
            if (predicted != inst.label) ++window_wrong;
            if (++window_filled == opts.window) {
                report.window_trace.push_back(
                    {inst.step, static_cast<double>(window_wrong) / static_cast<double>(opts.window)});
                window_wrong = 0;
                window_filled = 0;
            }
        }
    }
    if (window_filled > 0) {
        report.window_trace.push_back({stream.instances.back().step,
                                       static_cast<double>(window_wrong) / static_cast<double>(window_filled)});
    }

    report.n = outcomes.size();
    report.error = error_rate(outcomes);
    std::string note;
    report.kappa_m = kappa_m(outcomes, majority_correct, &note);
    if (!note.empty()) report.notes.push_back(note);
    note.clear();
    report.kappa_t = kappa_t(outcomes, nochange_correct, &note);
    if (!note.empty()) report.notes.push_back(note);

    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    if (meter) {
        meter->stop();
        if (meter->memory_available()) {
            report.ram_hours = ram_hours(meter->samples());
        } else {
            report.ram_hours = std::numeric_limits<double>::quiet_NaN();
            report.notes.push_back("resident-memory sampler unavailable; ram_hours not measured");
        }
    } else {
        report.ram_hours = std::numeric_limits<double>::quiet_NaN();
        report.notes.push_back("metering disabled");
    }

    if (opts.outcomes != nullptr) *opts.outcomes = std::move(outcomes);
    return report;
}

// Line-oriented record (key=value per line) and CSV row of the scalar fields.
// Numbers print with 17 significant digits so a reload is bitwise equal.
std::string report_record(const RunReport& report);
std::string report_csv_header();
std::string report_csv_row(const RunReport& report);
RunReport parse_report_csv_row(const std::string& line);
std::string window_trace_csv(const RunReport& report);

}  // namespace driftstream
