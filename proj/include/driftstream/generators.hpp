#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "driftstream/stream.hpp"

namespace driftstream {

enum class GeneratorKind {
    rotating_hyperplane,   // halfspace label, normal jumps at schedule points (abrupt)
    moving_squares,        // four squares sliding across the unit plane (incremental)
    interchanging_rbf,     // Gaussian blobs whose centers swap at schedule points (abrupt real)
    transient_chessboard,  // chessboard revealed field by field, then full board (virtual)
    mixed_drift,           // rbf + squares + chessboard segments concatenated
};

std::string generator_kind_name(GeneratorKind kind);
GeneratorKind parse_generator_kind(const std::string& name);

// A drift point: at start_step the kind-specific parameters take effect.
//   rotating_hyperplane: [angle_jump_radians, rate_radians_per_step]
//   moving_squares:      [speed_cycles_per_step]
//   interchanging_rbf:   [class_i, class_j] to swap (empty = derived from seed)
struct DriftEvent {
    std::uint64_t start_step = 1;
    std::vector<double> params;
};

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::interchanging_rbf;
    std::uint64_t num_samples = 20000;
    std::size_t dimension = 2;
    std::size_t num_classes = 15;
    std::vector<DriftEvent> drift_schedule;
    std::uint64_t seed = 1;
    double label_noise = 0.0;                // probability of a uniformly wrong label
    std::map<std::string, double> params;    // kind-specific knobs (sigma, speed, ...)

    double param(const std::string& name, double fallback) const;
    void validate() const;  // throws std::invalid_argument listing every inconsistency
};

// Desk-scale defaults per kind (full-scale shapes are obtained by raising
// num_samples and keeping the class/dimension layout).
GeneratorSpec make_default_spec(GeneratorKind kind, std::uint64_t num_samples = 20000,
                                std::uint64_t seed = 1);

// Ground-truth concept function of `spec` at `step`.  Pure; generate() labels
// every emitted sample with it, so relabeling any emitted instance with the
// concept of its step reproduces the stored label (noiseless specs).
ClassId concept_label(const GeneratorSpec& spec, std::uint64_t step, std::span<const double> x);

// Emits exactly spec.num_samples instances, deterministic under spec.seed.
Stream generate(const GeneratorSpec& spec);

// Plain-text record round-trip, e.g.
//   kind=interchanging_rbf;samples=20000;dim=2;classes=15;seed=1;noise=0;
//   params=sigma:0.02;schedule=4000:0:1|8000:2:3
// Omitted fields take the kind defaults; params entries merge over defaults.
std::string format_generator_spec(const GeneratorSpec& spec);
GeneratorSpec parse_generator_spec(const std::string& record);

}  // namespace driftstream
