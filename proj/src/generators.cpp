#include "driftstream/generators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "driftstream/rng.hpp"

namespace driftstream {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// --- rotating hyperplane ---------------------------------------------------

// Angle of the separating normal at `step`: initial angle plus, for every
// schedule event in effect, its jump and its rate integrated over the steps
// the event has been active.
double hyperplane_angle(const GeneratorSpec& spec, std::uint64_t step) {
    double angle = spec.param("angle0", 0.0);
    double rate = spec.param("rate", 0.0);
    std::uint64_t segment_start = 1;
    for (const auto& event : spec.drift_schedule) {
        if (event.start_step > step) break;
        angle += rate * static_cast<double>(event.start_step - segment_start);
        if (!event.params.empty()) angle += event.params[0];
        rate = event.params.size() > 1 ? event.params[1] : 0.0;
        segment_start = event.start_step;
    }
    angle += rate * static_cast<double>(step - segment_start);
    return angle;
}

ClassId hyperplane_label(const GeneratorSpec& spec, std::uint64_t step, std::span<const double> x) {
    const double angle = hyperplane_angle(spec, step);
    const double dot = std::cos(angle) * x[0] + std::sin(angle) * x[1];
    return dot >= 0.0 ? 1 : 0;
}

// --- moving squares ---------------------------------------------------------

// Four squares on fixed horizontal rows, sliding along x as a triangle wave.
// Rows are separated enough that a point sampled inside a square is always
// nearest to its own center.
struct SquareGeometry {
    double half_side;
    double row(std::size_t k) const { return 0.125 + 0.25 * static_cast<double>(k); }
};

double triangle_wave(double u) {
    u = u - 2.0 * std::floor(u / 2.0);  // into [0,2)
    return u <= 1.0 ? u : 2.0 - u;
}

double square_x(const GeneratorSpec& spec, std::size_t k, std::uint64_t step) {
    double speed = spec.param("speed", 3.0 / static_cast<double>(spec.num_samples));
    double phase = 0.35 * static_cast<double>(k);
    std::uint64_t segment_start = 1;
    for (const auto& event : spec.drift_schedule) {
        if (event.start_step > step) break;
        phase += speed * static_cast<double>(event.start_step - segment_start);
        if (!event.params.empty()) speed = event.params[0];
        segment_start = event.start_step;
    }
    phase += speed * static_cast<double>(step - segment_start);
    const double h = spec.param("half_side", 0.1);
    return h + (1.0 - 2.0 * h) * triangle_wave(phase);
}

ClassId squares_label(const GeneratorSpec& spec, std::uint64_t step, std::span<const double> x) {
    const SquareGeometry geom{spec.param("half_side", 0.1)};
    ClassId best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 4; ++k) {
        const double dx = x[0] - square_x(spec, k, step);
        const double dy = x[1] - geom.row(k);
        const double sq = dx * dx + dy * dy;
        if (sq < best_sq) {
            best_sq = sq;
            best = static_cast<ClassId>(k);
        }
    }
    return best;
}

// --- interchanging RBF -------------------------------------------------------

// Blob centers on a seeded, jittered grid in the first two dimensions (which
// guarantees separation); remaining dimensions uniform in [0.2, 0.8].
std::vector<FeatureVec> rbf_base_centers(const GeneratorSpec& spec) {
    const std::size_t k = spec.num_classes;
    const std::size_t g = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k))));
    Rng rng(substream_seed(spec.seed, 0x2BF));
    std::vector<std::size_t> cells(g * g);
    std::iota(cells.begin(), cells.end(), 0);
    for (std::size_t i = cells.size(); i > 1; --i) {
        std::swap(cells[i - 1], cells[rng.next_index(i)]);
    }
    std::vector<FeatureVec> centers(k, FeatureVec(spec.dimension));
    const double cell = 1.0 / static_cast<double>(g);
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t ci = cells[c] % g;
        const std::size_t cj = cells[c] / g;
        centers[c][0] = (static_cast<double>(ci) + 0.5) * cell + rng.next_uniform(-0.15, 0.15) * cell;
        centers[c][1] = (static_cast<double>(cj) + 0.5) * cell + rng.next_uniform(-0.15, 0.15) * cell;
        for (std::size_t d = 2; d < spec.dimension; ++d) centers[c][d] = rng.next_uniform(0.2, 0.8);
    }
    return centers;
}

std::pair<std::size_t, std::size_t> rbf_swap_pair(const GeneratorSpec& spec, std::size_t event_index) {
    const auto& event = spec.drift_schedule[event_index];
    const std::size_t k = spec.num_classes;
    if (event.params.size() >= 2) {
        return {static_cast<std::size_t>(event.params[0]), static_cast<std::size_t>(event.params[1])};
    }
    const std::uint64_t m = substream_seed(spec.seed ^ 0x5357415053ULL, event_index);
    const std::size_t i = m % k;
    const std::size_t j = (i + 1 + (m >> 32) % (k - 1)) % k;
    return {i, j};
}

void rbf_apply_swaps_until(const GeneratorSpec& spec, std::uint64_t step,
                           std::vector<FeatureVec>& centers) {
    for (std::size_t e = 0; e < spec.drift_schedule.size(); ++e) {
        if (spec.drift_schedule[e].start_step > step) break;
        auto [i, j] = rbf_swap_pair(spec, e);
        std::swap(centers[i], centers[j]);
    }
}

ClassId nearest_center(const std::vector<FeatureVec>& centers, std::span<const double> x) {
    ClassId best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
        double sq = 0.0;
        for (std::size_t d = 0; d < x.size(); ++d) {
            const double diff = x[d] - centers[c][d];
            sq += diff * diff;
        }
        if (sq < best_sq) {
            best_sq = sq;
            best = static_cast<ClassId>(c);
        }
    }
    return best;
}

// --- transient chessboard ----------------------------------------------------

ClassId chessboard_label(const GeneratorSpec& spec, std::span<const double> x) {
    const std::size_t n = static_cast<std::size_t>(spec.param("fields_per_side", 8.0));
    const auto clamp_idx = [n](double v) {
        auto i = static_cast<std::int64_t>(std::floor(v * static_cast<double>(n)));
        return static_cast<std::size_t>(std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(n) - 1));
    };
    const std::size_t i = clamp_idx(x[0]);
    const std::size_t j = clamp_idx(x[1]);
    return static_cast<ClassId>((i + j) % spec.num_classes);
}

std::uint64_t chessboard_reveal_steps(const GeneratorSpec& spec) {
    const double frac = spec.param("reveal_fraction", 0.5);
    return static_cast<std::uint64_t>(std::llround(frac * static_cast<double>(spec.num_samples)));
}

std::vector<std::size_t> chessboard_reveal_order(const GeneratorSpec& spec) {
    const std::size_t n = static_cast<std::size_t>(spec.param("fields_per_side", 8.0));
    Rng rng(substream_seed(spec.seed, 0xB0A2D));
    std::vector<std::size_t> fields(n * n);
    std::iota(fields.begin(), fields.end(), 0);
    for (std::size_t i = fields.size(); i > 1; --i) {
        std::swap(fields[i - 1], fields[rng.next_index(i)]);
    }
    return fields;
}

// --- mixed drift ---------------------------------------------------------------

struct MixedSegment {
    GeneratorSpec spec;
    std::uint64_t start = 1;  // global step of the segment's first sample
};

std::vector<MixedSegment> mixed_segments(const GeneratorSpec& spec) {
    const std::uint64_t third = spec.num_samples / 3;
    const std::uint64_t lens[3] = {third, third, spec.num_samples - 2 * third};
    const GeneratorKind kinds[3] = {GeneratorKind::interchanging_rbf, GeneratorKind::moving_squares,
                                    GeneratorKind::transient_chessboard};
    std::vector<MixedSegment> segments;
    std::uint64_t start = 1;
    for (std::size_t s = 0; s < 3; ++s) {
        MixedSegment seg;
        seg.spec = make_default_spec(kinds[s], lens[s], substream_seed(spec.seed, s + 1));
        if (kinds[s] == GeneratorKind::interchanging_rbf) seg.spec.num_classes = spec.num_classes;
        seg.start = start;
        segments.push_back(std::move(seg));
        start += lens[s];
    }
    return segments;
}

const MixedSegment& segment_for_step(const std::vector<MixedSegment>& segments, std::uint64_t step) {
    for (std::size_t s = segments.size(); s-- > 0;) {
        if (step >= segments[s].start) return segments[s];
    }
    return segments.front();
}

}  // namespace

std::string generator_kind_name(GeneratorKind kind) {
    switch (kind) {
        case GeneratorKind::rotating_hyperplane: return "rotating_hyperplane";
        case GeneratorKind::moving_squares: return "moving_squares";
        case GeneratorKind::interchanging_rbf: return "interchanging_rbf";
        case GeneratorKind::transient_chessboard: return "transient_chessboard";
        case GeneratorKind::mixed_drift: return "mixed_drift";
    }
    return "interchanging_rbf";
}

GeneratorKind parse_generator_kind(const std::string& name) {
    if (name == "rotating_hyperplane") return GeneratorKind::rotating_hyperplane;
    if (name == "moving_squares") return GeneratorKind::moving_squares;
    if (name == "interchanging_rbf") return GeneratorKind::interchanging_rbf;
    if (name == "transient_chessboard") return GeneratorKind::transient_chessboard;
    if (name == "mixed_drift") return GeneratorKind::mixed_drift;
    throw std::invalid_argument("unknown generator kind '" + name + "'");
}

double GeneratorSpec::param(const std::string& name, double fallback) const {
    auto it = params.find(name);
    return it == params.end() ? fallback : it->second;
}

void GeneratorSpec::validate() const {
    std::vector<std::string> problems;
    if (num_samples < 1) problems.push_back("num_samples must be >= 1");
    if (label_noise < 0.0 || label_noise >= 1.0) problems.push_back("label_noise must be in [0, 1)");
    switch (kind) {
        case GeneratorKind::rotating_hyperplane:
            if (dimension < 2) problems.push_back("rotating_hyperplane needs dimension >= 2");
            if (num_classes != 2) problems.push_back("rotating_hyperplane has exactly 2 classes");
            break;
        case GeneratorKind::moving_squares:
            if (dimension != 2) problems.push_back("moving_squares requires dimension 2");
            if (num_classes != 4) problems.push_back("moving_squares has exactly 4 classes");
            break;
        case GeneratorKind::interchanging_rbf: {
            if (dimension < 2) problems.push_back("interchanging_rbf needs dimension >= 2");
            if (num_classes < 2) problems.push_back("interchanging_rbf needs at least 2 classes");
            for (std::size_t e = 0; e < drift_schedule.size(); ++e) {
                const auto& p = drift_schedule[e].params;
                if (p.size() == 1 || (p.size() >= 2 && (p[0] < 0 || p[1] < 0 ||
                                                        p[0] >= static_cast<double>(num_classes) ||
                                                        p[1] >= static_cast<double>(num_classes)))) {
                    problems.push_back("swap event " + std::to_string(e) + " has invalid class pair");
                }
            }
            break;
        }
        case GeneratorKind::transient_chessboard: {
            if (dimension != 2) problems.push_back("transient_chessboard requires dimension 2");
            const auto n = static_cast<std::size_t>(param("fields_per_side", 8.0));
            if (n < 2) problems.push_back("fields_per_side must be >= 2");
            if (num_classes < 2 || num_classes > n * n)
                problems.push_back("num_classes must be in [2, fields_per_side^2]");
            break;
        }
        case GeneratorKind::mixed_drift:
            if (dimension != 2) problems.push_back("mixed_drift requires dimension 2");
            if (num_classes < 8) problems.push_back("mixed_drift needs at least 8 classes");
            if (num_samples < 3) problems.push_back("mixed_drift needs at least 3 samples");
            break;
    }
    for (std::size_t e = 1; e < drift_schedule.size(); ++e) {
        if (drift_schedule[e].start_step < drift_schedule[e - 1].start_step) {
            problems.push_back("drift_schedule must be sorted by start_step");
            break;
        }
    }
    if (!problems.empty()) {
        std::string msg = "inconsistent GeneratorSpec:";
        for (const auto& p : problems) msg += " " + p + ";";
        msg.pop_back();
        throw std::invalid_argument(msg);
    }
}

GeneratorSpec make_default_spec(GeneratorKind kind, std::uint64_t num_samples, std::uint64_t seed) {
    GeneratorSpec spec;
    spec.kind = kind;
    spec.num_samples = num_samples;
    spec.seed = seed;
    auto evenly_spaced = [num_samples](std::size_t count) {
        std::vector<std::uint64_t> steps;
        for (std::size_t i = 1; i <= count; ++i) {
            steps.push_back(1 + num_samples * i / (count + 1));
        }
        return steps;
    };
    switch (kind) {
        case GeneratorKind::rotating_hyperplane:
            spec.dimension = 10;
            spec.num_classes = 2;
            spec.params = {{"angle0", 0.0}, {"rate", 0.0}};
            for (auto s : evenly_spaced(4)) spec.drift_schedule.push_back({s, {1.0, 0.0}});
            break;
        case GeneratorKind::moving_squares:
            spec.dimension = 2;
            spec.num_classes = 4;
            spec.params = {{"half_side", 0.1}, {"speed", 3.0 / static_cast<double>(num_samples)}};
            break;
        case GeneratorKind::interchanging_rbf:
            spec.dimension = 2;
            spec.num_classes = 15;
            spec.params = {{"sigma", 0.02}};
            for (auto s : evenly_spaced(4)) spec.drift_schedule.push_back({s, {}});
            break;
        case GeneratorKind::transient_chessboard:
            spec.dimension = 2;
            spec.num_classes = 8;
            spec.params = {{"fields_per_side", 8.0}, {"reveal_fraction", 0.5}};
            break;
        case GeneratorKind::mixed_drift:
            spec.dimension = 2;
            spec.num_classes = 15;
            break;
    }
    return spec;
}

ClassId concept_label(const GeneratorSpec& spec, std::uint64_t step, std::span<const double> x) {
    switch (spec.kind) {
        case GeneratorKind::rotating_hyperplane:
            return hyperplane_label(spec, step, x);
        case GeneratorKind::moving_squares:
            return squares_label(spec, step, x);
        case GeneratorKind::interchanging_rbf: {
            auto centers = rbf_base_centers(spec);
            rbf_apply_swaps_until(spec, step, centers);
            return nearest_center(centers, x);
        }
        case GeneratorKind::transient_chessboard:
            return chessboard_label(spec, x);
        case GeneratorKind::mixed_drift: {
            const auto segments = mixed_segments(spec);
            const MixedSegment& seg = segment_for_step(segments, step);
            return concept_label(seg.spec, step - seg.start + 1, x);
        }
    }
    return 0;
}

namespace {

// Draws the feature vector for one step; the label always comes from
// concept_label so stored labels and the concept function cannot diverge.
FeatureVec sample_features(const GeneratorSpec& spec, std::uint64_t step, Rng& rng,
                           const std::vector<FeatureVec>* rbf_centers_now,
                           const std::vector<std::size_t>* reveal_order) {
    FeatureVec x(spec.dimension);
    switch (spec.kind) {
        case GeneratorKind::rotating_hyperplane: {
            for (auto& v : x) v = rng.next_uniform(-1.0, 1.0);
            break;
        }
        case GeneratorKind::moving_squares: {
            const SquareGeometry geom{spec.param("half_side", 0.1)};
            const std::size_t k = rng.next_index(4);
            x[0] = square_x(spec, k, step) + rng.next_uniform(-geom.half_side, geom.half_side);
            x[1] = geom.row(k) + rng.next_uniform(-geom.half_side, geom.half_side);
            break;
        }
        case GeneratorKind::interchanging_rbf: {
            const double sigma = spec.param("sigma", 0.02);
            const auto& centers = *rbf_centers_now;
            const std::size_t c = rng.next_index(spec.num_classes);
            for (int attempt = 0; attempt < 100; ++attempt) {
                for (std::size_t d = 0; d < spec.dimension; ++d) {
                    x[d] = centers[c][d] + sigma * rng.next_normal();
                }
                if (nearest_center(centers, x) == static_cast<ClassId>(c)) return x;
            }
            x = centers[c];  // overlap too unlikely to matter; keep labels consistent
            break;
        }
        case GeneratorKind::transient_chessboard: {
            const std::size_t n = static_cast<std::size_t>(spec.param("fields_per_side", 8.0));
            const std::uint64_t reveal = chessboard_reveal_steps(spec);
            if (step <= reveal && reveal > 0) {
                const std::size_t field_count = n * n;
                const std::size_t idx =
                    static_cast<std::size_t>((step - 1) * field_count / reveal);
                const std::size_t field = (*reveal_order)[std::min(idx, field_count - 1)];
                const double cell = 1.0 / static_cast<double>(n);
                x[0] = (static_cast<double>(field % n) + rng.next_double()) * cell;
                x[1] = (static_cast<double>(field / n) + rng.next_double()) * cell;
            } else {
                x[0] = rng.next_double();
                x[1] = rng.next_double();
            }
            break;
        }
        case GeneratorKind::mixed_drift:
            break;  // handled by the caller via segments
    }
    return x;
}

}  // namespace

Stream generate(const GeneratorSpec& spec) {
    spec.validate();

    Stream stream;
    stream.descriptor.dimension = spec.dimension;
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        stream.descriptor.known_classes.push_back(static_cast<ClassId>(c));
    }
    stream.descriptor.length_hint = spec.num_samples;
    stream.instances.reserve(spec.num_samples);

    Rng noise_rng(substream_seed(spec.seed, 0x4015E));

    if (spec.kind == GeneratorKind::mixed_drift) {
        const auto segments = mixed_segments(spec);
        std::uint64_t step = 1;
        for (const auto& seg : segments) {
            Stream part = generate(seg.spec);
            for (auto& inst : part.instances) {
                inst.step = step++;
                stream.instances.push_back(std::move(inst));
            }
        }
    } else {
        Rng rng(substream_seed(spec.seed, 0));

        // per-kind precomputed state
        std::vector<FeatureVec> rbf_centers;
        std::size_t next_swap = 0;
        std::vector<std::size_t> reveal_order;
        if (spec.kind == GeneratorKind::interchanging_rbf) rbf_centers = rbf_base_centers(spec);
        if (spec.kind == GeneratorKind::transient_chessboard) reveal_order = chessboard_reveal_order(spec);

        for (std::uint64_t step = 1; step <= spec.num_samples; ++step) {
            while (spec.kind == GeneratorKind::interchanging_rbf &&
                   next_swap < spec.drift_schedule.size() &&
                   spec.drift_schedule[next_swap].start_step <= step) {
                auto [i, j] = rbf_swap_pair(spec, next_swap);
                std::swap(rbf_centers[i], rbf_centers[j]);
                ++next_swap;
            }
            LabeledInstance inst;
            inst.step = step;
            inst.features = sample_features(spec, step, rng, &rbf_centers, &reveal_order);
            inst.label = concept_label(spec, step, inst.features);
            stream.instances.push_back(std::move(inst));
        }
    }

    if (spec.label_noise > 0.0) {
        for (auto& inst : stream.instances) {
            if (noise_rng.next_double() < spec.label_noise) {
                inst.label = (inst.label + 1 +
                              static_cast<ClassId>(noise_rng.next_index(spec.num_classes - 1))) %
                             static_cast<ClassId>(spec.num_classes);
            }
        }
    }
    return stream;
}

// ---------------------------------------------------------------------------
// Plain-text record
// ---------------------------------------------------------------------------

namespace {

std::string double_text(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    parts.push_back(cur);
    return parts;
}

}  // namespace

std::string format_generator_spec(const GeneratorSpec& spec) {
    std::ostringstream out;
    out << "kind=" << generator_kind_name(spec.kind);
    out << ";samples=" << spec.num_samples;
    out << ";dim=" << spec.dimension;
    out << ";classes=" << spec.num_classes;
    out << ";seed=" << spec.seed;
    out << ";noise=" << double_text(spec.label_noise);
    out << ";params=";
    bool first = true;
    for (const auto& [name, value] : spec.params) {
        if (!first) out << ",";
        out << name << ":" << double_text(value);
        first = false;
    }
    out << ";schedule=";
    first = true;
    for (const auto& event : spec.drift_schedule) {
        if (!first) out << "|";
        out << event.start_step;
        for (double p : event.params) out << ":" << double_text(p);
        first = false;
    }
    return out.str();
}

GeneratorSpec parse_generator_spec(const std::string& record) {
    // Pass 1: kind, samples and seed pick the defaults everything else
    // overrides, so default schedules and speeds scale with stream length.
    std::optional<GeneratorKind> kind;
    std::uint64_t num_samples = 20000;
    std::uint64_t seed = 1;
    auto fields = split(record, ';');
    for (const auto& field : fields) {
        if (field.empty()) continue;
        auto eq = field.find('=');
        try {
            if (eq == std::string::npos) {
                if (!kind) kind = parse_generator_kind(field);  // bare kind shorthand
            } else if (field.substr(0, eq) == "kind") {
                kind = parse_generator_kind(field.substr(eq + 1));
            } else if (field.substr(0, eq) == "samples") {
                num_samples = std::stoull(field.substr(eq + 1));
            } else if (field.substr(0, eq) == "seed") {
                seed = std::stoull(field.substr(eq + 1));
            }
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("cannot parse generator spec field '" + field + "'");
        }
    }
    if (!kind) throw std::invalid_argument("generator spec needs kind=<name>: '" + record + "'");

    GeneratorSpec spec = make_default_spec(*kind, num_samples, seed);
    for (const auto& field : fields) {
        if (field.empty()) continue;
        auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        try {
            if (key == "kind" || key == "samples" || key == "seed") {
                // applied in pass 1
            } else if (key == "dim") {
                spec.dimension = std::stoul(value);
            } else if (key == "classes") {
                spec.num_classes = std::stoul(value);
            } else if (key == "noise") {
                spec.label_noise = std::stod(value);
            } else if (key == "params") {
                for (const auto& entry : split(value, ',')) {
                    if (entry.empty()) continue;
                    auto colon = entry.find(':');
                    if (colon == std::string::npos) {
                        throw std::invalid_argument("param entry '" + entry + "' needs name:value");
                    }
                    spec.params[entry.substr(0, colon)] = std::stod(entry.substr(colon + 1));
                }
            } else if (key == "schedule") {
                spec.drift_schedule.clear();
                for (const auto& entry : split(value, '|')) {
                    if (entry.empty()) continue;
                    auto parts = split(entry, ':');
                    DriftEvent event;
                    event.start_step = std::stoull(parts[0]);
                    for (std::size_t i = 1; i < parts.size(); ++i) {
                        event.params.push_back(std::stod(parts[i]));
                    }
                    spec.drift_schedule.push_back(std::move(event));
                }
            } else {
                throw std::invalid_argument("unknown generator spec field '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("cannot parse generator spec field '" + field + "'");
        }
    }
    spec.validate();
    return spec;
}

}  // namespace driftstream
