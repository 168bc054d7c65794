#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace driftstream {

using ClassId = std::int64_t;
using FeatureVec = std::vector<double>;

// One labeled sample of a stream.  `step` is the 1-based arrival index and
// strictly increases by 1 across a stream.
struct LabeledInstance {
    FeatureVec features;
    ClassId label = 0;
    std::uint64_t step = 0;
};

struct StreamDescriptor {
    std::size_t dimension = 0;
    std::vector<ClassId> known_classes;  // sorted; may be empty (classes can appear mid-stream)
    std::optional<std::uint64_t> length_hint;
};

// A fully materialized stream.  Consumption order is the vector order;
// descriptors are immutable and freely shareable.
struct Stream {
    StreamDescriptor descriptor;
    std::vector<LabeledInstance> instances;
};

// Loads a comma-separated file into a stream.
//   label_column: 0-based index of the label column, -1 selects the last column.
//   has_header:   true skips the first row.
// Feature cells must parse as finite reals.  The label column is used as-is
// when every cell parses as a non-negative integer; otherwise tokens are
// mapped to dense integers in first-appearance order.
// Throws std::runtime_error with a diagnostic naming row and column on
// unreadable files, non-numeric feature cells, or ragged rows.
Stream load_csv_stream(const std::string& path, int label_column = -1, bool has_header = false);

// True if the first row of the file looks like a header (any cell that is
// not a number).  Convenience for CLI auto-detection.
bool detect_csv_header(const std::string& path);

// Writes a stream as CSV (features then label).  Reals are written with 17
// significant digits so a reload reproduces them bit-exactly.
void write_csv_stream(const std::string& path, const Stream& stream, bool with_header = false);

struct StreamStats {
    std::size_t total = 0;
    std::map<ClassId, std::size_t> class_counts;
    std::vector<std::pair<double, double>> feature_min_max;  // per dimension
};

StreamStats stream_stats(std::span<const LabeledInstance> instances);

std::string format_stream_stats(const StreamStats& stats);

}  // namespace driftstream
