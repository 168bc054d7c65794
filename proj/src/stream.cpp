#include "driftstream/stream.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace driftstream {

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& cell, double& out) {
    std::string t = trim(cell);
    if (t.empty()) return false;
    const char* begin = t.c_str();
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(begin, &end);
    if (end != begin + t.size() || errno == ERANGE) return false;
    out = v;
    return true;
}

bool parse_nonneg_int(const std::string& cell, ClassId& out) {
    std::string t = trim(cell);
    if (t.empty()) return false;
    ClassId v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || v < 0) return false;
    out = v;
    return true;
}

}  // namespace

Stream load_csv_stream(const std::string& path, int label_column, bool has_header) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(path + ": cannot open file");
    }

    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && has_header) continue;
        if (trim(line).empty()) continue;
        rows.push_back(split_csv_row(line));
    }
    if (rows.empty()) {
        throw std::runtime_error(path + ": no data rows");
    }

    const std::size_t columns = rows.front().size();
    if (columns < 2) {
        throw std::runtime_error(path + ": need at least one feature column and a label column");
    }
    std::size_t label_idx;
    if (label_column < 0) {
        label_idx = columns - 1;
    } else if (static_cast<std::size_t>(label_column) < columns) {
        label_idx = static_cast<std::size_t>(label_column);
    } else {
        throw std::runtime_error(path + ": label column " + std::to_string(label_column) +
                                 " out of range (row has " + std::to_string(columns) + " columns)");
    }

    const std::size_t header_offset = has_header ? 1 : 0;
    const std::size_t dim = columns - 1;

    // First pass: decide label handling.  Numeric non-negative integer labels
    // pass through; anything else maps tokens to dense ids by first appearance.
    bool labels_numeric = true;
    for (const auto& row : rows) {
        if (row.size() != columns) continue;  // reported below with position
        ClassId v;
        if (!parse_nonneg_int(row[label_idx], v)) {
            labels_numeric = false;
            break;
        }
    }

    Stream stream;
    stream.descriptor.dimension = dim;
    stream.instances.reserve(rows.size());
    std::unordered_map<std::string, ClassId> token_map;
    std::map<ClassId, bool> classes;

    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::size_t file_row = r + 1 + header_offset;
        if (row.size() != columns) {
            throw std::runtime_error(path + ": row " + std::to_string(file_row) + ": ragged row (" +
                                     std::to_string(row.size()) + " columns, expected " +
                                     std::to_string(columns) + ")");
        }
        LabeledInstance inst;
        inst.features.reserve(dim);
        for (std::size_t c = 0; c < columns; ++c) {
            if (c == label_idx) continue;
            double v;
            if (!parse_double(row[c], v) || !std::isfinite(v)) {
                throw std::runtime_error(path + ": row " + std::to_string(file_row) + ", column " +
                                         std::to_string(c + 1) + ": non-numeric feature cell '" +
                                         row[c] + "'");
            }
            inst.features.push_back(v);
        }
        if (labels_numeric) {
            ClassId v = 0;
            parse_nonneg_int(row[label_idx], v);
            inst.label = v;
        } else {
            std::string token = trim(row[label_idx]);
            auto [it, inserted] = token_map.emplace(token, static_cast<ClassId>(token_map.size()));
            inst.label = it->second;
        }
        classes[inst.label] = true;
        inst.step = static_cast<std::uint64_t>(r + 1);
        stream.instances.push_back(std::move(inst));
    }

    for (const auto& [cls, _] : classes) stream.descriptor.known_classes.push_back(cls);
    stream.descriptor.length_hint = stream.instances.size();
    return stream;
}

bool detect_csv_header(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(path + ": cannot open file");
    }
    std::string line;
    if (!std::getline(in, line)) return false;
    for (const auto& cell : split_csv_row(line)) {
        double v;
        if (!parse_double(cell, v)) return true;
    }
    return false;
}

void write_csv_stream(const std::string& path, const Stream& stream, bool with_header) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error(path + ": cannot open file for writing");
    }
    const std::size_t dim = stream.descriptor.dimension;
    if (with_header) {
        for (std::size_t c = 0; c < dim; ++c) out << "f" << c << ",";
        out << "label\n";
    }
    char buf[40];
    for (const auto& inst : stream.instances) {
        for (double v : inst.features) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << buf << ",";
        }
        out << inst.label << "\n";
    }
    if (!out) {
        throw std::runtime_error(path + ": write failed");
    }
}

StreamStats stream_stats(std::span<const LabeledInstance> instances) {
    StreamStats stats;
    for (const auto& inst : instances) {
        ++stats.total;
        ++stats.class_counts[inst.label];
        if (stats.feature_min_max.size() < inst.features.size()) {
            stats.feature_min_max.resize(inst.features.size(),
                                         {std::numeric_limits<double>::infinity(),
                                          -std::numeric_limits<double>::infinity()});
        }
        for (std::size_t d = 0; d < inst.features.size(); ++d) {
            auto& [lo, hi] = stats.feature_min_max[d];
            lo = std::min(lo, inst.features[d]);
            hi = std::max(hi, inst.features[d]);
        }
    }
    return stats;
}

std::string format_stream_stats(const StreamStats& stats) {
    std::ostringstream out;
    out << "instances: " << stats.total << "\n";
    out << "classes: " << stats.class_counts.size() << "\n";
    for (const auto& [cls, n] : stats.class_counts) {
        out << "  class " << cls << ": " << n << "\n";
    }
    for (std::size_t d = 0; d < stats.feature_min_max.size(); ++d) {
        out << "  feature " << d << ": min " << stats.feature_min_max[d].first << ", max "
            << stats.feature_min_max[d].second << "\n";
    }
    return out.str();
}

}  // namespace driftstream
