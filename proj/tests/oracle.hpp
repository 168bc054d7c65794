#pragma once

// Full-history replay reference for EnhashModel.  Keeps every processed
// instance in per-(estimator, code) insertion logs and recomputes bucket
// statistics from scratch for each prediction, so any incremental
// state-management bug in the model (stale timestamps, missed
// renormalization, cross-bucket contamination) shows up as a divergence.
// Arithmetic mirrors the model's operation order exactly, which makes label
// comparisons exact and count comparisons tight.

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "driftstream/enhash.hpp"
#include "driftstream/stream.hpp"

namespace driftstream::testing {

struct ReplayedClass {
    double count = 0.0;
    std::uint64_t tstamp = 0;
    std::uint64_t samples = 0;
    FeatureVec feature_sum;
};

using ReplayedBucket = std::map<ClassId, ReplayedClass>;

class ReplayOracle {
  public:
    ReplayOracle(std::span<const ProjectionEstimator> estimators, EnhashConfig config,
                 std::size_t dimension)
        : estimators_(estimators.begin(), estimators.end()),
          config_(config),
          lambda_(config.effective_decay_rate()),
          dimension_(dimension),
          logs_(estimators_.size()) {}

    // Prediction for inst.step from the retained history, then the instance
    // is appended to the history.
    ClassId process(const LabeledInstance& inst) {
        const ClassId predicted = predict(inst.features, inst.step);
        for (std::size_t l = 0; l < estimators_.size(); ++l) {
            logs_[l][estimators_[l].hash_code(inst.features)].push_back(
                {inst.step, inst.label, inst.features});
        }
        ++label_counts_[inst.label];
        return predicted;
    }

    ClassId predict(std::span<const double> x, std::uint64_t step) const {
        std::map<ClassId, double> weights;
        for (std::size_t l = 0; l < estimators_.size(); ++l) {
            const std::int64_t code = estimators_[l].hash_code(x);
            auto it = logs_[l].find(code);
            if (it == logs_[l].end()) continue;
            const ReplayedBucket bucket = replay_entries(it->second);

            std::uint64_t max_ts = 0;
            for (const auto& [cls, s] : bucket) max_ts = std::max(max_ts, s.tstamp);
            const double decay =
                std::exp2(-lambda_ * (static_cast<double>(step) - static_cast<double>(max_ts)));

            for (const auto& [cls, s] : bucket) {
                double denom = 1.0;
                if (config_.variant != Variant::no_weights) {
                    double sq = 0.0;
                    const double inv_n = 1.0 / static_cast<double>(s.samples);
                    for (std::size_t d = 0; d < dimension_; ++d) {
                        const double diff = x[d] - s.feature_sum[d] * inv_n;
                        sq += diff * diff;
                    }
                    denom = std::max(std::sqrt(sq), config_.distance_epsilon);
                }
                weights[cls] += std::log1p(decay * s.count / denom);
            }
        }

        ClassId best = majority_label();
        double best_weight = 0.0;
        bool any = false;
        for (const auto& [cls, w] : weights) {
            if (!any || w > best_weight) {
                best = cls;
                best_weight = w;
                any = true;
            }
        }
        if (!any || best_weight == 0.0) return majority_label();
        return best;
    }

    // From-scratch state of one bucket.
    ReplayedBucket replay_bucket(std::size_t estimator, std::int64_t code) const {
        auto it = logs_[estimator].find(code);
        if (it == logs_[estimator].end()) return {};
        return replay_entries(it->second);
    }

    // Codes this oracle has history for, per estimator.
    std::vector<std::int64_t> known_codes(std::size_t estimator) const {
        std::vector<std::int64_t> codes;
        for (const auto& [code, entries] : logs_[estimator]) codes.push_back(code);
        return codes;
    }

    ClassId majority_label() const {
        ClassId best = 0;
        std::uint64_t best_count = 0;
        for (const auto& [cls, n] : label_counts_) {
            if (n > best_count) {
                best = cls;
                best_count = n;
            }
        }
        return best;
    }

  private:
    struct LogEntry {
        std::uint64_t step;
        ClassId label;
        FeatureVec x;
    };

    ReplayedBucket replay_entries(const std::vector<LogEntry>& entries) const {
        ReplayedBucket state;
        for (const auto& entry : entries) {
            auto [it, inserted] = state.try_emplace(entry.label);
            ReplayedClass& s = it->second;
            if (inserted) {
                s.feature_sum.assign(dimension_, 0.0);
                s.count = 1.0;
            } else {
                const double dt = static_cast<double>(entry.step - s.tstamp);
                s.count = 1.0 + std::exp2(-lambda_ * dt) * s.count;
            }
            double total = 0.0;
            for (const auto& [cls, cs] : state) total += cs.count;
            for (auto& [cls, cs] : state) cs.count /= total;
            s.tstamp = entry.step;
            s.samples += 1;
            for (std::size_t d = 0; d < dimension_; ++d) s.feature_sum[d] += entry.x[d];
        }
        return state;
    }

    std::vector<ProjectionEstimator> estimators_;
    EnhashConfig config_;
    double lambda_;
    std::size_t dimension_;
    std::vector<std::map<std::int64_t, std::vector<LogEntry>>> logs_;
    std::map<ClassId, std::uint64_t> label_counts_;
};

}  // namespace driftstream::testing
