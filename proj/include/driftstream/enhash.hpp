#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "driftstream/stream.hpp"

namespace driftstream {

enum class Variant { full, lambda0, no_weights };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct EnhashConfig {
    std::size_t num_estimators = 10;
    double bin_width = 0.1;
    double decay_rate = 0.015;   // per-step exponent of the 2^(-rate*dt) forgetting factor
    std::uint64_t seed = 1;
    Variant variant = Variant::full;
    double distance_epsilon = 1e-9;

    // lambda0 runs with forgetting disabled regardless of decay_rate
    double effective_decay_rate() const {
        return variant == Variant::lambda0 ? 0.0 : decay_rate;
    }

    // Throws std::invalid_argument listing every violated field.
    void validate() const;
};

EnhashConfig make_variant(EnhashConfig config, Variant variant);

// Forgetting multiplier 2^(-lambda*dt); 1 when dt = 0 or lambda = 0.
double decay_factor(double lambda, double dt);

// One projection hash: code(x) = floor((w.x + bias) / bin_width).
struct ProjectionEstimator {
    std::vector<double> weights;
    double bias = 0.0;
    double bin_width = 0.1;

    // Throws std::runtime_error when the projection leaves the signed 64-bit
    // code range (pathological scale / bin_width) or is not finite.
    std::int64_t hash_code(std::span<const double> x) const;
};

// Per-class statistics inside one bucket.  A class is present with all four
// fields or not at all.
struct ClassStats {
    double count = 0.0;              // decayed, bucket-normalized weight
    std::uint64_t tstamp = 0;        // step of the last update for this class
    std::uint64_t samples = 0;       // raw number of inserts
    std::vector<double> feature_sum; // elementwise sum of inserted samples
};

struct BucketState {
    std::map<ClassId, ClassStats> classes;

    // Most recent update step over all classes in the bucket.
    std::uint64_t latest_tstamp() const;
};

// Mean of the samples of class c inserted into the bucket.
// Throws std::out_of_range when c is absent; callers skip absent classes.
FeatureVec class_mean(const BucketState& bucket, ClassId c);

// Applies one insert (y at step t with features x) to a bucket:
// decayed count increment, renormalization, timestamp and raw accumulators.
void bucket_apply_update(BucketState& bucket, ClassId y, std::uint64_t t,
                         std::span<const double> x, double lambda);

struct Prediction {
    ClassId label = 0;
    std::map<ClassId, double> class_weights;  // accumulated per-class evidence
};

// Largest-weight class; ties go to the smallest class id.
ClassId argmax_label(const std::map<ClassId, double>& class_weights, ClassId fallback);

struct ModelFootprint {
    std::size_t total_buckets = 0;
    std::vector<std::size_t> buckets_per_estimator;
    std::size_t approx_bytes = 0;
};

// Streaming projection-hash ensemble classifier.
//
// Mutations (process/update/advance_step) must be externally serialized;
// predict is read-only and may run concurrently with other predicts.
// Distinct models run fully in parallel.
class EnhashModel {
public:
    EnhashModel(const StreamDescriptor& descriptor, EnhashConfig config);

    // Evaluates the ensemble for candidate x arriving at step() + 1.
    // Does not mutate the model.
    Prediction predict(std::span<const double> x) const;

    // Inserts (x, y) at the current step.  advance_step() (or process) must
    // have been called for this instance beforehand.
    void update(std::span<const double> x, ClassId y);

    void advance_step() { ++step_; }

    // Test-then-train on one instance: predicts, then trains, exactly once
    // each.  Requires inst.step == step() + 1.
    Prediction process(const LabeledInstance& inst);

    std::size_t dimension() const { return dimension_; }
    std::uint64_t step() const { return step_; }
    const EnhashConfig& config() const { return config_; }
    std::span<const ProjectionEstimator> estimators() const { return estimators_; }
    const std::unordered_map<std::int64_t, BucketState>& buckets(std::size_t estimator) const {
        return buckets_.at(estimator);
    }
    const std::map<ClassId, std::uint64_t>& classes_seen() const { return classes_seen_; }
    ClassId fallback_class() const { return fallback_class_; }

    ModelFootprint footprint() const;

    // Self-describing JSON snapshot; round-trips bit-exactly through restore.
    std::string snapshot() const;
    static EnhashModel restore(const std::string& snapshot_text);

private:
    EnhashConfig config_;
    std::size_t dimension_ = 0;
    std::vector<ProjectionEstimator> estimators_;
    std::vector<std::unordered_map<std::int64_t, BucketState>> buckets_;
    std::map<ClassId, std::uint64_t> classes_seen_;  // global per-class counts
    std::uint64_t step_ = 0;
    ClassId fallback_class_ = 0;

    void check_dimension(std::span<const double> x) const;
};

ModelFootprint model_footprint(const EnhashModel& model);

}  // namespace driftstream
