#include "driftstream/enhash.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "driftstream/rng.hpp"
#include "json.hpp"

namespace driftstream {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::lambda0: return "lambda0";
        case Variant::no_weights: return "no_weights";
    }
    return "full";
}

Variant parse_variant(const std::string& name) {
    if (name == "full") return Variant::full;
    if (name == "lambda0") return Variant::lambda0;
    if (name == "no_weights") return Variant::no_weights;
    throw std::invalid_argument("unknown variant '" + name + "' (expected full, lambda0 or no_weights)");
}

void EnhashConfig::validate() const {
    std::vector<std::string> problems;
    if (num_estimators < 1) problems.push_back("num_estimators must be >= 1");
    if (!(bin_width > 0.0) || !std::isfinite(bin_width)) problems.push_back("bin_width must be > 0");
    if (!(decay_rate >= 0.0) || !std::isfinite(decay_rate)) problems.push_back("decay_rate must be >= 0");
    if (!(distance_epsilon > 0.0)) problems.push_back("distance_epsilon must be > 0");
    if (!problems.empty()) {
        std::string msg = "invalid EnhashConfig:";
        for (const auto& p : problems) msg += " " + p + ";";
        msg.pop_back();
        throw std::invalid_argument(msg);
    }
}

EnhashConfig make_variant(EnhashConfig config, Variant variant) {
    config.variant = variant;
    return config;
}

double decay_factor(double lambda, double dt) {
    return std::exp2(-lambda * dt);
}

std::int64_t ProjectionEstimator::hash_code(std::span<const double> x) const {
    if (x.size() != weights.size()) {
        throw std::invalid_argument("hash_code: feature vector has " + std::to_string(x.size()) +
                                    " dimensions, estimator expects " + std::to_string(weights.size()));
    }
    double dot = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) dot += weights[j] * x[j];
    const double scaled = (dot + bias) / bin_width;
    // 2^63 is exactly representable; anything at or beyond it cannot be a
    // valid signed code, and wrapped codes would silently alias buckets.
    if (!(scaled >= -9223372036854775808.0 && scaled < 9223372036854775808.0)) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%g", scaled);
        throw std::runtime_error(std::string("hash_code: projection value ") + buf +
                                 " exceeds the signed 64-bit code range (bin_width " +
                                 std::to_string(bin_width) + ")");
    }
    return static_cast<std::int64_t>(std::floor(scaled));
}

std::uint64_t BucketState::latest_tstamp() const {
    std::uint64_t latest = 0;
    for (const auto& [cls, stats] : classes) latest = std::max(latest, stats.tstamp);
    return latest;
}

FeatureVec class_mean(const BucketState& bucket, ClassId c) {
    auto it = bucket.classes.find(c);
    if (it == bucket.classes.end()) {
        throw std::out_of_range("class_mean: class " + std::to_string(c) + " not present in bucket");
    }
    const ClassStats& stats = it->second;
    FeatureVec mean(stats.feature_sum.size());
    for (std::size_t d = 0; d < mean.size(); ++d) {
        mean[d] = stats.feature_sum[d] / static_cast<double>(stats.samples);
    }
    return mean;
}

void bucket_apply_update(BucketState& bucket, ClassId y, std::uint64_t t,
                         std::span<const double> x, double lambda) {
    auto [it, inserted] = bucket.classes.try_emplace(y);
    ClassStats& stats = it->second;
    if (inserted) {
        stats.feature_sum.assign(x.size(), 0.0);
        stats.count = 1.0;  // decayed prior is 0 for a class never seen here
    } else {
        const double dt = static_cast<double>(t - stats.tstamp);
        stats.count = 1.0 + decay_factor(lambda, dt) * stats.count;
    }
    double sum = 0.0;
    for (const auto& [cls, cs] : bucket.classes) sum += cs.count;
    for (auto& [cls, cs] : bucket.classes) cs.count /= sum;

    stats.tstamp = t;
    stats.samples += 1;
    for (std::size_t d = 0; d < x.size(); ++d) stats.feature_sum[d] += x[d];
}

ClassId argmax_label(const std::map<ClassId, double>& class_weights, ClassId fallback) {
    ClassId best = fallback;
    double best_weight = 0.0;
    bool any = false;
    for (const auto& [cls, w] : class_weights) {
        if (!any || w > best_weight) {
            best = cls;
            best_weight = w;
            any = true;
        }
    }
    // no evidence at all: every weight zero (or empty map)
    if (!any || best_weight == 0.0) return fallback;
    return best;
}

EnhashModel::EnhashModel(const StreamDescriptor& descriptor, EnhashConfig config)
    : config_(config), dimension_(descriptor.dimension) {
    config_.validate();
    if (descriptor.dimension < 1) {
        throw std::invalid_argument("EnhashModel: stream dimension must be >= 1");
    }
    estimators_.reserve(config_.num_estimators);
    for (std::size_t l = 0; l < config_.num_estimators; ++l) {
        Rng rng(substream_seed(config_.seed, l));
        ProjectionEstimator est;
        est.bin_width = config_.bin_width;
        est.weights.resize(dimension_);
        for (auto& w : est.weights) w = rng.next_normal();
        est.bias = rng.next_uniform(-config_.bin_width, config_.bin_width);
        estimators_.push_back(std::move(est));
    }
    buckets_.resize(config_.num_estimators);
}

void EnhashModel::check_dimension(std::span<const double> x) const {
    if (x.size() != dimension_) {
        throw std::invalid_argument("feature vector has " + std::to_string(x.size()) +
                                    " dimensions, model expects " + std::to_string(dimension_));
    }
}

Prediction EnhashModel::predict(std::span<const double> x) const {
    check_dimension(x);
    const double lambda = config_.effective_decay_rate();
    const double t_candidate = static_cast<double>(step_ + 1);

    Prediction pred;
    for (std::size_t l = 0; l < estimators_.size(); ++l) {
        const std::int64_t code = estimators_[l].hash_code(x);
        auto bucket_it = buckets_[l].find(code);
        if (bucket_it == buckets_[l].end()) continue;  // unpopulated bucket contributes nothing
        const BucketState& bucket = bucket_it->second;

        const double dt = t_candidate - static_cast<double>(bucket.latest_tstamp());
        const double decay = decay_factor(lambda, dt);

        for (const auto& [cls, stats] : bucket.classes) {
            double denom = 1.0;
            if (config_.variant != Variant::no_weights) {
                double sq = 0.0;
                const double inv_n = 1.0 / static_cast<double>(stats.samples);
                for (std::size_t d = 0; d < dimension_; ++d) {
                    const double diff = x[d] - stats.feature_sum[d] * inv_n;
                    sq += diff * diff;
                }
                denom = std::max(std::sqrt(sq), config_.distance_epsilon);
            }
            const double v = decay * stats.count / denom;
            pred.class_weights[cls] += std::log1p(v);
        }
    }
    pred.label = argmax_label(pred.class_weights, fallback_class_);
    return pred;
}

void EnhashModel::update(std::span<const double> x, ClassId y) {
    check_dimension(x);
    const double lambda = config_.effective_decay_rate();
    for (std::size_t l = 0; l < estimators_.size(); ++l) {
        const std::int64_t code = estimators_[l].hash_code(x);
        bucket_apply_update(buckets_[l][code], y, step_, x, lambda);
    }
    ++classes_seen_[y];

    ClassId best = 0;
    std::uint64_t best_count = 0;
    for (const auto& [cls, n] : classes_seen_) {
        if (n > best_count) {
            best = cls;
            best_count = n;
        }
    }
    fallback_class_ = best;
}

Prediction EnhashModel::process(const LabeledInstance& inst) {
    if (inst.step != step_ + 1) {
        throw std::runtime_error("process: out-of-order instance (step " + std::to_string(inst.step) +
                                 ", expected " + std::to_string(step_ + 1) + ")");
    }
    Prediction pred;
    try {
        pred = predict(inst.features);
        advance_step();
        update(inst.features, inst.label);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error("instance at step " + std::to_string(inst.step) + ": " + e.what());
    }
    return pred;
}

ModelFootprint EnhashModel::footprint() const {
    ModelFootprint fp;
    fp.buckets_per_estimator.reserve(buckets_.size());
    std::size_t bytes = sizeof(EnhashModel) + estimators_.size() * (sizeof(ProjectionEstimator) + dimension_ * sizeof(double));
    for (const auto& store : buckets_) {
        fp.buckets_per_estimator.push_back(store.size());
        fp.total_buckets += store.size();
        for (const auto& [code, bucket] : store) {
            bytes += sizeof(std::int64_t) + sizeof(BucketState) + 32;
            bytes += bucket.classes.size() * (sizeof(ClassStats) + dimension_ * sizeof(double) + 48);
        }
    }
    fp.approx_bytes = bytes;
    return fp;
}

ModelFootprint model_footprint(const EnhashModel& model) { return model.footprint(); }

// ---------------------------------------------------------------------------
// Snapshot serialization
// ---------------------------------------------------------------------------

namespace {

nlohmann::json config_to_json(const EnhashConfig& c) {
    return nlohmann::json{{"num_estimators", c.num_estimators}, {"bin_width", c.bin_width},
                          {"decay_rate", c.decay_rate},         {"seed", c.seed},
                          {"variant", variant_name(c.variant)}, {"distance_epsilon", c.distance_epsilon}};
}

EnhashConfig config_from_json(const nlohmann::json& j) {
    EnhashConfig c;
    c.num_estimators = j.at("num_estimators").get<std::size_t>();
    c.bin_width = j.at("bin_width").get<double>();
    c.decay_rate = j.at("decay_rate").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.distance_epsilon = j.at("distance_epsilon").get<double>();
    return c;
}

}  // namespace

std::string EnhashModel::snapshot() const {
    nlohmann::json j;
    j["format"] = "enhash-snapshot";
    j["version"] = 1;
    j["config"] = config_to_json(config_);
    j["dimension"] = dimension_;
    j["step"] = step_;
    j["fallback_class"] = fallback_class_;

    auto& classes = j["classes_seen"] = nlohmann::json::array();
    for (const auto& [cls, n] : classes_seen_) classes.push_back({cls, n});

    auto& ests = j["estimators"] = nlohmann::json::array();
    for (std::size_t l = 0; l < estimators_.size(); ++l) {
        nlohmann::json je;
        je["weights"] = estimators_[l].weights;
        je["bias"] = estimators_[l].bias;
        auto& jbuckets = je["buckets"] = nlohmann::json::array();
        // canonical order so identical models serialize to identical bytes
        std::map<std::int64_t, const BucketState*> ordered;
        for (const auto& [code, bucket] : buckets_[l]) ordered.emplace(code, &bucket);
        for (const auto& [code, bucket] : ordered) {
            nlohmann::json jb;
            jb["code"] = code;
            auto& jcls = jb["classes"] = nlohmann::json::array();
            for (const auto& [cls, stats] : bucket->classes) {
                jcls.push_back({{"label", cls},
                                {"counts", stats.count},
                                {"tstamp", stats.tstamp},
                                {"sample_counts", stats.samples},
                                {"sample_sums", stats.feature_sum}});
            }
            jbuckets.push_back(std::move(jb));
        }
        ests.push_back(std::move(je));
    }
    return j.dump();
}

EnhashModel EnhashModel::restore(const std::string& snapshot_text) {
    nlohmann::json j = nlohmann::json::parse(snapshot_text);
    if (j.value("format", "") != "enhash-snapshot") {
        throw std::runtime_error("restore: not an enhash snapshot");
    }
    StreamDescriptor desc;
    desc.dimension = j.at("dimension").get<std::size_t>();
    EnhashModel model(desc, config_from_json(j.at("config")));
    model.step_ = j.at("step").get<std::uint64_t>();
    model.fallback_class_ = j.at("fallback_class").get<ClassId>();
    for (const auto& pair : j.at("classes_seen")) {
        model.classes_seen_[pair.at(0).get<ClassId>()] = pair.at(1).get<std::uint64_t>();
    }
    const auto& ests = j.at("estimators");
    for (std::size_t l = 0; l < model.estimators_.size(); ++l) {
        const auto& je = ests.at(l);
        model.estimators_[l].weights = je.at("weights").get<std::vector<double>>();
        model.estimators_[l].bias = je.at("bias").get<double>();
        for (const auto& jb : je.at("buckets")) {
            BucketState& bucket = model.buckets_[l][jb.at("code").get<std::int64_t>()];
            for (const auto& jc : jb.at("classes")) {
                ClassStats stats;
                stats.count = jc.at("counts").get<double>();
                stats.tstamp = jc.at("tstamp").get<std::uint64_t>();
                stats.samples = jc.at("sample_counts").get<std::uint64_t>();
                stats.feature_sum = jc.at("sample_sums").get<std::vector<double>>();
                bucket.classes.emplace(jc.at("label").get<ClassId>(), std::move(stats));
            }
        }
    }
    return model;
}

}  // namespace driftstream
