#include "driftstream/enhash.hpp"

#include <cmath>
#include <set>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include "driftstream/rng.hpp"
#include "oracle.hpp"
#include "synth.hpp"

using namespace driftstream;
using driftstream::testing::random_stream;
using driftstream::testing::ReplayOracle;

namespace {

StreamDescriptor desc2d() {
    StreamDescriptor d;
    d.dimension = 2;
    return d;
}

EnhashConfig small_config() {
    EnhashConfig c;
    c.num_estimators = 3;
    c.bin_width = 0.5;
    c.decay_rate = 0.015;
    c.seed = 11;
    return c;
}

}  // namespace

TEST_CASE("config validation rejects bad fields and lists every problem") {
    EnhashConfig c;
    c.bin_width = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);

    c.num_estimators = 0;
    c.distance_epsilon = 0.0;
    try {
        c.validate();
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& err) {
        const std::string msg = err.what();
        CHECK(msg.find("num_estimators") != std::string::npos);
        CHECK(msg.find("bin_width") != std::string::npos);
        CHECK(msg.find("distance_epsilon") != std::string::npos);
    }

    CHECK_THROWS_AS(EnhashModel(desc2d(), c), std::invalid_argument);
}

TEST_CASE("make_variant is identity for full and zeroes effective lambda for lambda0") {
    EnhashConfig c = small_config();
    const EnhashConfig full = make_variant(c, Variant::full);
    CHECK(full.decay_rate == c.decay_rate);
    CHECK(full.variant == Variant::full);
    CHECK(full.effective_decay_rate() == c.decay_rate);

    const EnhashConfig lz = make_variant(c, Variant::lambda0);
    CHECK(lz.effective_decay_rate() == 0.0);
    CHECK(lz.decay_rate == c.decay_rate);  // configured rate is kept, only the effect is off

    CHECK(variant_name(Variant::no_weights) == "no_weights");
    CHECK(parse_variant("lambda0") == Variant::lambda0);
    CHECK_THROWS_AS(parse_variant("bogus"), std::invalid_argument);
}

TEST_CASE("init draws deterministic per-estimator projections") {
    EnhashConfig c;
    c.num_estimators = 10;
    c.bin_width = 0.1;
    c.seed = 42;

    const EnhashModel a(desc2d(), c);
    const EnhashModel b(desc2d(), c);
    REQUIRE(a.estimators().size() == 10);
    std::set<double> first_weights;
    for (std::size_t l = 0; l < 10; ++l) {
        REQUIRE(a.estimators()[l].weights.size() == 2);
        CHECK(a.estimators()[l].weights == b.estimators()[l].weights);
        CHECK(a.estimators()[l].bias == b.estimators()[l].bias);
        CHECK(a.estimators()[l].bias >= -0.1);
        CHECK(a.estimators()[l].bias <= 0.1);
        first_weights.insert(a.estimators()[l].weights[0]);
    }
    CHECK(first_weights.size() == 10);  // substreams differ

    c.seed = 43;
    const EnhashModel other(desc2d(), c);
    CHECK(other.estimators()[0].weights != a.estimators()[0].weights);
}

TEST_CASE("hash_code matches direct evaluation") {
    ProjectionEstimator est;
    est.weights = {1.0, 0.0};
    est.bias = 0.0;
    est.bin_width = 0.1;

    CHECK(est.hash_code(FeatureVec{0.25, 7.0}) == 2);
    CHECK(est.hash_code(FeatureVec{0.0, 0.0}) == 0);
    CHECK(est.hash_code(FeatureVec{-0.05, 3.0}) == -1);

    CHECK_THROWS_AS(est.hash_code(FeatureVec{1.0}), std::invalid_argument);

    est.bin_width = 1e-300;
    CHECK_THROWS_AS(est.hash_code(FeatureVec{1e300, 0.0}), std::runtime_error);
}

TEST_CASE("decay_factor") {
    CHECK(decay_factor(0.7, 0.0) == 1.0);
    CHECK(decay_factor(0.0, 12345.0) == 1.0);
    CHECK(decay_factor(0.015, 200.0) == 0.125);  // exponent is exactly -3
}

TEST_CASE("class_mean equals batch mean") {
    BucketState bucket;
    bucket_apply_update(bucket, 0, 1, FeatureVec{1.0, 2.0}, 0.0);
    CHECK(class_mean(bucket, 0) == FeatureVec{1.0, 2.0});

    bucket_apply_update(bucket, 0, 2, FeatureVec{-1.0, 0.0}, 0.0);
    CHECK(class_mean(bucket, 0) == FeatureVec{0.0, 1.0});

    CHECK_THROWS_AS(class_mean(bucket, 9), std::out_of_range);

    BucketState big;
    Rng rng(5);
    FeatureVec sum(3, 0.0);
    for (std::uint64_t t = 1; t <= 100; ++t) {
        FeatureVec x(3);
        for (std::size_t j = 0; j < 3; ++j) x[j] = rng.next_uniform(-10.0, 10.0);
        for (std::size_t j = 0; j < 3; ++j) sum[j] += x[j];
        bucket_apply_update(big, 1, t, x, 0.02);
    }
    const FeatureVec mean = class_mean(big, 1);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(mean[j] == doctest::Approx(sum[j] / 100.0).epsilon(1e-12));
    }
}

TEST_CASE("bucket update follows the decayed normalized recurrence") {
    BucketState bucket;
    bucket_apply_update(bucket, 7, 1, FeatureVec{0.5}, 0.0);
    REQUIRE(bucket.classes.count(7) == 1);
    CHECK(bucket.classes.at(7).count == 1.0);
    CHECK(bucket.classes.at(7).tstamp == 1);
    CHECK(bucket.classes.at(7).samples == 1);
    CHECK(bucket.classes.at(7).feature_sum == FeatureVec{0.5});

    bucket_apply_update(bucket, 3, 2, FeatureVec{1.5}, 0.0);
    CHECK(bucket.classes.at(7).count == 0.5);
    CHECK(bucket.classes.at(3).count == 0.5);
    CHECK(bucket.classes.at(3).tstamp == 2);

    BucketState twice;
    bucket_apply_update(twice, 0, 1, FeatureVec{0.0}, 0.0);
    bucket_apply_update(twice, 0, 2, FeatureVec{0.0}, 0.0);
    CHECK(twice.classes.at(0).count == 1.0);
    CHECK(twice.classes.at(0).samples == 2);

    // decayed prior: class 0 updated at t=1 then t=201 with lambda=0.015
    BucketState decayed;
    bucket_apply_update(decayed, 0, 1, FeatureVec{0.0}, 0.015);
    bucket_apply_update(decayed, 0, 201, FeatureVec{0.0}, 0.015);
    // 1 + 2^(-0.015*200) * 1 = 1.125, then normalized back to 1
    CHECK(decayed.classes.at(0).count == 1.0);
    bucket_apply_update(decayed, 1, 202, FeatureVec{0.0}, 0.015);
    // class 1 enters with weight 1 against class 0's normalized 1; an update
    // never rescales the other classes, so both land on exactly 1/2
    CHECK(decayed.classes.at(0).count == 0.5);
    CHECK(decayed.classes.at(1).count == 0.5);
}

TEST_CASE("lambda=0 recurrence equals the closed form") {
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        BucketState bucket;
        std::map<ClassId, double> closed;  // p' = (p + e_y) / (1 + sum p)
        const std::size_t classes = 1 + rng.next_index(5);
        const std::uint64_t len = 1 + rng.next_index(40);
        for (std::uint64_t t = 1; t <= len; ++t) {
            const auto y = static_cast<ClassId>(rng.next_index(classes));
            bucket_apply_update(bucket, y, t, FeatureVec{0.0}, 0.0);
            double total = 0.0;
            for (const auto& [cls, p] : closed) total += p;
            closed[y] += 1.0;
            for (auto& [cls, p] : closed) p /= 1.0 + total;
        }
        REQUIRE(closed.size() == bucket.classes.size());
        for (const auto& [cls, p] : closed) {
            CHECK(std::abs(bucket.classes.at(cls).count - p) < 1e-12);
        }
    }
}

TEST_CASE("fresh model predicts the fallback with empty weights") {
    const EnhashModel model(desc2d(), small_config());
    const Prediction pred = model.predict(FeatureVec{0.0, 0.0});
    CHECK(pred.label == 0);
    CHECK(pred.class_weights.empty());
    CHECK(model.fallback_class() == 0);
}

TEST_CASE("single-class bucket predicts that class") {
    EnhashConfig c = small_config();
    c.num_estimators = 1;
    EnhashModel model(desc2d(), c);
    model.advance_step();
    model.update(FeatureVec{0.3, -0.2}, 4);
    const Prediction pred = model.predict(FeatureVec{0.3, -0.2});
    CHECK(pred.label == 4);
    REQUIRE(pred.class_weights.count(4) == 1);
    CHECK(pred.class_weights.at(4) > 0.0);
}

TEST_CASE("closer class mean wins at equal counts") {
    EnhashConfig c = small_config();
    c.num_estimators = 1;
    c.bin_width = 100.0;  // both points land in one bucket (checked below)
    c.decay_rate = 0.0;
    c.seed = 3;
    EnhashModel model(desc2d(), c);

    const FeatureVec a{0.5, 0.5};
    const FeatureVec b{1.5, 0.5};  // exactly 1.0 away from a
    REQUIRE(model.estimators()[0].hash_code(a) == model.estimators()[0].hash_code(b));

    model.advance_step();
    model.update(a, 0);
    model.advance_step();
    model.update(b, 1);

    const auto& bucket = model.buckets(0).at(model.estimators()[0].hash_code(a));
    CHECK(bucket.classes.at(0).count == bucket.classes.at(1).count);

    const Prediction at_a = model.predict(a);
    CHECK(at_a.label == 0);
    const Prediction at_b = model.predict(b);
    CHECK(at_b.label == 1);
}

TEST_CASE("unpopulated buckets fall back to the running majority class") {
    EnhashConfig c = small_config();
    c.bin_width = 0.001;  // far-apart points never share buckets
    EnhashModel model(desc2d(), c);
    const std::vector<std::pair<FeatureVec, ClassId>> history = {
        {{10.0, 10.0}, 2}, {{20.0, 20.0}, 5}, {{30.0, 30.0}, 5}};
    for (const auto& [x, y] : history) {
        model.advance_step();
        model.update(x, y);
    }
    CHECK(model.fallback_class() == 5);
    const Prediction pred = model.predict(FeatureVec{-500.0, -500.0});
    CHECK(pred.label == 5);
    CHECK(pred.class_weights.empty());
}

TEST_CASE("fallback ties break to the smallest class id") {
    EnhashModel model(desc2d(), small_config());
    model.advance_step();
    model.update(FeatureVec{1.0, 1.0}, 6);
    model.advance_step();
    model.update(FeatureVec{2.0, 2.0}, 1);
    CHECK(model.fallback_class() == 1);
}

TEST_CASE("argmax is invariant to positive scaling of the weights") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        std::map<ClassId, double> weights;
        const std::size_t classes = 1 + rng.next_index(6);
        for (std::size_t c = 0; c < classes; ++c) {
            weights[static_cast<ClassId>(c)] = rng.next_double();
        }
        const double scale = 0.001 + 1000.0 * rng.next_double();
        std::map<ClassId, double> scaled = weights;
        for (auto& [cls, w] : scaled) w *= scale;
        CHECK(argmax_label(weights, 0) == argmax_label(scaled, 0));
    }
    CHECK(argmax_label({}, 3) == 3);
    CHECK(argmax_label({{2, 0.0}, {4, 0.0}}, 3) == 3);     // all-zero weights
    CHECK(argmax_label({{2, 0.7}, {4, 0.7}}, 3) == 2);     // tie -> smallest id
}

TEST_CASE("process validates step order and is one predict plus one update") {
    EnhashModel model(desc2d(), small_config());
    LabeledInstance inst;
    inst.features = {0.1, 0.2};
    inst.label = 1;
    inst.step = 2;  // expected 1
    CHECK_THROWS_WITH_AS(model.process(inst), doctest::Contains("out-of-order"),
                         std::runtime_error);

    inst.step = 1;
    const Prediction pred = model.process(inst);
    CHECK(pred.label == 0);  // cold start: fallback
    CHECK(pred.class_weights.empty());
    CHECK(model.step() == 1);
    CHECK(model.classes_seen().at(1) == 1);
    CHECK(model.footprint().total_buckets == model.config().num_estimators);
}

TEST_CASE("process names the offending step when hashing overflows") {
    EnhashConfig c = small_config();
    c.bin_width = 1e-300;
    EnhashModel model(desc2d(), c);
    LabeledInstance inst;
    inst.features = {1e300, 1e300};
    inst.label = 0;
    inst.step = 1;
    CHECK_THROWS_WITH_AS(model.process(inst), doctest::Contains("instance at step 1"),
                         std::runtime_error);
}

TEST_CASE("predict does not mutate the model") {
    EnhashModel model(desc2d(), small_config());
    const Stream stream = random_stream(21, 50, 2, 4, true);
    for (const auto& inst : stream.instances) model.process(inst);

    const std::string before = model.snapshot();
    (void)model.predict(FeatureVec{0.123, -4.56});
    (void)model.predict(stream.instances[7].features);
    CHECK(model.snapshot() == before);
}

TEST_CASE("identical seed and stream give identical predictions and state") {
    const Stream stream = random_stream(33, 300, 3, 5, true);
    EnhashConfig c;
    c.num_estimators = 5;
    c.seed = 8;

    EnhashModel a(stream.descriptor, c);
    EnhashModel b(stream.descriptor, c);
    for (const auto& inst : stream.instances) {
        CHECK(a.process(inst).label == b.process(inst).label);
    }
    CHECK(a.snapshot() == b.snapshot());
}

TEST_CASE("hash shift property: adding bin_width/(w.w) * w bumps the code by one") {
    EnhashConfig c;
    c.num_estimators = 4;
    c.bin_width = 0.25;
    c.seed = 91;
    StreamDescriptor desc;
    desc.dimension = 3;
    const EnhashModel model(desc, c);

    Rng rng(123);
    int tested = 0;
    while (tested < 200) {
        FeatureVec x(3);
        for (auto& v : x) v = rng.next_uniform(-5.0, 5.0);
        for (const auto& est : model.estimators()) {
            double dot = 0.0;
            double ww = 0.0;
            for (std::size_t j = 0; j < 3; ++j) {
                dot += est.weights[j] * x[j];
                ww += est.weights[j] * est.weights[j];
            }
            const double pos = (dot + est.bias) / est.bin_width;
            const double frac = pos - std::floor(pos);
            if (frac < 0.05 || frac > 0.95) continue;  // exclude FP boundary cases

            FeatureVec shifted = x;
            for (std::size_t j = 0; j < 3; ++j) {
                shifted[j] += est.weights[j] * (est.bin_width / ww);
            }
            CHECK(est.hash_code(shifted) == est.hash_code(x) + 1);
            ++tested;
        }
    }
}

TEST_CASE("every touched bucket stays normalized") {
    const Stream stream = random_stream(55, 400, 2, 6, false);
    EnhashConfig c;
    c.num_estimators = 4;
    c.bin_width = 0.5;
    EnhashModel model(stream.descriptor, c);
    for (const auto& inst : stream.instances) {
        model.process(inst);
        for (std::size_t l = 0; l < c.num_estimators; ++l) {
            const auto code = model.estimators()[l].hash_code(inst.features);
            const BucketState& bucket = model.buckets(l).at(code);
            double sum = 0.0;
            for (const auto& [cls, stats] : bucket.classes) sum += stats.count;
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("streaming predictions and bucket state match the replay oracle") {
    const Variant variants[] = {Variant::full, Variant::lambda0, Variant::no_weights};
    const double lambdas[] = {0.0, 0.015, 0.1};
    int combo = 0;
    for (Variant variant : variants) {
        for (double lambda : lambdas) {
            ++combo;
            EnhashConfig c;
            c.num_estimators = 3;
            c.bin_width = combo % 2 == 0 ? 0.5 : 1.0;
            c.decay_rate = lambda;
            c.variant = variant;
            c.seed = 100 + combo;

            const Stream stream = random_stream(200 + combo, 250, 1 + combo % 3, 4,
                                                combo % 2 == 0);
            EnhashModel model(stream.descriptor, c);
            ReplayOracle oracle(model.estimators(), c, stream.descriptor.dimension);

            for (const auto& inst : stream.instances) {
                const ClassId expected = oracle.process(inst);
                const ClassId got = model.process(inst).label;
                REQUIRE(got == expected);
            }
            for (std::size_t l = 0; l < c.num_estimators; ++l) {
                for (const auto code : oracle.known_codes(l)) {
                    const auto replayed = oracle.replay_bucket(l, code);
                    const BucketState& bucket = model.buckets(l).at(code);
                    REQUIRE(replayed.size() == bucket.classes.size());
                    for (const auto& [cls, s] : replayed) {
                        const ClassStats& stats = bucket.classes.at(cls);
                        CHECK(std::abs(stats.count - s.count) < 1e-12);
                        CHECK(stats.tstamp == s.tstamp);
                        CHECK(stats.samples == s.samples);
                        CHECK(stats.feature_sum == s.feature_sum);
                    }
                }
            }
        }
    }
}

TEST_CASE("footprint counts populated buckets and grows with finer bins") {
    EnhashConfig c;
    c.num_estimators = 10;
    const Stream stream = random_stream(77, 1000, 2, 4, false, 0.0);

    EnhashModel fresh(stream.descriptor, c);
    CHECK(fresh.footprint().total_buckets == 0);
    CHECK(model_footprint(fresh).total_buckets == 0);

    EnhashModel coarse(stream.descriptor, c);
    EnhashConfig fine_config = c;
    fine_config.bin_width = 0.0001;
    EnhashModel fine(stream.descriptor, fine_config);
    for (const auto& inst : stream.instances) {
        coarse.process(inst);
        fine.process(inst);
    }
    const ModelFootprint coarse_fp = coarse.footprint();
    const ModelFootprint fine_fp = fine.footprint();
    CHECK(coarse_fp.buckets_per_estimator.size() == 10);
    CHECK(fine_fp.total_buckets > coarse_fp.total_buckets);
    CHECK(fine_fp.approx_bytes > coarse_fp.approx_bytes);
}

TEST_CASE("snapshot round-trips bit-exactly and restored models keep predicting the same") {
    const Stream stream = random_stream(88, 200, 3, 5, true);
    EnhashConfig c;
    c.num_estimators = 4;
    c.seed = 7;
    EnhashModel model(stream.descriptor, c);
    for (const auto& inst : stream.instances) model.process(inst);

    const std::string snap = model.snapshot();
    EnhashModel restored = EnhashModel::restore(snap);
    CHECK(restored.snapshot() == snap);

    const Stream more = random_stream(89, 50, 3, 5, true);
    for (auto inst : more.instances) {
        inst.step += stream.instances.size();
        CHECK(model.process(inst).label == restored.process(inst).label);
    }
    CHECK(model.snapshot() == restored.snapshot());

    CHECK_THROWS_AS(EnhashModel::restore("{}"), std::runtime_error);
}

TEST_CASE("snapshot spells out the four per-class arrays") {
    EnhashModel model(desc2d(), small_config());
    model.advance_step();
    model.update(FeatureVec{0.25, 0.75}, 2);
    const auto j = nlohmann::json::parse(model.snapshot());
    const auto& cls = j.at("estimators").at(0).at("buckets").at(0).at("classes").at(0);
    CHECK(cls.contains("counts"));
    CHECK(cls.contains("tstamp"));
    CHECK(cls.contains("sample_counts"));
    CHECK(cls.contains("sample_sums"));
    CHECK(cls.at("sample_sums").size() == 2);
}
