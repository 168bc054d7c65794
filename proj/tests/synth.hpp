#pragma once

// Small random-stream builders for property tests.

#include <cstdint>

#include "driftstream/rng.hpp"
#include "driftstream/stream.hpp"

namespace driftstream::testing {

// Random labeled stream; clustered mode places class centers so distances are
// informative, and repeat_prob occasionally reuses an earlier feature vector
// verbatim to exercise the exact-mean / epsilon-clamp path.
inline Stream random_stream(std::uint64_t seed, std::uint64_t n, std::size_t d,
                            std::size_t num_classes, bool clustered, double repeat_prob = 0.15) {
    Rng rng(seed);
    Stream stream;
    stream.descriptor.dimension = d;
    for (std::size_t c = 0; c < num_classes; ++c) {
        stream.descriptor.known_classes.push_back(static_cast<ClassId>(c));
    }
    stream.descriptor.length_hint = n;

    std::vector<FeatureVec> centers;
    if (clustered) {
        for (std::size_t c = 0; c < num_classes; ++c) {
            FeatureVec center(d);
            for (auto& v : center) v = rng.next_uniform(-2.0, 2.0);
            centers.push_back(std::move(center));
        }
    }

    for (std::uint64_t t = 1; t <= n; ++t) {
        LabeledInstance inst;
        inst.step = t;
        inst.label = static_cast<ClassId>(rng.next_index(num_classes));
        if (!stream.instances.empty() && rng.next_double() < repeat_prob) {
            inst.features = stream.instances[rng.next_index(stream.instances.size())].features;
        } else if (clustered) {
            inst.features.resize(d);
            for (std::size_t j = 0; j < d; ++j) {
                inst.features[j] = centers[inst.label][j] + 0.3 * rng.next_normal();
            }
        } else {
            inst.features.resize(d);
            for (auto& v : inst.features) v = rng.next_uniform(-3.0, 3.0);
        }
        stream.instances.push_back(std::move(inst));
    }
    return stream;
}

}  // namespace driftstream::testing
