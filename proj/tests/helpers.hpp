#pragma once

#include <memory>
#include <vector>

#include "diffid/image.hpp"
#include "diffid/synthetic.hpp"

namespace testing {

inline diffid::Image gray(int h, int w, std::vector<double> px) {
    return diffid::Image::from_pixels(h, w, 1, std::move(px));
}

inline diffid::Image uniform(int h, int w, double v) { return diffid::Image(h, w, 3, v); }

/// Bundles a world with the backend and preprocessor built on it.
struct World {
    std::shared_ptr<const diffid::SyntheticWorld> world;
    diffid::SyntheticBackend backend;
    diffid::SyntheticPreprocessor prep;

    explicit World(const diffid::SyntheticWorldConfig& cfg)
        : world(std::make_shared<const diffid::SyntheticWorld>(cfg)), backend(world), prep(world) {}
};

inline diffid::SyntheticWorldConfig perfect_world() {
    diffid::SyntheticWorldConfig cfg;
    cfg.encoder_noise = 0.0;
    cfg.generator_leakage = 0.0;
    cfg.generator_blur = 0.0;
    return cfg;
}

}  // namespace testing
