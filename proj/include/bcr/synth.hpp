#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcr/bcr.hpp"
#include "bcr/image.hpp"
#include "bcr/shape.hpp"

namespace bcr {

// Deterministic 12-landmark face generator. Yaw couples shape and
// visibility: rotating the head hides up to 4 landmarks on the far side at
// fixed yaw thresholds, while the projected x-coordinates compress.
struct SyntheticWorldConfig {
    int landmarks = 12;          // the generator is defined for 12
    double yaw_max_deg = 60.0;
    double blob_sigma = 2.0;     // px
    double noise_sigma = 0.02;
    int image_size = 128;
    std::uint64_t seed = 0;
};

struct SyntheticSample {
    ImageSample image;
    Shape gt_shape;
    Visibility gt_visibility;
    Box box;
    double yaw_deg = 0.0;
};

class SyntheticWorld {
public:
    explicit SyntheticWorld(const SyntheticWorldConfig& config);

    // Draws yaw uniformly and minor shape modes from Gaussians.
    SyntheticSample generate(Rng& rng) const;
    // Fixed yaw (degrees), remaining randomness from rng; used for
    // mirror-pair experiments.
    SyntheticSample generate_at(double yaw_deg, const Eigen::Vector2d& minor_modes,
                                Rng& rng) const;

    std::vector<SyntheticSample> generate_batch(int count) const;

    // Ground-truth visibility as a function of yaw only.
    Visibility visibility_for_yaw(double yaw_deg) const;
    Shape shape_for(double yaw_deg, const Eigen::Vector2d& minor_modes) const;

    const SyntheticWorldConfig& config() const { return config_; }
    // Role map usable with normalized_error on generated data; points at
    // always-visible landmarks so the normalizer exists at every yaw.
    RoleMap roles() const;

private:
    SyntheticWorldConfig config_;
};

// Renders `count` samples to out_dir (face_NNNN.pgm/.pts/.vis) plus a
// manifest.txt with detector boxes. Returns the written manifest path.
std::string synth_generate(const SyntheticWorld& world, int count, const std::string& out_dir);

}  // namespace bcr
