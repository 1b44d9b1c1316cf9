#include "bcr/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "bcr/io.hpp"

namespace bcr {

namespace {

constexpr int kLandmarks = 12;

// (x, y, z) in a unit face frame, y down. z > 0 is toward the camera.
// A pronounced depth profile makes the yaw-induced projection asymmetric,
// which keeps left and right rotations distinguishable after alignment.
constexpr double kFacePoints[kLandmarks][3] = {
    {-0.60, -0.35, 0.15},  // 0 left outer eye
    {-0.25, -0.30, 0.50},  // 1 left inner eye
    {0.25, -0.30, 0.50},   // 2 right inner eye
    {0.60, -0.35, 0.15},   // 3 right outer eye
    {0.00, -0.25, 0.60},   // 4 nose bridge
    {0.00, 0.05, 0.80},    // 5 nose tip
    {-0.35, 0.45, 0.30},   // 6 left mouth corner
    {0.35, 0.45, 0.30},    // 7 right mouth corner
    {0.00, 0.85, 0.45},    // 8 chin
    {0.00, -0.80, 0.45},   // 9 forehead
    {-0.85, 0.05, -0.35},  // 10 left ear
    {0.85, 0.05, -0.35},   // 11 right ear
};

// Far-side landmarks drop out in this order as |yaw| crosses each fraction of
// yaw_max. Positive yaw hides the left side.
constexpr int kLeftOcclusionOrder[4] = {10, 0, 6, 1};
constexpr int kRightOcclusionOrder[4] = {11, 3, 7, 2};
constexpr double kOcclusionFractions[4] = {0.25, 0.50, 0.70, 0.90};

// Per-landmark blob amplitude; distinct intensities give the pixel-difference
// features something to latch onto.
double blob_amplitude(int landmark) { return 0.45 + 0.5 * (landmark + 1) / kLandmarks; }

}  // namespace

SyntheticWorld::SyntheticWorld(const SyntheticWorldConfig& config) : config_(config) {
    if (config.landmarks != kLandmarks)
        throw Error("SyntheticWorld: generator is defined for 12 landmarks, got " +
                    std::to_string(config.landmarks));
    if (config.yaw_max_deg <= 0 || config.image_size < 32)
        throw Error("SyntheticWorld: invalid configuration");
}

Shape SyntheticWorld::shape_for(double yaw_deg, const Eigen::Vector2d& minor_modes) const {
    const double yaw = yaw_deg * std::numbers::pi / 180.0;
    Shape s(2 * kLandmarks);
    for (int i = 0; i < kLandmarks; ++i) {
        const double x = kFacePoints[i][0], y = kFacePoints[i][1], z = kFacePoints[i][2];
        s[i] = x * std::cos(yaw) + z * std::sin(yaw);
        s[kLandmarks + i] = y;
    }
    // Minor mode 0: mouth/chin vertical stretch. Minor mode 1: eye-row height.
    s[kLandmarks + 6] += 0.16 * minor_modes[0];
    s[kLandmarks + 7] += 0.16 * minor_modes[0];
    s[kLandmarks + 8] += 0.26 * minor_modes[0];
    for (int i : {0, 1, 2, 3}) s[kLandmarks + i] += 0.13 * minor_modes[1];
    return s;
}

Visibility SyntheticWorld::visibility_for_yaw(double yaw_deg) const {
    Visibility v = all_visible(kLandmarks);
    const double f = std::abs(yaw_deg) / config_.yaw_max_deg;
    const int* order = yaw_deg > 0 ? kLeftOcclusionOrder : kRightOcclusionOrder;
    for (int k = 0; k < 4; ++k)
        if (f > kOcclusionFractions[k]) v[order[k]] = 0.0;
    return v;
}

SyntheticSample SyntheticWorld::generate_at(double yaw_deg, const Eigen::Vector2d& minor_modes,
                                            Rng& rng) const {
    SyntheticSample sample;
    sample.yaw_deg = yaw_deg;
    const Shape unit = shape_for(yaw_deg, minor_modes);
    sample.gt_visibility = visibility_for_yaw(yaw_deg);

    // Place into the image with mild scale/translation variation.
    const int size = config_.image_size;
    std::uniform_real_distribution<double> scale_jitter(0.95, 1.05);
    std::uniform_real_distribution<double> shift_jitter(-4.0, 4.0);
    const double scale = size * 0.32 * scale_jitter(rng);
    const double cx = size / 2.0 + shift_jitter(rng);
    const double cy = size / 2.0 + shift_jitter(rng);
    sample.gt_shape.resize(2 * kLandmarks);
    for (int i = 0; i < kLandmarks; ++i) {
        sample.gt_shape[i] = cx + scale * unit[i];
        sample.gt_shape[kLandmarks + i] = cy + scale * unit[kLandmarks + i];
    }
    sample.box = shape_bounding_box(sample.gt_shape);

    // Broad head blob anchored to the projected landmark centroid; it gives
    // the image long-range structure so widely spaced pixel comparisons carry
    // pose information, the way real face appearance does.
    ImageSample img(size, size);
    double hx = 0, hy = 0;
    for (int i = 0; i < kLandmarks; ++i) {
        hx += sample.gt_shape[i];
        hy += sample.gt_shape[kLandmarks + i];
    }
    hx /= kLandmarks;
    hy /= kLandmarks;
    const double head_sigma = 0.55 * scale;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double d2 = (x - hx) * (x - hx) + (y - hy) * (y - hy);
            img.pixels()(y, x) += 0.35 * std::exp(-d2 / (2 * head_sigma * head_sigma));
        }

    // Gaussian blob per visible landmark; occluded landmarks leave no trace.
    const double sigma = config_.blob_sigma;
    const int reach = static_cast<int>(std::ceil(4 * sigma));
    const double yaw_rad = yaw_deg * std::numbers::pi / 180.0;
    for (int i = 0; i < kLandmarks; ++i) {
        if (sample.gt_visibility[i] < 0.5) continue;
        const double lx = sample.gt_shape[i], ly = sample.gt_shape[kLandmarks + i];
        // Shading: blobs dim as their side of the face turns away, so left and
        // right profiles look different, not just mirrored occlusion patterns.
        const double facing = yaw_rad - 0.9 * kFacePoints[i][0];
        const double amp = blob_amplitude(i) * (0.45 + 0.55 * std::cos(facing));
        const int x0 = std::max(0, static_cast<int>(lx) - reach);
        const int x1 = std::min(size - 1, static_cast<int>(lx) + reach);
        const int y0 = std::max(0, static_cast<int>(ly) - reach);
        const int y1 = std::min(size - 1, static_cast<int>(ly) + reach);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double d2 = (x - lx) * (x - lx) + (y - ly) * (y - ly);
                img.pixels()(y, x) += amp * std::exp(-d2 / (2 * sigma * sigma));
            }
    }
    if (config_.noise_sigma > 0) {
        std::normal_distribution<double> noise(0.0, config_.noise_sigma);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) img.pixels()(y, x) += noise(rng);
    }
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            img.pixels()(y, x) = std::clamp(img.pixels()(y, x), 0.0, 1.0);
    sample.image = std::move(img);
    return sample;
}

SyntheticSample SyntheticWorld::generate(Rng& rng) const {
    std::uniform_real_distribution<double> yaw_dist(-config_.yaw_max_deg, config_.yaw_max_deg);
    std::normal_distribution<double> mode_dist(0.0, 1.0);
    const double yaw = yaw_dist(rng);
    const Eigen::Vector2d modes(mode_dist(rng), mode_dist(rng));
    return generate_at(yaw, modes, rng);
}

std::vector<SyntheticSample> SyntheticWorld::generate_batch(int count) const {
    if (count < 1) throw Error("SyntheticWorld: count must be >= 1");
    std::seed_seq seq{config_.seed, static_cast<std::uint64_t>(0x5e7b)};
    Rng rng(seq);
    std::vector<SyntheticSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(generate(rng));
    return out;
}

RoleMap SyntheticWorld::roles() const {
    // Forehead and chin never occlude in this generator, so curves stay
    // defined across the full yaw range.
    return {{"left_eye_outer", 9}, {"right_eye_outer", 8},
            {"eye_corner", 9},     {"mouth_corner", 8}};
}

std::string synth_generate(const SyntheticWorld& world, int count, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir))
        throw IoError("synth_generate: cannot create output directory " + out_dir);

    Manifest manifest;
    const auto samples = world.generate_batch(count);
    for (int i = 0; i < count; ++i) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "face_%04d", i);
        const std::string base = (fs::path(out_dir) / stem).string();
        save_pgm(samples[i].image, base + ".pgm");
        save_pts(samples[i].gt_shape, base + ".pts");
        save_visibility(samples[i].gt_visibility, base + ".vis");
        ManifestEntry entry;
        entry.image_path = std::string(stem) + ".pgm";
        entry.pts_path = std::string(stem) + ".pts";
        entry.vis_path = std::string(stem) + ".vis";
        entry.box = samples[i].box;
        manifest.entries.push_back(std::move(entry));
    }
    const std::string manifest_path = (fs::path(out_dir) / "manifest.txt").string();
    save_manifest(manifest, manifest_path);
    return manifest_path;
}

}  // namespace bcr
