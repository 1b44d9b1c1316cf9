#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bcr/bcr.hpp"
#include "bcr/shape.hpp"

namespace bcr {

// Standard points format:
//   version: 1
//   n_points: N
//   {
//   x y     (N lines)
//   }
// Coordinates are 1-origin on disk, 0-origin in memory.
Shape load_pts(const std::string& path);
void save_pts(const Shape& shape, const std::string& path);

// One 0/1 token per line. A missing companion file means all-visible, which
// callers handle by checking existence before calling.
Visibility load_visibility(const std::string& path);
void save_visibility(const Visibility& vis, const std::string& path);

struct ManifestEntry {
    std::string image_path;
    std::string pts_path;
    std::string vis_path;  // empty or nonexistent -> all visible
    std::optional<Box> box;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
};

// Tab-separated: image, pts, vis, optional "x,y,w,h" box. Relative paths are
// resolved against the manifest's directory.
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& manifest, const std::string& path);

struct LoadedSample {
    std::string image_path;
    Shape gt_shape;
    Visibility gt_visibility;
    std::optional<Box> box;
};

struct LoadReport {
    std::vector<LoadedSample> samples;
    std::vector<std::string> skipped;  // one reason per skipped entry
};

// Loads every manifest entry; malformed entries are skipped with a logged
// reason, never silently.
LoadReport load_dataset(const Manifest& manifest);

// Self-describing binary container, magic "BCR1", little-endian.
void save_model(const BcrModel& model, const std::string& path);
BcrModel load_model(const std::string& path);

RoleMap load_roles(const std::string& path);

void write_ced_csv(const std::vector<std::pair<double, double>>& curve, const std::string& path);
void write_ced_svg(const std::vector<std::pair<double, double>>& curve, const std::string& path);

}  // namespace bcr
