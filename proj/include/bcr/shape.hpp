#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bcr/errors.hpp"

namespace bcr {

// 2D landmark set stored as (x1..xL, y1..yL).
using Shape = Eigen::VectorXd;

// Per-landmark visibility. Binary {0,1} at I/O boundaries, continuous inside
// model space.
using Visibility = Eigen::VectorXd;

inline int landmark_count(const Shape& s) { return static_cast<int>(s.size()) / 2; }
inline double shape_x(const Shape& s, int i) { return s[i]; }
inline double shape_y(const Shape& s, int i) { return s[landmark_count(s) + i]; }

Visibility all_visible(int nlandmarks);

// p' = scale * R(rotation) * p + translation
struct SimilarityTransform {
    double scale = 1.0;
    double rotation = 0.0;  // radians, in (-pi, pi]
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();

    Eigen::Vector2d apply(const Eigen::Vector2d& p) const;
    Shape apply(const Shape& s) const;
    // Linear part only (no translation), for mapping offsets between frames.
    Eigen::Vector2d apply_vector(const Eigen::Vector2d& v) const;
    Eigen::Vector2d apply_vector_inverse(const Eigen::Vector2d& v) const;

    SimilarityTransform inverse() const;
    static SimilarityTransform identity() { return {}; }
};

// Closed-form similarity alignment of `shape` onto `reference`, using only
// landmarks with mask >= 0.5. Returns the transformed shape and the transform.
std::pair<Shape, SimilarityTransform> procrustes_align(const Shape& shape,
                                                       const Shape& reference,
                                                       const Visibility& mask);

struct GpaResult {
    std::vector<Shape> aligned;
    Shape mean;
    int iterations = 0;
};

// Iterative alignment of all shapes to their running mean. The mean is
// re-normalized each round to centroid at origin and unit RMS size.
GpaResult generalized_procrustes(const std::vector<Shape>& shapes,
                                 const std::vector<Visibility>& masks,
                                 int max_iters = 100, double tol = 1e-8);

Eigen::Vector2d shape_centroid(const Shape& s, const Visibility& mask);
// Root-mean-square distance of visible landmarks from their centroid.
double shape_rms_size(const Shape& s, const Visibility& mask);

enum class ErrorNormalization { kInterocular, kEyeMouth };

// Landmark semantic role -> landmark index. Roles used by the metrics:
//   interocular: "left_eye_outer", "right_eye_outer"
//   eye_mouth:   "eye_corner", "mouth_corner" (normalizer is half the distance)
using RoleMap = std::map<std::string, int>;

double normalized_error(const Shape& pred, const Shape& gt, const Visibility& gt_vis,
                        ErrorNormalization normalization, const RoleMap& roles);

// For each threshold, fraction of errors <= threshold.
std::vector<std::pair<double, double>> ced_curve(const std::vector<double>& errors,
                                                 const std::vector<double>& thresholds);

}  // namespace bcr
