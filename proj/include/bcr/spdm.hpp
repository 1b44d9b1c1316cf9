#pragma once

#include <Eigen/Core>
#include <vector>

#include "bcr/linear_models.hpp"
#include "bcr/shape.hpp"

namespace bcr {

// Combined linear model of shape and landmark visibility. One parameter
// vector q encodes both, via a second PCA over the stacked per-sample
// (scaled shape params; visibility params).
struct SpdmModel {
    Shape mean_shape;              // 2L
    Eigen::MatrixXd shape_basis;   // 2L x (m + similarity columns), orthonormal
    Visibility mean_visibility;    // L
    Eigen::MatrixXd vis_basis;     // L x mv, orthonormal (empty when no variance)
    Eigen::MatrixXd combined;      // (m_s + mv) x q_dim, orthonormal
    Eigen::VectorXd param_shift;   // per shape-param dim, applied before combined PCA
    Eigen::VectorXd param_scale;   // per shape-param dim, positive
    int similarity_columns = 0;    // trailing columns of shape_basis

    int landmarks() const { return static_cast<int>(mean_visibility.size()); }
    int shape_params() const { return static_cast<int>(shape_basis.cols()); }
    int vis_params() const { return static_cast<int>(vis_basis.cols()); }
    int q_dim() const { return static_cast<int>(combined.cols()); }
};

struct ImputeOptions {
    double inner_tol = 1e-9;       // missing-entry movement threshold
    int inner_max_iters = 200;
    double growth_tol = 0.01;      // relative observed-residual improvement to keep growing m
    // Per-alternation observed-entry residuals, one inner trace per m (for
    // monotonicity checks).
    std::vector<std::vector<double>>* residual_trace = nullptr;
};

// Iterated-PCA imputation of occluded landmark coordinates on aligned shapes.
// Missing entries start at the per-landmark visible mean; PCA rank grows from
// 1 while the observed-entry residual keeps improving.
std::vector<Shape> impute_missing(const std::vector<Shape>& shapes,
                                  const std::vector<Visibility>& masks,
                                  const ImputeOptions& options = {});

// Full SPDM construction from Procrustes-aligned shapes. energy_fraction
// governs the shape, visibility, and combined PCA retention.
SpdmModel build_spdm(const std::vector<Shape>& shapes, const std::vector<Visibility>& masks,
                     double energy_fraction = 0.98);

Eigen::VectorXd params_from_shape(const SpdmModel& model, const Shape& s, const Visibility& v);

struct ShapeAndVisibility {
    Shape shape;
    Visibility visibility;  // continuous, unclamped
};

ShapeAndVisibility shape_from_params(const SpdmModel& model, const Eigen::VectorXd& q);

Visibility binarize_visibility(const Visibility& v_continuous, double threshold = 0.5);

}  // namespace bcr
