#pragma once

#include <Eigen/Core>
#include <vector>

#include "bcr/errors.hpp"

namespace bcr {

// Feature vector usable in either dense or sparse-binary (index list) form.
// Sparse form: every listed index has value 1, everything else 0.
class FeatureVec {
public:
    FeatureVec() = default;
    explicit FeatureVec(Eigen::VectorXd dense) : dense_(std::move(dense)), dim_(static_cast<int>(dense_.size())) {}
    FeatureVec(std::vector<int> active_indices, int dim)
        : indices_(std::move(active_indices)), dim_(dim), sparse_(true) {}

    int dim() const { return dim_; }
    bool sparse() const { return sparse_; }
    const std::vector<int>& indices() const { return indices_; }
    const Eigen::VectorXd& dense() const { return dense_; }

    double dot(const Eigen::VectorXd& w) const;
    // out += weight * this
    void add_scaled_to(Eigen::Ref<Eigen::VectorXd> out, double weight) const;
    double squared_norm() const;
    double dot(const FeatureVec& other) const;

private:
    Eigen::VectorXd dense_;
    std::vector<int> indices_;  // sorted
    int dim_ = 0;
    bool sparse_ = false;
};

struct PcaModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd basis;        // D x m, column-orthonormal
    Eigen::VectorXd eigenvalues;  // m, non-increasing, >= 0

    int dim() const { return static_cast<int>(mean.size()); }
    int components() const { return static_cast<int>(basis.cols()); }
};

// PCA retaining the top components covering >= energy_fraction of variance.
// Gram-matrix route when n < D, covariance route otherwise.
PcaModel pca_fit(const std::vector<Eigen::VectorXd>& data, double energy_fraction);
// Exact component count (capped at min(n-1, D) and at the numerical rank).
PcaModel pca_fit_components(const std::vector<Eigen::VectorXd>& data, int components);

Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd pca_reconstruct(const PcaModel& model, const Eigen::VectorXd& p);

struct RidgeRegressor {
    Eigen::MatrixXd weights;  // targets x features
    double lambda = 0.0;

    Eigen::VectorXd predict(const FeatureVec& d) const;
};

// Minimizes sum_i ||y_i - W d_i||^2 + lambda ||W||_F^2. Solved in the dual
// (Gram) form when the feature dimension exceeds the sample count.
RidgeRegressor ridge_fit(const std::vector<FeatureVec>& features,
                         const std::vector<Eigen::VectorXd>& targets, double lambda);

double ridge_objective(const RidgeRegressor& model, const std::vector<FeatureVec>& features,
                       const std::vector<Eigen::VectorXd>& targets);

struct LinearSvm {
    Eigen::VectorXd weights;
    double bias = 0.0;
    double cost = 1.0;
    // Achieved primal objective after each accepted solver iteration.
    std::vector<double> iteration_log;

    double decision(const FeatureVec& x) const;
};

// L2-regularized, L2-loss linear SVM:
//   min_w,b  0.5 ||w||^2 + cost * sum_i max(0, 1 - y_i (w'x_i + b))^2
// Gradient descent with Armijo backtracking; the objective is non-increasing
// across the iteration log.
LinearSvm svm_fit(const std::vector<FeatureVec>& features, const std::vector<int>& labels,
                  double cost, int max_iters = 10000, double tol = 1e-6);

}  // namespace bcr
