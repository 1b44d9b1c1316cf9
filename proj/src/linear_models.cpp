#include "bcr/linear_models.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace bcr {

double FeatureVec::dot(const Eigen::VectorXd& w) const {
    if (!sparse_) return dense_.dot(w);
    double s = 0;
    for (int idx : indices_) s += w[idx];
    return s;
}

void FeatureVec::add_scaled_to(Eigen::Ref<Eigen::VectorXd> out, double weight) const {
    if (!sparse_) {
        out += weight * dense_;
        return;
    }
    for (int idx : indices_) out[idx] += weight;
}

double FeatureVec::squared_norm() const {
    if (!sparse_) return dense_.squaredNorm();
    return static_cast<double>(indices_.size());
}

double FeatureVec::dot(const FeatureVec& other) const {
    if (sparse_ && other.sparse_) {
        double s = 0;
        auto a = indices_.begin();
        auto b = other.indices_.begin();
        while (a != indices_.end() && b != other.indices_.end()) {
            if (*a < *b)
                ++a;
            else if (*b < *a)
                ++b;
            else {
                s += 1.0;
                ++a;
                ++b;
            }
        }
        return s;
    }
    if (!sparse_ && !other.sparse_) return dense_.dot(other.dense_);
    if (sparse_) return other.dot(*this);
    return other.FeatureVec::dot(dense_);
}

namespace {

struct EigenDecomp {
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // columns match values
};

EigenDecomp sorted_eig(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    const int n = static_cast<int>(sym.rows());
    EigenDecomp d;
    d.values.resize(n);
    d.vectors.resize(n, n);
    for (int i = 0; i < n; ++i) {
        d.values[i] = solver.eigenvalues()[n - 1 - i];
        d.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    }
    return d;
}

PcaModel pca_fit_impl(const std::vector<Eigen::VectorXd>& data, double energy_fraction,
                      int fixed_components) {
    if (data.size() < 2) throw EmptyInputError("pca_fit: need at least 2 samples");
    const int dim = static_cast<int>(data[0].size());
    const int n = static_cast<int>(data.size());
    for (const auto& x : data)
        if (static_cast<int>(x.size()) != dim)
            throw DimensionMismatchError("pca_fit: inconsistent sample dimensions");

    PcaModel model;
    model.mean = Eigen::VectorXd::Zero(dim);
    for (const auto& x : data) model.mean += x;
    model.mean /= n;

    Eigen::MatrixXd centered(n, dim);
    for (int i = 0; i < n; ++i) centered.row(i) = (data[i] - model.mean).transpose();

    const int max_comp = std::min(n - 1, dim);
    EigenDecomp eig;
    Eigen::MatrixXd basis_full;
    if (n < dim) {
        // Gram route: X X^T shares nonzero eigenvalues with X^T X.
        eig = sorted_eig(centered * centered.transpose() / (n - 1));
        basis_full.resize(dim, max_comp);
        for (int i = 0; i < max_comp; ++i) {
            const double sigma = std::sqrt(std::max(eig.values[i], 0.0) * (n - 1));
            if (sigma > 1e-12)
                basis_full.col(i) = centered.transpose() * eig.vectors.col(i) / sigma;
            else
                basis_full.col(i).setZero();
        }
    } else {
        eig = sorted_eig(centered.transpose() * centered / (n - 1));
        basis_full = eig.vectors.leftCols(max_comp);
    }

    Eigen::VectorXd values = eig.values.head(max_comp);
    for (int i = 0; i < max_comp; ++i)
        if (values[i] < 0) values[i] = 0;  // clamp numerical noise

    const double total = values.sum();
    const double rank_eps = std::max(total, 1.0) * 1e-12;
    int keep = 0;
    if (fixed_components >= 0) {
        while (keep < max_comp && keep < fixed_components && values[keep] > rank_eps) ++keep;
    } else if (total > 1e-24) {
        double acc = 0;
        while (keep < max_comp && values[keep] > rank_eps &&
               acc < energy_fraction * total - 1e-15) {
            acc += values[keep];
            ++keep;
        }
    }
    model.basis = basis_full.leftCols(keep);
    model.eigenvalues = values.head(keep);
    return model;
}

}  // namespace

PcaModel pca_fit(const std::vector<Eigen::VectorXd>& data, double energy_fraction) {
    return pca_fit_impl(data, energy_fraction, -1);
}

PcaModel pca_fit_components(const std::vector<Eigen::VectorXd>& data, int components) {
    return pca_fit_impl(data, 1.0, components);
}

Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.mean.size())
        throw DimensionMismatchError("pca_project: dimension mismatch");
    return model.basis.transpose() * (x - model.mean);
}

Eigen::VectorXd pca_reconstruct(const PcaModel& model, const Eigen::VectorXd& p) {
    if (p.size() != model.basis.cols())
        throw DimensionMismatchError("pca_reconstruct: dimension mismatch");
    return model.mean + model.basis * p;
}

Eigen::VectorXd RidgeRegressor::predict(const FeatureVec& d) const {
    if (d.dim() != weights.cols())
        throw DimensionMismatchError("RidgeRegressor::predict: feature dimension mismatch");
    if (!d.sparse()) return weights * d.dense();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(weights.rows());
    for (int idx : d.indices()) out += weights.col(idx);
    return out;
}

namespace {

// Gram matrix K(i,j) = <f_i, f_j>. With all-sparse binary features an
// inverted index over active dimensions beats pairwise merges.
Eigen::MatrixXd gram_matrix(const std::vector<FeatureVec>& features) {
    const int n = static_cast<int>(features.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    const bool all_sparse =
        std::all_of(features.begin(), features.end(), [](const FeatureVec& f) { return f.sparse(); });
    if (all_sparse) {
        std::vector<std::vector<int>> holders(features[0].dim());
        for (int i = 0; i < n; ++i)
            for (int idx : features[i].indices()) holders[idx].push_back(i);
        for (const auto& list : holders)
            for (size_t a = 0; a < list.size(); ++a)
                for (size_t b = a; b < list.size(); ++b) {
                    K(list[a], list[b]) += 1.0;
                    if (a != b) K(list[b], list[a]) += 1.0;
                }
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                K(i, j) = features[i].dot(features[j]);
                K(j, i) = K(i, j);
            }
    }
    return K;
}

}  // namespace

RidgeRegressor ridge_fit(const std::vector<FeatureVec>& features,
                         const std::vector<Eigen::VectorXd>& targets, double lambda) {
    if (features.empty() || features.size() != targets.size())
        throw EmptyInputError("ridge_fit: empty or mismatched inputs");
    if (lambda < 0) throw Error("ridge_fit: lambda must be >= 0");
    const int n = static_cast<int>(features.size());
    const int dim = features[0].dim();
    const int tdim = static_cast<int>(targets[0].size());
    for (const auto& f : features)
        if (f.dim() != dim) throw DimensionMismatchError("ridge_fit: feature dims differ");
    for (const auto& y : targets)
        if (static_cast<int>(y.size()) != tdim)
            throw DimensionMismatchError("ridge_fit: target dims differ");

    Eigen::MatrixXd Y(n, tdim);
    for (int i = 0; i < n; ++i) Y.row(i) = targets[i].transpose();

    RidgeRegressor model;
    model.lambda = lambda;

    if (dim > n) {
        if (lambda <= 0)
            throw SingularSystemError("ridge_fit: lambda > 0 required when features >= samples");
        Eigen::MatrixXd K = gram_matrix(features);
        K.diagonal().array() += lambda;
        Eigen::MatrixXd alpha = Eigen::LDLT<Eigen::MatrixXd>(K).solve(Y);  // n x tdim
        model.weights = Eigen::MatrixXd::Zero(tdim, dim);
        for (int i = 0; i < n; ++i) {
            if (features[i].sparse()) {
                for (int idx : features[i].indices()) model.weights.col(idx) += alpha.row(i).transpose();
            } else {
                model.weights += alpha.row(i).transpose() * features[i].dense().transpose();
            }
        }
    } else {
        Eigen::MatrixXd XtX = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::MatrixXd XtY = Eigen::MatrixXd::Zero(dim, tdim);
        for (int i = 0; i < n; ++i) {
            if (features[i].sparse()) {
                for (int a : features[i].indices()) {
                    for (int b : features[i].indices()) XtX(a, b) += 1.0;
                    XtY.row(a) += Y.row(i);
                }
            } else {
                XtX.noalias() += features[i].dense() * features[i].dense().transpose();
                XtY.noalias() += features[i].dense() * Y.row(i);
            }
        }
        XtX.diagonal().array() += lambda;
        if (lambda == 0) {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(XtX);
            if (lu.rank() < dim)
                throw SingularSystemError("ridge_fit: rank-deficient design with lambda = 0");
            model.weights = lu.solve(XtY).transpose();
        } else {
            model.weights = Eigen::LDLT<Eigen::MatrixXd>(XtX).solve(XtY).transpose();
        }
    }
    return model;
}

double ridge_objective(const RidgeRegressor& model, const std::vector<FeatureVec>& features,
                       const std::vector<Eigen::VectorXd>& targets) {
    double obj = model.lambda * model.weights.squaredNorm();
    for (size_t i = 0; i < features.size(); ++i)
        obj += (targets[i] - model.predict(features[i])).squaredNorm();
    return obj;
}

double LinearSvm::decision(const FeatureVec& x) const {
    return x.dot(weights) + bias;
}

LinearSvm svm_fit(const std::vector<FeatureVec>& features, const std::vector<int>& labels,
                  double cost, int max_iters, double tol) {
    if (features.empty() || features.size() != labels.size())
        throw EmptyInputError("svm_fit: empty or mismatched inputs");
    if (cost <= 0) throw Error("svm_fit: cost must be positive");
    const int n = static_cast<int>(features.size());
    const int dim = features[0].dim();
    bool has_pos = false, has_neg = false;
    for (int y : labels) {
        if (y == 1) has_pos = true;
        else if (y == -1) has_neg = true;
        else throw Error("svm_fit: labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) throw SingleClassError("svm_fit: both classes required");

    LinearSvm model;
    model.cost = cost;
    model.weights = Eigen::VectorXd::Zero(dim);
    model.bias = 0.0;

    auto objective = [&](const Eigen::VectorXd& w, double b) {
        double obj = 0.5 * w.squaredNorm();
        for (int i = 0; i < n; ++i) {
            const double slack = std::max(0.0, 1.0 - labels[i] * (features[i].dot(w) + b));
            obj += cost * slack * slack;
        }
        return obj;
    };

    // Lipschitz-style estimate of the curvature for the initial step.
    double sq_sum = 0;
    for (const auto& f : features) sq_sum += f.squared_norm() + 1.0;
    double step = 1.0 / (1.0 + 2.0 * cost * sq_sum / n);

    double obj = objective(model.weights, model.bias);
    model.iteration_log.push_back(obj);

    Eigen::VectorXd grad_w(dim);
    for (int iter = 0; iter < max_iters; ++iter) {
        grad_w = model.weights;
        double grad_b = 0;
        for (int i = 0; i < n; ++i) {
            const double slack = 1.0 - labels[i] * (features[i].dot(model.weights) + model.bias);
            if (slack <= 0) continue;
            const double coeff = -2.0 * cost * labels[i] * slack;
            features[i].add_scaled_to(grad_w, coeff);
            grad_b += coeff;
        }
        const double grad_sq = grad_w.squaredNorm() + grad_b * grad_b;
        if (grad_sq < 1e-24) break;

        // Armijo backtracking keeps the objective monotone.
        double new_obj = obj;
        Eigen::VectorXd w_try;
        double b_try = model.bias;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            w_try = model.weights - step * grad_w;
            b_try = model.bias - step * grad_b;
            new_obj = objective(w_try, b_try);
            if (new_obj <= obj - 0.25 * step * grad_sq) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        model.weights = std::move(w_try);
        model.bias = b_try;
        const double improvement = (obj - new_obj) / std::max(1.0, std::abs(obj));
        obj = new_obj;
        model.iteration_log.push_back(obj);
        step *= 1.5;
        if (improvement < tol) break;
    }
    return model;
}

}  // namespace bcr
