#include "bcr/spdm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace bcr {

namespace {

std::vector<std::pair<int, int>> missing_entries(const std::vector<Visibility>& masks, int nl) {
    // (sample, coordinate) pairs; a hidden landmark hides both coordinates.
    std::vector<std::pair<int, int>> missing;
    for (size_t k = 0; k < masks.size(); ++k)
        for (int i = 0; i < nl; ++i)
            if (masks[k][i] < 0.5) {
                missing.emplace_back(static_cast<int>(k), i);
                missing.emplace_back(static_cast<int>(k), nl + i);
            }
    return missing;
}

double observed_residual(const std::vector<Shape>& data, const std::vector<Visibility>& masks,
                         const PcaModel& pca) {
    const int nl = landmark_count(data[0]);
    double res = 0;
    for (size_t k = 0; k < data.size(); ++k) {
        const Eigen::VectorXd recon = pca_reconstruct(pca, pca_project(pca, data[k]));
        for (int i = 0; i < nl; ++i) {
            if (masks[k][i] < 0.5) continue;
            const double dx = data[k][i] - recon[i];
            const double dy = data[k][nl + i] - recon[nl + i];
            res += dx * dx + dy * dy;
        }
    }
    return res;
}

}  // namespace

std::vector<Shape> impute_missing(const std::vector<Shape>& shapes,
                                  const std::vector<Visibility>& masks,
                                  const ImputeOptions& options) {
    if (shapes.empty()) throw EmptyInputError("impute_missing: no shapes");
    if (masks.size() != shapes.size())
        throw DimensionMismatchError("impute_missing: shapes/masks count mismatch");
    const int dim = static_cast<int>(shapes[0].size());
    const int nl = dim / 2;
    const int n = static_cast<int>(shapes.size());

    for (int i = 0; i < nl; ++i) {
        bool seen = false;
        for (const auto& m : masks)
            if (m[i] >= 0.5) { seen = true; break; }
        if (!seen)
            throw UnimputableLandmarkError("impute_missing: landmark " + std::to_string(i) +
                                           " visible in no shape");
    }

    const auto missing = missing_entries(masks, nl);
    if (missing.empty()) return shapes;

    // Mean value imputation over visible entries.
    std::vector<Shape> completed = shapes;
    Eigen::VectorXd coord_mean = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd coord_count = Eigen::VectorXd::Zero(dim);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < nl; ++i)
            if (masks[k][i] >= 0.5) {
                coord_mean[i] += shapes[k][i];
                coord_mean[nl + i] += shapes[k][nl + i];
                coord_count[i] += 1;
                coord_count[nl + i] += 1;
            }
    for (int c = 0; c < dim; ++c) coord_mean[c] /= coord_count[c];
    for (const auto& [k, c] : missing) completed[k][c] = coord_mean[c];

    const int max_rank = std::min(n - 1, dim);
    double prev_residual = -1;
    for (int m = 1; m <= max_rank; ++m) {
        std::vector<double> trace;
        double residual = 0;
        for (int it = 0; it < options.inner_max_iters; ++it) {
            std::vector<Eigen::VectorXd> as_vecs(completed.begin(), completed.end());
            const PcaModel pca = pca_fit_components(as_vecs, m);
            residual = observed_residual(completed, masks, pca);
            trace.push_back(residual);
            double movement = 0;
            for (const auto& [k, c] : missing) {
                const Eigen::VectorXd recon = pca_reconstruct(pca, pca_project(pca, completed[k]));
                const double d = recon[c] - completed[k][c];
                movement += d * d;
                completed[k][c] = recon[c];
            }
            if (std::sqrt(movement) < options.inner_tol) break;
        }
        if (options.residual_trace) options.residual_trace->push_back(std::move(trace));
        if (prev_residual >= 0) {
            const double improvement = (prev_residual - residual) / std::max(prev_residual, 1e-24);
            if (improvement < options.growth_tol) break;
        }
        prev_residual = residual;
        if (residual < 1e-20) break;
    }
    return completed;
}

namespace {

// Modified Gram-Schmidt of `v` against the first `ncols` columns of `basis`
// plus `extra`; returns false when the residual is numerically zero.
bool orthonormalize_against(const Eigen::MatrixXd& basis, const std::vector<Eigen::VectorXd>& extra,
                            Eigen::VectorXd& v) {
    for (int pass = 0; pass < 2; ++pass) {
        for (int c = 0; c < basis.cols(); ++c) v -= basis.col(c).dot(v) * basis.col(c);
        for (const auto& e : extra) v -= e.dot(v) * e;
    }
    const double norm = v.norm();
    if (norm < 1e-10) return false;
    v /= norm;
    return true;
}

// Uncentered PCA (eigenvectors of the second-moment matrix), so q = C^T z
// holds without a combined-space mean term.
Eigen::MatrixXd uncentered_pca(const std::vector<Eigen::VectorXd>& z, double energy_fraction) {
    const int dim = static_cast<int>(z[0].size());
    Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& v : z) moment.noalias() += v * v.transpose();
    moment /= static_cast<double>(z.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(moment);
    Eigen::VectorXd values = solver.eigenvalues().reverse();
    Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
    const double total = values.sum();
    const double rank_eps = std::max(total, 1.0) * 1e-12;
    int keep = 0;
    if (total > 1e-24) {
        double acc = 0;
        while (keep < dim && values[keep] > rank_eps && acc < energy_fraction * total - 1e-15) {
            acc += values[keep];
            ++keep;
        }
    }
    return vectors.leftCols(keep);
}

}  // namespace

SpdmModel build_spdm(const std::vector<Shape>& shapes, const std::vector<Visibility>& masks,
                     double energy_fraction) {
    if (shapes.size() < 2) throw EmptyInputError("build_spdm: need at least 2 shapes");
    const int n = static_cast<int>(shapes.size());
    const int nl = landmark_count(shapes[0]);

    const std::vector<Shape> completed = impute_missing(shapes, masks);

    SpdmModel model;

    // Shape PCA on completed aligned shapes.
    std::vector<Eigen::VectorXd> shape_vecs(completed.begin(), completed.end());
    const PcaModel shape_pca = pca_fit(shape_vecs, energy_fraction);
    model.mean_shape = shape_pca.mean;

    // Similarity basis columns: derivatives of the similarity group action at
    // the (centered) mean -- rotation, x/y translation, scale.
    const Eigen::Vector2d mc = shape_centroid(model.mean_shape, all_visible(nl));
    Eigen::VectorXd centered(2 * nl);
    for (int i = 0; i < nl; ++i) {
        centered[i] = model.mean_shape[i] - mc.x();
        centered[nl + i] = model.mean_shape[nl + i] - mc.y();
    }
    Eigen::VectorXd rot(2 * nl), tx = Eigen::VectorXd::Zero(2 * nl), ty = Eigen::VectorXd::Zero(2 * nl);
    for (int i = 0; i < nl; ++i) {
        rot[i] = -centered[nl + i];
        rot[nl + i] = centered[i];
        tx[i] = 1.0;
        ty[nl + i] = 1.0;
    }
    std::vector<Eigen::VectorXd> sim_cols;
    for (Eigen::VectorXd v : {rot, tx, ty, centered}) {
        if (orthonormalize_against(shape_pca.basis, sim_cols, v)) sim_cols.push_back(std::move(v));
    }
    model.similarity_columns = static_cast<int>(sim_cols.size());
    model.shape_basis.resize(2 * nl, shape_pca.components() + model.similarity_columns);
    model.shape_basis.leftCols(shape_pca.components()) = shape_pca.basis;
    for (int c = 0; c < model.similarity_columns; ++c)
        model.shape_basis.col(shape_pca.components() + c) = sim_cols[c];

    // Visibility PCA. All-visible data yields an empty basis and the model
    // degenerates to a plain PDM.
    std::vector<Eigen::VectorXd> vis_vecs(masks.begin(), masks.end());
    const PcaModel vis_pca = pca_fit(vis_vecs, energy_fraction);
    model.mean_visibility = vis_pca.mean;
    model.vis_basis = vis_pca.basis;

    const int ms = model.shape_params();
    const int mv = model.vis_params();

    // Per-sample parameters feeding the combined PCA.
    Eigen::MatrixXd bs(n, ms), bv(n, mv);
    for (int i = 0; i < n; ++i) {
        bs.row(i) = (model.shape_basis.transpose() * (completed[i] - model.mean_shape)).transpose();
        if (mv > 0)
            bv.row(i) = (model.vis_basis.transpose() * (masks[i] - model.mean_visibility)).transpose();
    }

    // Shift/scale b_s so its dimensions match the average spread of b_v.
    double target_std = 1.0;
    if (mv > 0) {
        double acc = 0;
        for (int c = 0; c < mv; ++c) acc += std::sqrt(bv.col(c).squaredNorm() / n);
        target_std = acc / mv;
        if (target_std < 1e-12) target_std = 1.0;
    }
    model.param_shift = Eigen::VectorXd::Zero(ms);
    model.param_scale = Eigen::VectorXd::Ones(ms);
    // The appended similarity columns keep unit scale: their spread across the
    // aligned training set is an alignment-tolerance artifact, and
    // standardizing by it blows the dimensions up arbitrarily.
    for (int c = 0; c < ms - model.similarity_columns; ++c) {
        const double mean = bs.col(c).mean();
        const double var = (bs.col(c).array() - mean).square().sum() / n;
        const double std = std::sqrt(var);
        if (std > 1e-9) {
            model.param_shift[c] = mean;
            model.param_scale[c] = target_std / std;
        }
    }

    std::vector<Eigen::VectorXd> stacked(n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd z(ms + mv);
        z.head(ms) = (bs.row(i).transpose() - model.param_shift).cwiseProduct(model.param_scale);
        if (mv > 0) z.tail(mv) = bv.row(i).transpose();
        stacked[i] = std::move(z);
    }
    model.combined = uncentered_pca(stacked, energy_fraction);

    // The similarity dimensions carry ~zero variance over the aligned training
    // set, so the combined PCA alone would drop them and the model could not
    // express pose adjustments at fit time. Append their unit directions and
    // re-orthonormalize, mirroring the shape-basis augmentation.
    const int stacked_dim = ms + mv;
    std::vector<Eigen::VectorXd> extra_cols;
    for (int c = ms - model.similarity_columns; c < ms; ++c) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(stacked_dim);
        e[c] = 1.0;
        if (orthonormalize_against(model.combined, extra_cols, e)) extra_cols.push_back(std::move(e));
    }
    if (!extra_cols.empty()) {
        Eigen::MatrixXd c2(stacked_dim, model.combined.cols() + static_cast<int>(extra_cols.size()));
        c2.leftCols(model.combined.cols()) = model.combined;
        for (size_t i = 0; i < extra_cols.size(); ++i)
            c2.col(model.combined.cols() + static_cast<int>(i)) = extra_cols[i];
        model.combined = std::move(c2);
    }
    return model;
}

Eigen::VectorXd params_from_shape(const SpdmModel& model, const Shape& s, const Visibility& v) {
    if (s.size() != model.mean_shape.size() || v.size() != model.mean_visibility.size())
        throw DimensionMismatchError("params_from_shape: dimension mismatch");
    const int ms = model.shape_params();
    const int mv = model.vis_params();
    Eigen::VectorXd z(ms + mv);
    const Eigen::VectorXd bs = model.shape_basis.transpose() * (s - model.mean_shape);
    z.head(ms) = (bs - model.param_shift).cwiseProduct(model.param_scale);
    if (mv > 0) z.tail(mv) = model.vis_basis.transpose() * (v - model.mean_visibility);
    return model.combined.transpose() * z;
}

ShapeAndVisibility shape_from_params(const SpdmModel& model, const Eigen::VectorXd& q) {
    if (q.size() != model.q_dim())
        throw DimensionMismatchError("shape_from_params: parameter dimension mismatch");
    const int ms = model.shape_params();
    const int mv = model.vis_params();
    const Eigen::VectorXd z = model.combined * q;
    const Eigen::VectorXd bs = z.head(ms).cwiseQuotient(model.param_scale) + model.param_shift;
    ShapeAndVisibility out;
    out.shape = model.mean_shape + model.shape_basis * bs;
    out.visibility = model.mean_visibility;
    if (mv > 0) out.visibility += model.vis_basis * z.tail(mv);
    return out;
}

Visibility binarize_visibility(const Visibility& v_continuous, double threshold) {
    Visibility out(v_continuous.size());
    for (int i = 0; i < v_continuous.size(); ++i)
        out[i] = v_continuous[i] >= threshold ? 1.0 : 0.0;  // tie goes to visible
    return out;
}

}  // namespace bcr
