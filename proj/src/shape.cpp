#include "bcr/shape.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace bcr {

namespace {

int count_visible(const Visibility& mask) {
    int n = 0;
    for (int i = 0; i < mask.size(); ++i)
        if (mask[i] >= 0.5) ++n;
    return n;
}

double wrap_angle(double a) {
    constexpr double pi = std::numbers::pi;
    a = std::fmod(a + pi, 2.0 * pi);
    if (a < 0) a += 2.0 * pi;
    return a - pi;
}

}  // namespace

Visibility all_visible(int nlandmarks) { return Visibility::Ones(nlandmarks); }

Eigen::Vector2d SimilarityTransform::apply(const Eigen::Vector2d& p) const {
    return apply_vector(p) + translation;
}

Eigen::Vector2d SimilarityTransform::apply_vector(const Eigen::Vector2d& v) const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    return scale * Eigen::Vector2d(c * v.x() - s * v.y(), s * v.x() + c * v.y());
}

Eigen::Vector2d SimilarityTransform::apply_vector_inverse(const Eigen::Vector2d& v) const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    return Eigen::Vector2d(c * v.x() + s * v.y(), -s * v.x() + c * v.y()) / scale;
}

Shape SimilarityTransform::apply(const Shape& s) const {
    const int nl = landmark_count(s);
    Shape out(s.size());
    for (int i = 0; i < nl; ++i) {
        Eigen::Vector2d p = apply(Eigen::Vector2d(s[i], s[nl + i]));
        out[i] = p.x();
        out[nl + i] = p.y();
    }
    return out;
}

SimilarityTransform SimilarityTransform::inverse() const {
    SimilarityTransform inv;
    inv.scale = 1.0 / scale;
    inv.rotation = wrap_angle(-rotation);
    inv.translation = -apply_vector_inverse(translation);
    return inv;
}

std::pair<Shape, SimilarityTransform> procrustes_align(const Shape& shape,
                                                       const Shape& reference,
                                                       const Visibility& mask) {
    const int nl = landmark_count(shape);
    if (landmark_count(reference) != nl || mask.size() != nl)
        throw DimensionMismatchError("procrustes_align: landmark counts differ");
    if (count_visible(mask) < 3)
        throw DegenerateAlignmentError("procrustes_align: fewer than 3 visible landmarks");

    // Complex-number formulation: with centered points z (shape) and w
    // (reference), the optimal complex scale is sum(w conj(z)) / sum(|z|^2).
    std::complex<double> zc(0, 0), wc(0, 0);
    int n = 0;
    for (int i = 0; i < nl; ++i) {
        if (mask[i] < 0.5) continue;
        zc += std::complex<double>(shape[i], shape[nl + i]);
        wc += std::complex<double>(reference[i], reference[nl + i]);
        ++n;
    }
    zc /= static_cast<double>(n);
    wc /= static_cast<double>(n);

    std::complex<double> num(0, 0);
    double den = 0;
    for (int i = 0; i < nl; ++i) {
        if (mask[i] < 0.5) continue;
        std::complex<double> z = std::complex<double>(shape[i], shape[nl + i]) - zc;
        std::complex<double> w = std::complex<double>(reference[i], reference[nl + i]) - wc;
        num += w * std::conj(z);
        den += std::norm(z);
    }
    if (den < 1e-24)
        throw DegenerateAlignmentError("procrustes_align: visible landmarks are coincident");

    const std::complex<double> c = num / den;
    SimilarityTransform t;
    t.scale = std::abs(c);
    if (t.scale < 1e-24)
        throw DegenerateAlignmentError("procrustes_align: degenerate optimal scale");
    t.rotation = std::arg(c);
    const std::complex<double> tr = wc - c * zc;
    t.translation = Eigen::Vector2d(tr.real(), tr.imag());
    return {t.apply(shape), t};
}

Eigen::Vector2d shape_centroid(const Shape& s, const Visibility& mask) {
    const int nl = landmark_count(s);
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    int n = 0;
    for (int i = 0; i < nl; ++i) {
        if (mask[i] < 0.5) continue;
        c += Eigen::Vector2d(s[i], s[nl + i]);
        ++n;
    }
    if (n == 0) throw DegenerateAlignmentError("shape_centroid: no visible landmarks");
    return c / n;
}

double shape_rms_size(const Shape& s, const Visibility& mask) {
    const int nl = landmark_count(s);
    const Eigen::Vector2d c = shape_centroid(s, mask);
    double ss = 0;
    int n = 0;
    for (int i = 0; i < nl; ++i) {
        if (mask[i] < 0.5) continue;
        ss += (Eigen::Vector2d(s[i], s[nl + i]) - c).squaredNorm();
        ++n;
    }
    return std::sqrt(ss / n);
}

namespace {

// Mean over shapes where each landmark is visible; then centroid/size
// normalized (all landmarks weighted, since the mean is fully defined).
Shape masked_mean(const std::vector<Shape>& shapes, const std::vector<Visibility>& masks) {
    const int dim = static_cast<int>(shapes[0].size());
    const int nl = dim / 2;
    Shape mean = Shape::Zero(dim);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(nl);
    for (size_t k = 0; k < shapes.size(); ++k) {
        for (int i = 0; i < nl; ++i) {
            if (masks[k][i] < 0.5) continue;
            mean[i] += shapes[k][i];
            mean[nl + i] += shapes[k][nl + i];
            counts[i] += 1;
        }
    }
    for (int i = 0; i < nl; ++i) {
        if (counts[i] == 0)
            throw UnimputableLandmarkError("generalized_procrustes: landmark " +
                                           std::to_string(i) + " visible in no shape");
        mean[i] /= counts[i];
        mean[nl + i] /= counts[i];
    }
    return mean;
}

Shape normalize_mean(const Shape& mean) {
    const int nl = landmark_count(mean);
    const Visibility all = all_visible(nl);
    const Eigen::Vector2d c = shape_centroid(mean, all);
    const double size = shape_rms_size(mean, all);
    if (size < 1e-24)
        throw DegenerateAlignmentError("generalized_procrustes: degenerate mean shape");
    Shape out(mean.size());
    for (int i = 0; i < nl; ++i) {
        out[i] = (mean[i] - c.x()) / size;
        out[nl + i] = (mean[nl + i] - c.y()) / size;
    }
    return out;
}

}  // namespace

GpaResult generalized_procrustes(const std::vector<Shape>& shapes,
                                 const std::vector<Visibility>& masks,
                                 int max_iters, double tol) {
    if (shapes.empty()) throw EmptyInputError("generalized_procrustes: no shapes");
    if (masks.size() != shapes.size())
        throw DimensionMismatchError("generalized_procrustes: shapes/masks count mismatch");

    GpaResult result;
    result.aligned = shapes;
    Shape mean = normalize_mean(masked_mean(result.aligned, masks));

    for (int iter = 0; iter < max_iters; ++iter) {
        result.iterations = iter + 1;
        for (size_t k = 0; k < result.aligned.size(); ++k)
            result.aligned[k] = procrustes_align(result.aligned[k], mean, masks[k]).first;
        Shape new_mean = normalize_mean(masked_mean(result.aligned, masks));
        const double movement = (new_mean - mean).norm();
        mean = new_mean;
        if (movement < tol) break;
    }
    result.mean = mean;
    return result;
}

double normalized_error(const Shape& pred, const Shape& gt, const Visibility& gt_vis,
                        ErrorNormalization normalization, const RoleMap& roles) {
    const int nl = landmark_count(gt);
    if (landmark_count(pred) != nl || gt_vis.size() != nl)
        throw DimensionMismatchError("normalized_error: landmark counts differ");

    auto role_index = [&](const char* role) {
        auto it = roles.find(role);
        if (it == roles.end())
            throw Error(std::string("normalized_error: role map is missing '") + role + "'");
        if (it->second < 0 || it->second >= nl)
            throw Error(std::string("normalized_error: role '") + role + "' index out of range");
        if (gt_vis[it->second] < 0.5)
            throw Error(std::string("normalized_error: normalizer landmark '") + role +
                        "' is not visible in ground truth");
        return it->second;
    };

    double normalizer = 0;
    if (normalization == ErrorNormalization::kInterocular) {
        const int a = role_index("left_eye_outer");
        const int b = role_index("right_eye_outer");
        normalizer = std::hypot(gt[a] - gt[b], gt[nl + a] - gt[nl + b]);
    } else {
        const int a = role_index("eye_corner");
        const int b = role_index("mouth_corner");
        normalizer = 0.5 * std::hypot(gt[a] - gt[b], gt[nl + a] - gt[nl + b]);
    }
    if (normalizer < 1e-24)
        throw DegenerateNormalizerError("normalized_error: normalizer distance is zero");

    double sum = 0;
    int n = 0;
    for (int i = 0; i < nl; ++i) {
        if (gt_vis[i] < 0.5) continue;
        sum += std::hypot(pred[i] - gt[i], pred[nl + i] - gt[nl + i]);
        ++n;
    }
    if (n == 0) throw EmptyInputError("normalized_error: no visible landmarks in ground truth");
    return (sum / n) / normalizer;
}

std::vector<std::pair<double, double>> ced_curve(const std::vector<double>& errors,
                                                 const std::vector<double>& thresholds) {
    if (errors.empty()) throw EmptyInputError("ced_curve: no errors");
    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<double, double>> curve;
    curve.reserve(thresholds.size());
    for (double t : thresholds) {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
        curve.emplace_back(t, static_cast<double>(it - sorted.begin()) / sorted.size());
    }
    return curve;
}

}  // namespace bcr
