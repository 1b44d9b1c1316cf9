#include "bcr/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bcr {

std::vector<int> allocate_trees(int total_trees, const Eigen::VectorXd& mean_visibility) {
    const int nl = static_cast<int>(mean_visibility.size());
    const double total_vis = mean_visibility.sum();
    if (total_vis <= 0) throw Error("allocate_trees: all-zero mean visibility");

    std::vector<int> counts(nl, 0);
    std::vector<std::pair<double, int>> remainders;  // (remainder, landmark)
    int assigned = 0;
    for (int i = 0; i < nl; ++i) {
        const double raw = total_trees * mean_visibility[i] / total_vis;
        counts[i] = static_cast<int>(std::floor(raw));
        assigned += counts[i];
        remainders.emplace_back(raw - counts[i], i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; k < total_trees - assigned; ++k) counts[remainders[k].second] += 1;
    return counts;
}

std::vector<PixelDiffFeature> sample_candidate_features(int landmark_index, double radius,
                                                        int count, Rng& rng) {
    if (radius <= 0) throw Error("sample_candidate_features: radius must be positive");
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto in_disk = [&]() {
        while (true) {
            const double x = unit(rng), y = unit(rng);
            if (x * x + y * y <= 1.0) return Eigen::Vector2d(x * radius, y * radius);
        }
    };
    std::vector<PixelDiffFeature> feats(count);
    for (auto& f : feats) {
        f.landmark_index = landmark_index;
        f.offset_a = in_disk();
        f.offset_b = in_disk();
    }
    return feats;
}

double evaluate_feature(const PixelDiffFeature& feat, const ImageSample& image,
                        const Shape& shape, const SimilarityTransform& normalizing_transform) {
    const int nl = landmark_count(shape);
    const Eigen::Vector2d lm(shape[feat.landmark_index], shape[nl + feat.landmark_index]);
    const Eigen::Vector2d pa = lm + normalizing_transform.apply_vector_inverse(feat.offset_a);
    const Eigen::Vector2d pb = lm + normalizing_transform.apply_vector_inverse(feat.offset_b);
    return image.sample(pa.x(), pa.y()) - image.sample(pb.x(), pb.y());
}

namespace {

// Weighted pick with explicit cumulative walk (reproducible construction).
int weighted_choice(const Eigen::VectorXd& weights, Rng& rng) {
    const double total = weights.sum();
    if (total <= 0) return 0;
    std::uniform_real_distribution<double> uni(0.0, total);
    const double r = uni(rng);
    double acc = 0;
    for (int i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (r < acc) return i;
    }
    return static_cast<int>(weights.size()) - 1;
}

struct SplitSearch {
    double best_reduction = 0;
    double best_threshold = 0;
    int best_candidate = -1;
};

// Variance reduction of target dimension `dim` over candidate thresholds at
// quantile midpoints of the sorted feature values.
SplitSearch find_best_split(const std::vector<PixelDiffFeature>& candidates,
                            const std::vector<FeatureSample>& samples,
                            const std::vector<Eigen::VectorXd>& targets,
                            const std::vector<int>& node_idx, int dim, int quantiles) {
    const int n = static_cast<int>(node_idx.size());
    SplitSearch result;

    std::vector<std::pair<double, double>> value_target(n);  // (feature value, target[dim])
    for (int c = 0; c < static_cast<int>(candidates.size()); ++c) {
        for (int k = 0; k < n; ++k) {
            const int i = node_idx[k];
            value_target[k] = {evaluate_feature(candidates[c], *samples[i].image,
                                                samples[i].shape, samples[i].to_mean),
                               targets[i][dim]};
        }
        std::sort(value_target.begin(), value_target.end());

        // Prefix sums over the sorted order allow O(1) evaluation per cut.
        std::vector<double> psum(n + 1, 0), psq(n + 1, 0);
        for (int k = 0; k < n; ++k) {
            psum[k + 1] = psum[k] + value_target[k].second;
            psq[k + 1] = psq[k] + value_target[k].second * value_target[k].second;
        }
        const double total_ss = psq[n] - psum[n] * psum[n] / n;

        for (int qi = 1; qi < quantiles; ++qi) {
            int cut = static_cast<int>(static_cast<long long>(qi) * n / quantiles);
            if (cut <= 0 || cut >= n) continue;
            if (value_target[cut - 1].first == value_target[cut].first) continue;
            const double threshold =
                0.5 * (value_target[cut - 1].first + value_target[cut].first);
            const double left_ss = psq[cut] - psum[cut] * psum[cut] / cut;
            const int rn = n - cut;
            const double right_sum = psum[n] - psum[cut];
            const double right_ss = (psq[n] - psq[cut]) - right_sum * right_sum / rn;
            const double reduction = total_ss - left_ss - right_ss;
            if (reduction > result.best_reduction) {
                result.best_reduction = reduction;
                result.best_threshold = threshold;
                result.best_candidate = c;
            }
        }
    }
    return result;
}

struct TreeBuilder {
    const std::vector<FeatureSample>& samples;
    const std::vector<Eigen::VectorXd>& targets;
    const Eigen::VectorXd& weights;
    int landmark_index;
    const TreeTrainConfig& config;
    Rng& rng;
    RegressionTree tree;

    double evaluate(const PixelDiffFeature& f, int i) const {
        return evaluate_feature(f, *samples[i].image, samples[i].shape, samples[i].to_mean);
    }

    int build(const std::vector<int>& node_idx, int depth_left) {
        const int my_index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        if (depth_left > 0 && node_idx.size() >= 2) {
            const int dim = weighted_choice(weights, rng);
            const auto candidates = sample_candidate_features(
                landmark_index, config.radius, config.candidates, rng);
            const SplitSearch split = find_best_split(candidates, samples, targets, node_idx,
                                                      dim, config.threshold_quantiles);
            if (split.best_candidate >= 0 && split.best_reduction > 0) {
                tree.nodes[my_index].feature = candidates[split.best_candidate];
                tree.nodes[my_index].threshold = split.best_threshold;
                std::vector<int> left_idx, right_idx;
                for (int i : node_idx) {
                    // value >= threshold routes right
                    if (evaluate(tree.nodes[my_index].feature, i) >= split.best_threshold)
                        right_idx.push_back(i);
                    else
                        left_idx.push_back(i);
                }
                const int left = build(left_idx, depth_left - 1);
                const int right = build(right_idx, depth_left - 1);
                tree.nodes[my_index].left = left;
                tree.nodes[my_index].right = right;
                return my_index;
            }
        }
        tree.nodes[my_index].leaf_id = tree.leaf_count++;
        return my_index;
    }
};

}  // namespace

RegressionTree train_tree(const std::vector<FeatureSample>& samples,
                          const std::vector<Eigen::VectorXd>& targets,
                          const Eigen::VectorXd& target_weights, int landmark_index,
                          const TreeTrainConfig& config, Rng& rng) {
    if (samples.empty()) throw EmptyInputError("train_tree: no samples");
    if (samples.size() != targets.size())
        throw DimensionMismatchError("train_tree: samples/targets count mismatch");
    if (config.depth < 1) throw Error("train_tree: depth must be >= 1");

    std::vector<int> all_idx(samples.size());
    std::iota(all_idx.begin(), all_idx.end(), 0);
    TreeBuilder builder{samples, targets, target_weights, landmark_index, config, rng, {}};
    builder.build(all_idx, config.depth);
    return std::move(builder.tree);
}

FeatureForest train_forest(const std::vector<FeatureSample>& samples,
                           const std::vector<Eigen::VectorXd>& targets,
                           const Eigen::VectorXd& mean_visibility,
                           const ForestTrainConfig& config) {
    if (samples.empty()) throw EmptyInputError("train_forest: no samples");
    const int tdim = static_cast<int>(targets[0].size());
    const int n = static_cast<int>(samples.size());

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(tdim);
    for (const auto& t : targets) mean += t;
    mean /= n;
    Eigen::VectorXd variance = Eigen::VectorXd::Zero(tdim);
    for (const auto& t : targets) variance += (t - mean).cwiseAbs2();
    variance /= n;
    if (variance.sum() <= 0) variance.setOnes();

    const std::vector<int> allocation = allocate_trees(config.total_trees, mean_visibility);

    FeatureForest forest;
    for (int lm = 0; lm < static_cast<int>(allocation.size()); ++lm)
        for (int k = 0; k < allocation[lm]; ++k) forest.tree_landmarks.push_back(lm);

    TreeTrainConfig tree_config;
    tree_config.depth = config.depth;
    tree_config.candidates = config.candidates;
    tree_config.radius = config.radius;
    tree_config.threshold_quantiles = config.threshold_quantiles;

    forest.trees.resize(forest.tree_landmarks.size());
    for (size_t t = 0; t < forest.trees.size(); ++t) {
        std::seed_seq seq{config.seed, static_cast<std::uint64_t>(t)};
        Rng rng(seq);
        forest.trees[t] =
            train_tree(samples, targets, variance, forest.tree_landmarks[t], tree_config, rng);
    }

    forest.leaf_offsets.resize(forest.trees.size());
    int offset = 0;
    for (size_t t = 0; t < forest.trees.size(); ++t) {
        forest.leaf_offsets[t] = offset;
        offset += forest.trees[t].leaf_count;
    }
    forest.descriptor_dim = offset;
    return forest;
}

BinaryDescriptor extract_descriptor(const FeatureForest& forest, const ImageSample& image,
                                    const Shape& shape, const SimilarityTransform& to_mean) {
    BinaryDescriptor d;
    d.dimension = forest.descriptor_dim;
    d.active_indices.reserve(forest.trees.size());
    for (size_t t = 0; t < forest.trees.size(); ++t) {
        const RegressionTree& tree = forest.trees[t];
        int node = 0;
        while (tree.nodes[node].left >= 0) {
            const double value = evaluate_feature(tree.nodes[node].feature, image, shape, to_mean);
            node = value >= tree.nodes[node].threshold ? tree.nodes[node].right
                                                       : tree.nodes[node].left;
        }
        d.active_indices.push_back(forest.leaf_offsets[t] + tree.nodes[node].leaf_id);
    }
    std::sort(d.active_indices.begin(), d.active_indices.end());
    return d;
}

}  // namespace bcr
