#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "bcr/image.hpp"
#include "bcr/linear_models.hpp"
#include "bcr/shape.hpp"

namespace bcr {

using Rng = std::mt19937_64;

// Intensity difference between two offsets near a landmark. Offsets live in
// the mean-shape-normalized frame (unitless, relative to face size).
struct PixelDiffFeature {
    int landmark_index = 0;
    Eigen::Vector2d offset_a = Eigen::Vector2d::Zero();
    Eigen::Vector2d offset_b = Eigen::Vector2d::Zero();
};

struct TreeNode {
    // Internal node when left >= 0; leaf otherwise.
    PixelDiffFeature feature;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf_id = -1;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    int leaf_count = 0;
};

struct FeatureForest {
    std::vector<int> tree_landmarks;       // landmark index per tree
    std::vector<RegressionTree> trees;
    std::vector<int> leaf_offsets;         // global leaf index base per tree
    int descriptor_dim = 0;

    int tree_count() const { return static_cast<int>(trees.size()); }
};

// One active leaf per tree.
struct BinaryDescriptor {
    std::vector<int> active_indices;  // sorted
    int dimension = 0;

    FeatureVec as_feature() const { return FeatureVec(active_indices, dimension); }
};

// Tree budget split across landmarks proportionally to mean visibility,
// largest-remainder rounding so the counts sum exactly to total_trees.
std::vector<int> allocate_trees(int total_trees, const Eigen::VectorXd& mean_visibility);

std::vector<PixelDiffFeature> sample_candidate_features(int landmark_index, double radius,
                                                        int count, Rng& rng);

double evaluate_feature(const PixelDiffFeature& feat, const ImageSample& image,
                        const Shape& shape, const SimilarityTransform& normalizing_transform);

struct FeatureSample {
    const ImageSample* image = nullptr;
    Shape shape;                       // current estimate, image frame
    SimilarityTransform to_mean;       // image frame -> mean-shape frame
};

struct TreeTrainConfig {
    int depth = 6;
    int candidates = 500;   // F
    double radius = 0.3;
    int threshold_quantiles = 16;
};

// Split nodes pick a target dimension at random (probability proportional to
// the per-dimension variance weights), then the candidate feature/threshold
// with maximal variance reduction in that dimension.
RegressionTree train_tree(const std::vector<FeatureSample>& samples,
                          const std::vector<Eigen::VectorXd>& targets,
                          const Eigen::VectorXd& target_weights, int landmark_index,
                          const TreeTrainConfig& config, Rng& rng);

struct ForestTrainConfig {
    int total_trees = 600;
    int depth = 6;
    int candidates = 500;
    double radius = 0.3;
    int threshold_quantiles = 16;
    std::uint64_t seed = 0;
};

// Independent seeded RNG stream per tree.
FeatureForest train_forest(const std::vector<FeatureSample>& samples,
                           const std::vector<Eigen::VectorXd>& targets,
                           const Eigen::VectorXd& mean_visibility,
                           const ForestTrainConfig& config);

BinaryDescriptor extract_descriptor(const FeatureForest& forest, const ImageSample& image,
                                    const Shape& shape, const SimilarityTransform& to_mean);

}  // namespace bcr
