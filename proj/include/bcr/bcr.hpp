#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bcr/features.hpp"
#include "bcr/image.hpp"
#include "bcr/linear_models.hpp"
#include "bcr/spdm.hpp"

namespace bcr {

enum class TargetMode { kSpdmParams, kRawLandmarks };

struct BcrConfig {
    int levels = 4;
    int total_trees = 600;
    int tree_depth = 6;
    int candidates = 500;  // F
    double lambda = 1.0;
    double svm_cost = 1.0;
    double energy_fraction = 0.98;
    TargetMode target_mode = TargetMode::kSpdmParams;
    bool branching = true;
    int min_node_population = 20;
    // Local feature radius per cascade level (fraction of face size); the last
    // entry repeats when levels exceed the schedule.
    std::vector<double> radius_schedule = {0.4, 0.3, 0.2, 0.1};
    int threshold_quantiles = 16;
    std::uint64_t seed = 0;
    double visibility_threshold = 0.5;

    double radius_for_level(int level) const {
        if (radius_schedule.empty()) return 0.3;
        return radius_schedule[std::min<size_t>(level, radius_schedule.size() - 1)];
    }
};

// One cascade stage: SPDM + forest + ridge regressor, plus the SVM gate and
// child links on non-terminal levels.
struct BcrNode {
    int level = 0;
    SpdmModel spdm;
    FeatureForest forest;
    RidgeRegressor regressor;
    std::optional<LinearSvm> gate;
    bool raw_targets = false;  // nonparametric mode: regressor outputs landmark deltas
    int left = -1;
    int right = -1;
};

struct BcrModel {
    std::vector<BcrNode> nodes;  // nodes[0] is the root
    int levels = 0;
    int landmarks = 0;
    TargetMode target_mode = TargetMode::kSpdmParams;
    double visibility_threshold = 0.5;
    bool branching = true;
};

struct TrainInstance {
    const ImageSample* image = nullptr;
    Shape gt_shape;
    Visibility gt_visibility;
    Shape init_shape;
};

struct NodeUpdateResult {
    Shape shape;
    Visibility visibility;  // continuous
    BinaryDescriptor descriptor;
};

// One cascade step: normalize to the node frame, extract the descriptor,
// re-project parameters, apply the regressed update, map back.
NodeUpdateResult node_update(const BcrNode& node, const ImageSample& image,
                             const Shape& s_prev, const Visibility& v_prev);

struct BranchDecision {
    bool go_left = false;
    double margin = 0.0;  // |decision value|
};

// y = w'd + b; y < 0 goes left, y >= 0 right.
BranchDecision branch_decision(const BcrNode& node, const BinaryDescriptor& descriptor);

struct Partition {
    std::vector<int> labels;  // +-1 per sample
    Eigen::VectorXd first_pc;
};

// Sign-of-median-projection split along the first principal component of the
// ideal updates.
Partition partition_training(const std::vector<Eigen::VectorXd>& targets);

// Child subsets under the overlap rule: every own-label sample plus the
// hardest ceil(2k/3) of the k opposite-label samples (by gate margin).
std::pair<std::vector<int>, std::vector<int>> overlap_split(
    const std::vector<int>& labels, const std::vector<double>& decision_values);

BcrModel train_bcr(const std::vector<TrainInstance>& dataset, const BcrConfig& config);

struct AlignmentResult {
    Shape shape;
    Visibility visibility;             // binary
    Visibility visibility_continuous;
    std::vector<bool> path;            // true = left, length levels-1
    std::vector<Shape> level_shapes;   // filled when trace requested
};

AlignmentResult fit(const BcrModel& model, const ImageSample& image, const Shape& init,
                    bool trace = false);

struct Box {
    double x = 0, y = 0, w = 0, h = 0;
};

// Root mean shape scaled/translated so its bounding box matches `box`.
Shape init_from_box(const BcrModel& model, const Box& box);
Shape shape_to_box(const Shape& shape, const Box& box);

Box shape_bounding_box(const Shape& s);

struct DatasetSample {
    const ImageSample* image = nullptr;
    Shape gt_shape;
    Visibility gt_visibility;
    Box box;
};

// Initialization augmentation: `augment` instances per sample, each the mean
// shape placed at the box with jittered scale (+-5%), translation (+-5% of
// box size), and rotation (+-10 deg).
std::vector<TrainInstance> make_training_instances(const std::vector<DatasetSample>& samples,
                                                   const Shape& mean_shape, int augment,
                                                   std::uint64_t seed);

}  // namespace bcr
