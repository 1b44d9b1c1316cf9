#include "bcr/bcr.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <thread>

namespace bcr {

namespace {

struct NormalizedState {
    SimilarityTransform to_mean;
    Shape s_norm;
};

NormalizedState normalize_to_node(const SpdmModel& spdm, const Shape& s,
                                  const Visibility& v, double vis_threshold) {
    const Visibility mask = binarize_visibility(v, vis_threshold);
    auto [aligned, t] = procrustes_align(s, spdm.mean_shape, mask);
    return {t, std::move(aligned)};
}

}  // namespace

NodeUpdateResult node_update(const BcrNode& node, const ImageSample& image,
                             const Shape& s_prev, const Visibility& v_prev) {
    const NormalizedState ns = normalize_to_node(node.spdm, s_prev, v_prev, 0.5);
    NodeUpdateResult out;
    out.descriptor = extract_descriptor(node.forest, image, s_prev, ns.to_mean);
    const Eigen::VectorXd delta = node.regressor.predict(out.descriptor.as_feature());
    if (!node.raw_targets) {
        const Eigen::VectorXd q_prev = params_from_shape(node.spdm, ns.s_norm, v_prev);
        const ShapeAndVisibility sv = shape_from_params(node.spdm, q_prev + delta);
        out.shape = ns.to_mean.inverse().apply(sv.shape);
        out.visibility = sv.visibility;
    } else {
        // Nonparametric mode: the regressor predicts normalized-frame landmark
        // deltas directly and visibility stays all-ones.
        out.shape = ns.to_mean.inverse().apply(Shape(ns.s_norm + delta));
        out.visibility = all_visible(landmark_count(s_prev));
    }
    return out;
}

BranchDecision branch_decision(const BcrNode& node, const BinaryDescriptor& descriptor) {
    if (!node.gate) throw Error("branch_decision: node has no gate (leaf level)");
    const double y = node.gate->decision(descriptor.as_feature());
    return {y < 0.0, std::abs(y)};
}

Partition partition_training(const std::vector<Eigen::VectorXd>& targets) {
    if (targets.size() < 2) throw EmptyInputError("partition_training: need at least 2 samples");
    const PcaModel pca = pca_fit(targets, 1.0);
    if (pca.components() == 0)
        throw Error("partition_training: zero-variance targets, no meaningful branch");

    Partition p;
    p.first_pc = pca.basis.col(0);
    const int n = static_cast<int>(targets.size());
    std::vector<double> proj(n);
    for (int i = 0; i < n; ++i) proj[i] = p.first_pc.dot(targets[i] - pca.mean);
    std::vector<double> sorted = proj;
    std::sort(sorted.begin(), sorted.end());
    const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    p.labels.resize(n);
    for (int i = 0; i < n; ++i) p.labels[i] = proj[i] <= median ? -1 : 1;
    return p;
}

std::pair<std::vector<int>, std::vector<int>> overlap_split(
    const std::vector<int>& labels, const std::vector<double>& decision_values) {
    if (labels.size() != decision_values.size())
        throw DimensionMismatchError("overlap_split: labels/values count mismatch");
    const int n = static_cast<int>(labels.size());

    // For the left child: keep all left-labeled samples, and of the k
    // right-labeled ones keep the ceil(2k/3) hardest (smallest decision
    // value); symmetric for the right child.
    auto build_child = [&](int own_label) {
        std::vector<int> own, other;
        for (int i = 0; i < n; ++i) {
            if (labels[i] == own_label)
                own.push_back(i);
            else
                other.push_back(i);
        }
        const int k = static_cast<int>(other.size());
        const int keep = (2 * k + 2) / 3;  // ceil(2k/3)
        std::stable_sort(other.begin(), other.end(), [&](int a, int b) {
            // Hardest first: least confidently classified as the other branch.
            return own_label == -1 ? decision_values[a] < decision_values[b]
                                   : decision_values[a] > decision_values[b];
        });
        other.resize(keep);
        own.insert(own.end(), other.begin(), other.end());
        std::sort(own.begin(), own.end());
        return own;
    };
    return {build_child(-1), build_child(1)};
}

namespace {

void parallel_for(int count, const std::function<void(int)>& body) {
    const int workers =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), count));
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            int i;
            while ((i = next.fetch_add(1)) < count) body(i);
        });
    for (auto& t : pool) t.join();
}

struct SampleState {
    int index = 0;  // into the dataset
    Shape shape;
    Visibility visibility;
};

struct PendingNode {
    int node_index = 0;
    int level = 0;
    std::vector<SampleState> samples;
};

// Forest training parallelized per tree; per-tree seeded streams keep the
// result independent of scheduling.
FeatureForest train_forest_parallel(const std::vector<FeatureSample>& samples,
                                    const std::vector<Eigen::VectorXd>& targets,
                                    const Eigen::VectorXd& mean_visibility,
                                    const ForestTrainConfig& config) {
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

    TreeTrainConfig tc;
    tc.depth = config.depth;
    tc.candidates = config.candidates;
    tc.radius = config.radius;
    tc.threshold_quantiles = config.threshold_quantiles;

    forest.trees.resize(forest.tree_landmarks.size());
    parallel_for(static_cast<int>(forest.trees.size()), [&](int t) {
        std::seed_seq seq{config.seed, static_cast<std::uint64_t>(t)};
        Rng rng(seq);
        forest.trees[t] = train_tree(samples, targets, variance, forest.tree_landmarks[t], tc, rng);
    });

    int offset = 0;
    forest.leaf_offsets.resize(forest.trees.size());
    for (size_t t = 0; t < forest.trees.size(); ++t) {
        forest.leaf_offsets[t] = offset;
        offset += forest.trees[t].leaf_count;
    }
    forest.descriptor_dim = offset;
    return forest;
}

}  // namespace

BcrModel train_bcr(const std::vector<TrainInstance>& dataset, const BcrConfig& config) {
    if (dataset.empty()) throw EmptyInputError("train_bcr: empty dataset");
    const int nl = landmark_count(dataset[0].gt_shape);
    for (const auto& inst : dataset)
        if (landmark_count(inst.gt_shape) != nl || inst.gt_visibility.size() != nl ||
            landmark_count(inst.init_shape) != nl || inst.image == nullptr)
            throw DimensionMismatchError("train_bcr: inconsistent dataset entry");

    BcrModel model;
    model.levels = config.levels;
    model.landmarks = nl;
    model.target_mode = config.target_mode;
    model.visibility_threshold = config.visibility_threshold;
    model.branching = config.branching;

    const bool raw = config.target_mode == TargetMode::kRawLandmarks;

    PendingNode root;
    root.node_index = 0;
    root.level = 0;
    for (int i = 0; i < static_cast<int>(dataset.size()); ++i)
        root.samples.push_back({i, dataset[i].init_shape, all_visible(nl)});

    std::vector<PendingNode> frontier{std::move(root)};
    model.nodes.emplace_back();

    while (!frontier.empty()) {
        std::vector<PendingNode> next_frontier;
        for (PendingNode& pending : frontier) {
            const int n = static_cast<int>(pending.samples.size());
            if (n < config.min_node_population)
                throw UnderPopulatedNodeError(
                    "train_bcr: node at level " + std::to_string(pending.level) + " has " +
                    std::to_string(n) + " samples, minimum is " +
                    std::to_string(config.min_node_population));

            BcrNode& node = model.nodes[pending.node_index];
            node.level = pending.level;
            node.raw_targets = raw;

            // Per-node SPDM from this subset's ground truths.
            std::vector<Shape> gts(n);
            std::vector<Visibility> gt_masks(n);
            for (int i = 0; i < n; ++i) {
                gts[i] = dataset[pending.samples[i].index].gt_shape;
                gt_masks[i] = dataset[pending.samples[i].index].gt_visibility;
            }
            const GpaResult gpa = generalized_procrustes(gts, gt_masks);
            node.spdm = build_spdm(gpa.aligned, gt_masks, config.energy_fraction);

            // Ideal updates in the node's parameter space, using each
            // estimate's own normalizing transform so pose error is visible
            // to the regressor.
            std::vector<FeatureSample> fsamples(n);
            std::vector<Eigen::VectorXd> ideal(n);
            std::vector<NormalizedState> states(n);
            std::vector<Eigen::VectorXd> q_prev(n);
            for (int i = 0; i < n; ++i) {
                const SampleState& st = pending.samples[i];
                const TrainInstance& inst = dataset[st.index];
                states[i] = normalize_to_node(node.spdm, st.shape, st.visibility,
                                              config.visibility_threshold);
                fsamples[i] = {inst.image, st.shape, states[i].to_mean};
                const Shape gt_norm = states[i].to_mean.apply(inst.gt_shape);
                if (raw) {
                    ideal[i] = gt_norm - states[i].s_norm;
                } else {
                    q_prev[i] = params_from_shape(node.spdm, states[i].s_norm, st.visibility);
                    ideal[i] =
                        params_from_shape(node.spdm, gt_norm, inst.gt_visibility) - q_prev[i];
                }
            }

            Eigen::VectorXd mean_vis = Eigen::VectorXd::Zero(nl);
            for (const auto& m : gt_masks) mean_vis += m;
            mean_vis /= n;

            ForestTrainConfig fc;
            fc.total_trees = config.total_trees;
            fc.depth = config.tree_depth;
            fc.candidates = config.candidates;
            fc.radius = config.radius_for_level(pending.level);
            fc.threshold_quantiles = config.threshold_quantiles;
            fc.seed = config.seed * 1000003ull + static_cast<std::uint64_t>(pending.node_index);
            node.forest = train_forest_parallel(fsamples, ideal, mean_vis, fc);

            std::vector<FeatureVec> descriptors(n);
            std::vector<BinaryDescriptor> raw_descriptors(n);
            parallel_for(n, [&](int i) {
                raw_descriptors[i] = extract_descriptor(node.forest, *fsamples[i].image,
                                                        fsamples[i].shape, fsamples[i].to_mean);
            });
            for (int i = 0; i < n; ++i) descriptors[i] = raw_descriptors[i].as_feature();

            node.regressor = ridge_fit(descriptors, ideal, config.lambda);

            // Apply the update to every training sample.
            for (int i = 0; i < n; ++i) {
                SampleState& st = pending.samples[i];
                const Eigen::VectorXd delta = node.regressor.predict(descriptors[i]);
                if (raw) {
                    st.shape = states[i].to_mean.inverse().apply(Shape(states[i].s_norm + delta));
                } else {
                    const ShapeAndVisibility sv =
                        shape_from_params(node.spdm, Eigen::VectorXd(q_prev[i] + delta));
                    st.shape = states[i].to_mean.inverse().apply(sv.shape);
                    st.visibility = sv.visibility;
                }
            }

            const bool last_level = pending.level + 1 >= config.levels;
            if (last_level) continue;

            if (!config.branching) {
                PendingNode child;
                child.node_index = static_cast<int>(model.nodes.size());
                model.nodes.emplace_back();  // invalidates `node`
                model.nodes[pending.node_index].left = child.node_index;
                model.nodes[pending.node_index].right = child.node_index;
                child.level = pending.level + 1;
                child.samples = std::move(pending.samples);
                next_frontier.push_back(std::move(child));
                continue;
            }

            // Partition on the ideal updates recomputed against the
            // post-update estimates.
            std::vector<Eigen::VectorXd> new_ideal(n);
            for (int i = 0; i < n; ++i) {
                const SampleState& st = pending.samples[i];
                const TrainInstance& inst = dataset[st.index];
                const NormalizedState ns = normalize_to_node(node.spdm, st.shape, st.visibility,
                                                             config.visibility_threshold);
                const Shape gt_norm = ns.to_mean.apply(inst.gt_shape);
                if (raw)
                    new_ideal[i] = gt_norm - ns.s_norm;
                else
                    new_ideal[i] = params_from_shape(node.spdm, gt_norm, inst.gt_visibility) -
                                   params_from_shape(node.spdm, ns.s_norm, st.visibility);
            }
            const Partition partition = partition_training(new_ideal);
            node.gate = svm_fit(descriptors, partition.labels, config.svm_cost);

            std::vector<double> decisions(n);
            for (int i = 0; i < n; ++i) decisions[i] = node.gate->decision(descriptors[i]);
            auto [left_idx, right_idx] = overlap_split(partition.labels, decisions);

            PendingNode left_child, right_child;
            left_child.node_index = static_cast<int>(model.nodes.size());
            model.nodes.emplace_back();
            right_child.node_index = static_cast<int>(model.nodes.size());
            model.nodes.emplace_back();
            model.nodes[pending.node_index].left = left_child.node_index;
            model.nodes[pending.node_index].right = right_child.node_index;
            left_child.level = right_child.level = pending.level + 1;
            for (int i : left_idx) left_child.samples.push_back(pending.samples[i]);
            for (int i : right_idx) right_child.samples.push_back(pending.samples[i]);
            next_frontier.push_back(std::move(left_child));
            next_frontier.push_back(std::move(right_child));
        }
        frontier = std::move(next_frontier);
    }
    return model;
}

AlignmentResult fit(const BcrModel& model, const ImageSample& image, const Shape& init,
                    bool trace) {
    if (model.nodes.empty()) throw Error("fit: untrained model");
    if (landmark_count(init) != model.landmarks)
        throw DimensionMismatchError("fit: init landmark count mismatch");

    AlignmentResult result;
    Shape s = init;
    Visibility v = all_visible(model.landmarks);
    int node_index = 0;
    for (int level = 0; level < model.levels; ++level) {
        const BcrNode& node = model.nodes[node_index];
        NodeUpdateResult update = node_update(node, image, s, v);
        s = std::move(update.shape);
        v = std::move(update.visibility);
        if (trace) result.level_shapes.push_back(s);
        if (level + 1 < model.levels) {
            if (node.gate) {
                const BranchDecision d = branch_decision(node, update.descriptor);
                result.path.push_back(d.go_left);
                node_index = d.go_left ? node.left : node.right;
            } else {
                result.path.push_back(false);
                node_index = node.left;
            }
        }
    }
    result.shape = std::move(s);
    result.visibility_continuous = v;
    result.visibility = binarize_visibility(v, model.visibility_threshold);
    return result;
}

Box shape_bounding_box(const Shape& s) {
    const int nl = landmark_count(s);
    double minx = s[0], maxx = s[0], miny = s[nl], maxy = s[nl];
    for (int i = 0; i < nl; ++i) {
        minx = std::min(minx, s[i]);
        maxx = std::max(maxx, s[i]);
        miny = std::min(miny, s[nl + i]);
        maxy = std::max(maxy, s[nl + i]);
    }
    return {minx, miny, maxx - minx, maxy - miny};
}

Shape shape_to_box(const Shape& shape, const Box& box) {
    if (box.w <= 0 || box.h <= 0) throw Error("init_from_box: non-positive box dimensions");
    const Box own = shape_bounding_box(shape);
    if (own.w <= 0 || own.h <= 0) throw Error("init_from_box: degenerate mean shape box");
    const int nl = landmark_count(shape);
    Shape out(shape.size());
    for (int i = 0; i < nl; ++i) {
        out[i] = box.x + (shape[i] - own.x) * box.w / own.w;
        out[nl + i] = box.y + (shape[nl + i] - own.y) * box.h / own.h;
    }
    return out;
}

Shape init_from_box(const BcrModel& model, const Box& box) {
    if (model.nodes.empty()) throw Error("init_from_box: untrained model");
    return shape_to_box(model.nodes[0].spdm.mean_shape, box);
}

std::vector<TrainInstance> make_training_instances(const std::vector<DatasetSample>& samples,
                                                   const Shape& mean_shape, int augment,
                                                   std::uint64_t seed) {
    if (augment < 1) throw Error("make_training_instances: augment must be >= 1");
    std::seed_seq seq{seed, static_cast<std::uint64_t>(0xa09)};
    Rng rng(seq);
    std::uniform_real_distribution<double> scale_jitter(0.95, 1.05);
    std::uniform_real_distribution<double> shift_jitter(-0.05, 0.05);
    std::uniform_real_distribution<double> rot_jitter(-10.0 * 3.14159265358979 / 180.0,
                                                      10.0 * 3.14159265358979 / 180.0);
    std::vector<TrainInstance> out;
    out.reserve(samples.size() * augment);
    for (const DatasetSample& sample : samples) {
        const Shape base = shape_to_box(mean_shape, sample.box);
        const Eigen::Vector2d center(sample.box.x + sample.box.w / 2,
                                     sample.box.y + sample.box.h / 2);
        for (int j = 0; j < augment; ++j) {
            SimilarityTransform t;
            t.scale = scale_jitter(rng);
            t.rotation = rot_jitter(rng);
            t.translation = center - t.apply_vector(center) +
                            Eigen::Vector2d(shift_jitter(rng) * sample.box.w,
                                            shift_jitter(rng) * sample.box.h);
            TrainInstance inst;
            inst.image = sample.image;
            inst.gt_shape = sample.gt_shape;
            inst.gt_visibility = sample.gt_visibility;
            inst.init_shape = t.apply(base);
            out.push_back(std::move(inst));
        }
    }
    return out;
}

}  // namespace bcr
