#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <map>

#include "bcr/bcr.hpp"
#include "bcr/io.hpp"
#include "bcr/synth.hpp"

namespace fs = std::filesystem;

namespace {

bcr::Box parse_box_flag(const std::string& text) {
    bcr::Box box;
    char c1, c2, c3;
    std::istringstream bs(text);
    if (!(bs >> box.x >> c1 >> box.y >> c2 >> box.w >> c3 >> box.h) || c1 != ',' || c2 != ',' ||
        c3 != ',')
        throw bcr::ParseError("malformed box '" + text + "', expected x,y,w,h");
    return box;
}

int run_train(const std::string& manifest_path, const std::string& out_path, int trees,
              int tree_depth, int levels, int candidates, double lambda, double energy,
              int augment, const std::string& target_mode, std::uint64_t seed, double svm_cost,
              bool no_branching, int min_node) {
    const bcr::Manifest manifest = bcr::load_manifest(manifest_path);
    const bcr::LoadReport report = bcr::load_dataset(manifest);
    for (const std::string& reason : report.skipped)
        std::cerr << "skipped: " << reason << "\n";
    if (report.samples.empty()) {
        std::cerr << "error: no loadable samples in manifest\n";
        return 1;
    }

    std::vector<bcr::ImageSample> images;
    images.reserve(report.samples.size());
    std::vector<bcr::DatasetSample> samples;
    std::vector<bcr::Shape> gts;
    std::vector<bcr::Visibility> masks;
    for (const auto& s : report.samples) {
        images.push_back(bcr::load_pgm(s.image_path));
        gts.push_back(s.gt_shape);
        masks.push_back(s.gt_visibility);
    }
    for (size_t i = 0; i < report.samples.size(); ++i) {
        bcr::DatasetSample d;
        d.image = &images[i];
        d.gt_shape = report.samples[i].gt_shape;
        d.gt_visibility = report.samples[i].gt_visibility;
        d.box = report.samples[i].box ? *report.samples[i].box
                                      : bcr::shape_bounding_box(report.samples[i].gt_shape);
        samples.push_back(std::move(d));
    }

    const bcr::GpaResult gpa = bcr::generalized_procrustes(gts, masks);
    const auto instances = bcr::make_training_instances(samples, gpa.mean, augment, seed);

    bcr::BcrConfig config;
    config.levels = levels;
    config.total_trees = trees;
    config.tree_depth = tree_depth;
    config.candidates = candidates;
    config.lambda = lambda;
    config.svm_cost = svm_cost;
    config.energy_fraction = energy;
    config.target_mode =
        target_mode == "raw" ? bcr::TargetMode::kRawLandmarks : bcr::TargetMode::kSpdmParams;
    config.branching = !no_branching;
    config.min_node_population = min_node;
    config.seed = seed;

    const bcr::BcrModel model = bcr::train_bcr(instances, config);
    bcr::save_model(model, out_path);
    std::cout << "trained " << model.nodes.size() << " nodes on " << instances.size()
              << " instances (" << report.samples.size() << " images, "
              << report.skipped.size() << " skipped); model written to " << out_path << "\n";
    return 0;
}

int run_fit(const std::string& model_path, const std::string& image_path,
            const std::string& box_text, const std::string& init_path,
            const std::string& out_path, const std::string& vis_out, bool trace) {
    const bcr::BcrModel model = bcr::load_model(model_path);
    const bcr::ImageSample image = bcr::load_pgm(image_path);

    bcr::Shape init;
    if (!init_path.empty())
        init = bcr::load_pts(init_path);
    else
        init = bcr::init_from_box(model, parse_box_flag(box_text));

    const bcr::AlignmentResult result = bcr::fit(model, image, init, trace);
    bcr::save_pts(result.shape, out_path);
    if (!vis_out.empty()) bcr::save_visibility(result.visibility, vis_out);
    if (trace) {
        std::cout << "path:";
        for (bool left : result.path) std::cout << (left ? " L" : " R");
        std::cout << "\n";
        for (size_t l = 0; l < result.level_shapes.size(); ++l) {
            const bcr::Box b = bcr::shape_bounding_box(result.level_shapes[l]);
            std::cout << "level " << l + 1 << ": bbox " << b.x << "," << b.y << "," << b.w << ","
                      << b.h << "\n";
        }
    }
    return 0;
}

int run_eval(const std::string& pred_dir, const std::string& gt_dir,
             const std::string& normalization, const std::string& roles_path,
             const std::string& ced_out, const std::string& svg_out) {
    const bcr::RoleMap roles = bcr::load_roles(roles_path);
    const bcr::ErrorNormalization norm = normalization == "eye-mouth"
                                             ? bcr::ErrorNormalization::kEyeMouth
                                             : bcr::ErrorNormalization::kInterocular;

    std::vector<double> errors;
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(pred_dir))
        if (entry.path().extension() == ".pts") names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) {
        std::cerr << "error: no .pts files in " << pred_dir << "\n";
        return 1;
    }
    int skipped = 0;
    for (const std::string& name : names) {
        const fs::path gt_pts = fs::path(gt_dir) / name;
        try {
            const bcr::Shape pred = bcr::load_pts((fs::path(pred_dir) / name).string());
            const bcr::Shape gt = bcr::load_pts(gt_pts.string());
            fs::path vis_path = gt_pts;
            vis_path.replace_extension(".vis");
            const bcr::Visibility gt_vis = fs::exists(vis_path)
                                               ? bcr::load_visibility(vis_path.string())
                                               : bcr::all_visible(bcr::landmark_count(gt));
            errors.push_back(bcr::normalized_error(pred, gt, gt_vis, norm, roles));
        } catch (const std::exception& e) {
            std::cerr << "skipped " << name << ": " << e.what() << "\n";
            ++skipped;
        }
    }
    if (errors.empty()) {
        std::cerr << "error: no evaluable prediction/ground-truth pairs\n";
        return 1;
    }

    std::vector<double> thresholds;
    for (int i = 1; i <= 100; ++i) thresholds.push_back(0.005 * i);
    const auto curve = bcr::ced_curve(errors, thresholds);
    bcr::write_ced_csv(curve, ced_out);
    if (!svg_out.empty()) bcr::write_ced_svg(curve, svg_out);

    double mean = 0;
    for (double e : errors) mean += e;
    mean /= errors.size();
    std::cout << "evaluated " << errors.size() << " faces (" << skipped
              << " skipped), mean normalized error " << mean << "; CED written to " << ced_out
              << "\n";
    return 0;
}

int run_synth(const std::string& out_dir, int count, int landmarks, std::uint64_t seed,
              double noise) {
    bcr::SyntheticWorldConfig config;
    config.landmarks = landmarks;
    config.noise_sigma = noise;
    config.seed = seed;
    const bcr::SyntheticWorld world(config);
    const std::string manifest = bcr::synth_generate(world, count, out_dir);
    std::cout << "wrote " << count << " samples, manifest " << manifest << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Branching cascaded regression for landmark alignment"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Train a model from an annotated manifest");
    std::string manifest_path, train_out, target_mode = "spdm";
    int trees = 600, tree_depth = 6, levels = 4, candidates = 500, augment = 5, min_node = 20;
    double lambda = 1.0, energy = 0.98, svm_cost = 1.0;
    std::uint64_t seed = 0;
    bool no_branching = false;
    train->add_option("--manifest", manifest_path)->required();
    train->add_option("--out", train_out)->required();
    train->add_option("--trees", trees);
    train->add_option("--tree-depth", tree_depth);
    train->add_option("--levels", levels);
    train->add_option("--candidates", candidates);
    train->add_option("--lambda", lambda);
    train->add_option("--energy", energy);
    train->add_option("--augment", augment);
    train->add_option("--target-mode", target_mode)
        ->check(CLI::IsMember({"spdm", "raw"}));
    train->add_option("--seed", seed);
    train->add_option("--svm-cost", svm_cost);
    train->add_flag("--no-branching", no_branching, "Train a single-track cascade");
    train->add_option("--min-node", min_node, "Minimum training samples per node");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Align a single image");
    std::string model_path, image_path, box_text, init_path, fit_out, vis_out;
    bool trace = false;
    fit_cmd->add_option("--model", model_path)->required();
    fit_cmd->add_option("--image", image_path)->required();
    fit_cmd->add_option("--box", box_text, "Initialization box x,y,w,h");
    fit_cmd->add_option("--init", init_path, "Initialization .pts file");
    fit_cmd->add_option("--out", fit_out)->required();
    fit_cmd->add_option("--vis-out", vis_out);
    fit_cmd->add_flag("--trace", trace);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions and emit a CED curve");
    std::string pred_dir, gt_dir, normalization = "interocular", roles_path, ced_out, svg_out;
    eval_cmd->add_option("--pred-dir", pred_dir)->required();
    eval_cmd->add_option("--gt-dir", gt_dir)->required();
    eval_cmd->add_option("--normalization", normalization)
        ->check(CLI::IsMember({"interocular", "eye-mouth"}));
    eval_cmd->add_option("--roles", roles_path)->required();
    eval_cmd->add_option("--ced-out", ced_out)->required();
    eval_cmd->add_option("--svg", svg_out);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic annotated dataset");
    std::string synth_dir;
    int count = 100, landmarks = 12;
    std::uint64_t synth_seed = 0;
    double noise = 0.02;
    synth_cmd->add_option("--out-dir", synth_dir)->required();
    synth_cmd->add_option("--count", count)->required();
    synth_cmd->add_option("--landmarks", landmarks);
    synth_cmd->add_option("--seed", synth_seed);
    synth_cmd->add_option("--noise", noise);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (*train)
            return run_train(manifest_path, train_out, trees, tree_depth, levels, candidates,
                             lambda, energy, augment, target_mode, seed, svm_cost, no_branching,
                             min_node);
        if (*fit_cmd) {
            if (box_text.empty() == init_path.empty()) {
                std::cerr << "error: exactly one of --box or --init is required\n";
                return 2;
            }
            return run_fit(model_path, image_path, box_text, init_path, fit_out, vis_out, trace);
        }
        if (*eval_cmd)
            return run_eval(pred_dir, gt_dir, normalization, roles_path, ced_out, svg_out);
        if (*synth_cmd) return run_synth(synth_dir, count, landmarks, synth_seed, noise);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
