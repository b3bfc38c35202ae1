#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "fixpoint/dataset.hpp"
#include "fixpoint/densities.hpp"
#include "fixpoint/experiments.hpp"
#include "fixpoint/featstack.hpp"
#include "fixpoint/metrics.hpp"
#include "fixpoint/model.hpp"
#include "fixpoint/model_io.hpp"
#include "fixpoint/training.hpp"

namespace fs = std::filesystem;
using namespace fixpoint;

namespace {

std::vector<FeatureStack> stacks_in(const fs::path& dir, const FixationDataset& dataset) {
    std::vector<FeatureStack> out;
    for (auto& s : read_stack_dir(dir)) {
        if (dataset.find_image(s.image_id)) out.push_back(std::move(s));
    }
    if (out.empty()) throw Error("no stack in " + dir.string() + " matches an image of the fixation file");
    return out;
}

std::vector<Cell> grids_for(const FixationDataset& dataset, std::span<const FeatureStack> stacks) {
    std::vector<Cell> grids(dataset.images().size(), Cell{1, 1});
    for (const auto& s : stacks) grids[dataset.image_index(s.image_id)] = {s.width, s.height};
    return grids;
}

SplitPolicy parse_policy(const std::string& name, int width, int height, std::uint64_t seed) {
    if (name == "by-size") return SplitPolicy::by_size(width, height);
    if (name == "random-half") return SplitPolicy::random_half(seed);
    throw Error("unknown split policy '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fixation density models over feature stacks"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Fit a model on every stack that has fixations");
    std::string t_stacks, t_fix, t_out, t_trace;
    double t_lambda = 0.001;
    int t_iters = 500, t_batches = 1, t_bins = 32;
    double t_smoothing = 0.1;
    std::uint64_t t_seed = 0;
    train->add_option("--stacks", t_stacks, "Directory of .fstk files")->required();
    train->add_option("--fixations", t_fix, "Fixation CSV")->required();
    train->add_option("--out", t_out, "Model file to write")->required();
    train->add_option("--trace", t_trace, "Optimizer trace CSV");
    train->add_option("--lambda", t_lambda, "Sparsity regularization strength")->capture_default_str();
    train->add_option("--max-iterations", t_iters)->capture_default_str();
    train->add_option("--minibatches", t_batches)->capture_default_str();
    train->add_option("--bins", t_bins, "Histogram prior bins")->capture_default_str();
    train->add_option("--smoothing", t_smoothing, "Histogram prior smoothing")->capture_default_str();
    train->add_option("--seed", t_seed)->capture_default_str();

    // predict
    auto* pred = app.add_subcommand("predict", "Write the predicted density of one stack");
    std::string p_model, p_stack, p_fix, p_out;
    bool p_uniform = false;
    pred->add_option("--model", p_model)->required();
    pred->add_option("--stack", p_stack, ".fstk file")->required();
    pred->add_option("--out", p_out, "Density .fstk to write")->required();
    pred->add_option("--fixations", p_fix, "Fixation CSV for the histogram center prior");
    pred->add_flag("--uniform-prior", p_uniform, "Drop the center prior");

    // eval
    auto* eval = app.add_subcommand("eval", "Score a model on the images of a fixation file");
    std::string e_model, e_stacks, e_fix, e_prior_fix, e_csv;
    double e_bandwidth = 0.0;
    eval->add_option("--model", e_model)->required();
    eval->add_option("--stacks", e_stacks)->required();
    eval->add_option("--fixations", e_fix, "Evaluation fixations")->required();
    eval->add_option("--prior-fixations", e_prior_fix, "Fixations for the baseline prior (default: --fixations)");
    eval->add_option("--gold-bandwidth", e_bandwidth, "Gold-standard bandwidth in cells (default: selected)");
    eval->add_option("--csv", e_csv, "Per-image report CSV");

    // prior
    auto* prior = app.add_subcommand("prior", "Fit and render an image-independent prior");
    std::string pr_fix, pr_out, pr_kind = "histogram", pr_exclude;
    int pr_w = 32, pr_h = 32, pr_bins = 32;
    double pr_smoothing = 0.1, pr_bw = 5.0;
    prior->add_option("--fixations", pr_fix)->required();
    prior->add_option("--out", pr_out)->required();
    prior->add_option("--kind", pr_kind)->check(CLI::IsMember({"histogram", "kde"}))->capture_default_str();
    prior->add_option("--width", pr_w)->capture_default_str();
    prior->add_option("--height", pr_h)->capture_default_str();
    prior->add_option("--bins", pr_bins)->capture_default_str();
    prior->add_option("--smoothing", pr_smoothing)->capture_default_str();
    prior->add_option("--bandwidth", pr_bw, "KDE bandwidth in the 100x100 frame")->capture_default_str();
    prior->add_option("--exclude", pr_exclude, "Image id left out of the histogram");

    // gold
    auto* gold = app.add_subcommand("gold", "Gold-standard density of one image without one subject");
    std::string g_fix, g_image, g_out;
    int g_subject = 0, g_w = 32, g_h = 32;
    double g_bw = 2.0;
    gold->add_option("--fixations", g_fix)->required();
    gold->add_option("--image", g_image)->required();
    gold->add_option("--subject", g_subject, "Held-out subject")->required();
    gold->add_option("--out", g_out)->required();
    gold->add_option("--width", g_w)->capture_default_str();
    gold->add_option("--height", g_h)->capture_default_str();
    gold->add_option("--bandwidth", g_bw, "Bandwidth in grid cells")->capture_default_str();

    // split
    auto* split = app.add_subcommand("split", "Print a train/test image split");
    std::string s_fix, s_policy = "by-size";
    int s_w = 1024, s_h = 768;
    std::uint64_t s_seed = 0;
    split->add_option("--fixations", s_fix)->required();
    split->add_option("--policy", s_policy)->check(CLI::IsMember({"by-size", "random-half"}))->capture_default_str();
    split->add_option("--width", s_w)->capture_default_str();
    split->add_option("--height", s_h)->capture_default_str();
    split->add_option("--seed", s_seed)->capture_default_str();

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run a cross-validation plan");
    std::string x_plan, x_stacks, x_fix, x_out;
    exp->add_option("--plan", x_plan)->required();
    exp->add_option("--stacks", x_stacks)->required();
    exp->add_option("--fixations", x_fix)->required();
    exp->add_option("--out", x_out, "Run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const auto dataset = read_fixations_csv(t_fix);
            const auto stacks = stacks_in(t_stacks, dataset);
            TrainingSetup setup;
            setup.lambda = t_lambda;
            setup.optimizer.max_iterations = t_iters;
            setup.optimizer.minibatch_count = static_cast<std::size_t>(t_batches);
            setup.optimizer.seed = t_seed;
            setup.histogram = {t_bins, t_smoothing};
            setup.split_description = std::to_string(stacks.size()) + " images from " + t_fix;
            const auto trained = train_model(stacks, dataset, setup);
            write_model(trained.model, t_out);
            if (!t_trace.empty()) write_trace_csv(trained.trace, t_trace);
            const auto& rows = trained.trace.rows;
            std::printf("iterations %d  converged %s  cost %.6f\n", trained.trace.iterations,
                        trained.trace.converged ? "yes" : "no", rows.empty() ? 0.0 : rows.back().total);
            if (trained.trace.line_search_failed) std::fprintf(stderr, "warning: line search failed\n");
        } else if (*pred) {
            const auto model = read_model(p_model);
            const auto stack = read_stack(p_stack);
            DensityMap prior_map = DensityMap::uniform(stack.height, stack.width);
            if (!p_uniform) {
                if (p_fix.empty()) throw Error("predict: --fixations is required unless --uniform-prior is given");
                const auto ds = read_fixations_csv(p_fix);
                std::optional<std::string> exclude;
                if (ds.find_image(stack.image_id)) exclude = stack.image_id;
                prior_map = render_prior(fit_histogram_prior(ds, 32, 0.1, exclude), stack.height, stack.width);
            }
            write_density(predict(model, stack, prior_map),
                          std::string("model ") + p_model + (p_uniform ? " uniform prior" : " histogram prior"), p_out);
        } else if (*eval) {
            const auto model = read_model(e_model);
            const auto dataset = read_fixations_csv(e_fix);
            const auto prior_ds = e_prior_fix.empty() ? dataset : read_fixations_csv(e_prior_fix);
            const auto stacks = stacks_in(e_stacks, dataset);
            const auto grids = grids_for(dataset, stacks);
            double bw = e_bandwidth;
            if (bw <= 0.0) bw = select_bandwidth(dataset, grids, default_gold_bandwidths());
            std::vector<std::size_t> images;
            std::vector<DensityMap> with_prior, uniform, baseline;
            for (const auto& s : stacks) {
                const auto id = s.image_id;
                images.push_back(dataset.image_index(id));
                std::optional<std::string> exclude;
                if (prior_ds.find_image(id)) exclude = id;
                baseline.push_back(render_prior(fit_histogram_prior(prior_ds, 32, 0.1, exclude), s.height, s.width));
                with_prior.push_back(predict(model, s, baseline.back()));
                uniform.push_back(predict(model, s, DensityMap::uniform(s.height, s.width)));
            }
            const auto report = evaluate_images(dataset, images, with_prior, uniform, baseline, bw);
            if (!e_csv.empty()) write_report_csv(report, e_csv);
            std::cout << report_summary(report);
            std::printf("%-26s %-26s\n", "AUC (nonparametric prior)", "sAUC (uniform prior)");
            std::printf("%-26.4f %-26.4f\n", report.auc, report.sauc);
        } else if (*prior) {
            const auto ds = read_fixations_csv(pr_fix);
            if (pr_kind == "histogram") {
                std::optional<std::string> exclude;
                if (!pr_exclude.empty()) exclude = pr_exclude;
                const auto h = fit_histogram_prior(ds, pr_bins, pr_smoothing, exclude);
                write_density(render_prior(h, pr_h, pr_w),
                              "histogram bins=" + std::to_string(pr_bins) + " smoothing=" + std::to_string(pr_smoothing) +
                                  " exclude=" + (pr_exclude.empty() ? "none" : pr_exclude),
                              pr_out);
            } else {
                write_density(render_prior(fit_kde_prior(ds, pr_bw), pr_h, pr_w),
                              "kde bandwidth=" + std::to_string(pr_bw) + " frame=100x100", pr_out);
            }
        } else if (*gold) {
            const auto ds = read_fixations_csv(g_fix);
            write_density(fit_gold_standard(ds, g_image, g_subject, g_bw, g_h, g_w),
                          "gold image=" + g_image + " held_out_subject=" + std::to_string(g_subject) +
                              " bandwidth=" + std::to_string(g_bw),
                          g_out);
        } else if (*split) {
            const auto ds = read_fixations_csv(s_fix);
            const auto sp = make_split(ds, parse_policy(s_policy, s_w, s_h, s_seed));
            for (const auto& id : sp.train_images) std::cout << "train," << id << '\n';
            for (const auto& id : sp.test_images) std::cout << "test," << id << '\n';
            std::cerr << sp.train_images.size() << " train, " << sp.test_images.size() << " test\n";
        } else if (*exp) {
            PlanFile pf = read_plan(x_plan);
            const auto dataset = read_fixations_csv(x_fix);
            const auto stacks = stacks_in(x_stacks, dataset);
            pf.plan.split = make_split(dataset, pf.split_policy);
            if (pf.plan.groups.empty()) pf.plan.groups = groups_from_featgen(stacks.front().meta);
            std::vector<ExperimentResult> results;
            if (pf.experiment == "layers") {
                results = run_layer_subsets(pf.plan, stacks, dataset);
            } else if (pf.experiment == "sweep") {
                auto sweep = run_lambda_sweep(pf.plan, stacks, dataset);
                std::printf("selected lambda %g\n", sweep.selected_lambda);
                results.push_back(std::move(sweep.result));
            } else {
                results.push_back(run_cv_training(pf.plan, stacks, dataset));
            }
            write_run_directory(pf, results, x_out);
            for (const auto& r : results) {
                for (const auto& e : r.ensembles) {
                    std::printf("%-20s lambda %-8g held-out %.4f bits  test sAUC %.4f  test AUC %.4f\n",
                                e.filter.c_str(), e.lambda, e.mean_held_out_bits, e.test_images.sauc,
                                e.test_images.auc);
                }
            }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
