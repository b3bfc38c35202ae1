#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fixpoint/dataset.hpp"
#include "fixpoint/densities.hpp"
#include "fixpoint/featstack.hpp"
#include "fixpoint/metrics.hpp"
#include "fixpoint/model.hpp"
#include "fixpoint/optimizer.hpp"

namespace fixpoint {

struct Split {
    std::vector<std::string> train_images;
    std::vector<std::string> test_images;
    std::vector<int> train_subjects;
    std::vector<int> test_subjects;
};

struct SplitPolicy {
    enum class Kind { BySize, RandomHalf, Explicit };
    Kind kind = Kind::RandomHalf;
    int width = 1024;
    int height = 768;
    std::uint64_t seed = 0;
    std::vector<std::string> train_images;  // Explicit only

    static SplitPolicy by_size(int w, int h) { return {Kind::BySize, w, h, 0, {}}; }
    static SplitPolicy random_half(std::uint64_t seed) { return {Kind::RandomHalf, 0, 0, seed, {}}; }
    static SplitPolicy explicit_images(std::vector<std::string> ids) {
        return {Kind::Explicit, 0, 0, 0, std::move(ids)};
    }
};

/// Image split; every subject appears in both subject lists (subjects are held out by CV).
Split make_split(const FixationDataset& dataset, const SplitPolicy& policy);

struct GroupInfo {
    int depth = 0;
    std::string type;
};
using GroupTable = std::map<std::string, GroupInfo>;

/// Groups named `<type>_s<scale>` (as written by featgen): depth = rank of the scale.
GroupTable groups_from_featgen(std::span<const FeatureMeta> meta);

struct FeatureFilter {
    enum class Kind { All, FromDepthUp, UpToDepth, ExactlyDepth, ByType, Explicit };
    Kind kind = Kind::All;
    int depth = 0;
    std::string type;
    std::vector<std::string> names;

    std::string label() const;
};

/// Names of the non-degenerate features the filter keeps, in stack order. Throws on unknown
/// groups or when nothing is selected.
std::vector<std::string> select_feature_names(const FeatureFilter& filter, std::span<const FeatureMeta> meta,
                                              const GroupTable& groups);

inline const std::vector<double>& default_lambda_grid() {
    static const std::vector<double> grid = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
    return grid;
}

inline const std::vector<double>& default_gold_bandwidths() {
    static const std::vector<double> grid = {0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0};
    return grid;
}

struct ExperimentPlan {
    Split split;
    FeatureFilter filter;
    std::vector<double> lambda_grid = {1e-3};
    std::uint64_t seed = 0;
    OptimizerConfig optimizer;
    HistogramConfig histogram;
    std::vector<double> gold_bandwidths = default_gold_bandwidths();
    GroupTable groups;

    void validate() const;
};

/// One fitted fold: (filter, lambda, held-out subject).
struct CellResult {
    std::string filter;
    double lambda = 0.0;
    int held_out_subject = 0;
    SaliencyModel model;
    OptTrace trace;
    // Train images, the fold's own training subjects (bits/fixation).
    double train_subjects_bits = 0.0;
    double train_subjects_baseline_bits = 0.0;
    double train_subjects_gold_bits = 0.0;
    double train_subjects_explained = 0.0;
    // Train images, the held-out subject.
    double test_subject_bits = 0.0;
    double test_subject_baseline_bits = 0.0;
    double test_subject_gold_bits = 0.0;
    double test_subject_explained = 0.0;
    std::size_t test_subject_fixations = 0;
};

/// Subject-ensemble (density average over folds) for one (filter, lambda).
struct EnsembleResult {
    std::string filter;
    double lambda = 0.0;
    double train_images_sauc = 0.0;
    EvalReport test_images;
    /// Fixation-weighted mean of the folds' held-out-subject log-likelihoods.
    double mean_held_out_bits = 0.0;
};

struct ExperimentResult {
    std::vector<CellResult> cells;
    std::vector<EnsembleResult> ensembles;
    double gold_bandwidth = 0.0;
};

/// Leave-one-subject-out training over plan.split for every lambda in the grid.
ExperimentResult run_cv_training(const ExperimentPlan& plan, std::span<const FeatureStack> stacks,
                                 const FixationDataset& dataset);

/// The four layer-subset families: from-depth-up, up-to-depth and exactly-depth for each
/// depth, then by-type for each type.
std::vector<FeatureFilter> layer_subset_filters(const GroupTable& groups);
std::vector<ExperimentResult> run_layer_subsets(const ExperimentPlan& base, std::span<const FeatureStack> stacks,
                                                const FixationDataset& dataset);

struct LambdaSweep {
    ExperimentResult result;
    double selected_lambda = 0.0;
};

/// Picks the lambda with the best mean held-out-subject log-likelihood on train
/// images; ties go to the larger lambda.
double select_lambda(const ExperimentResult& result);
LambdaSweep run_lambda_sweep(const ExperimentPlan& plan, std::span<const FeatureStack> stacks,
                             const FixationDataset& dataset);

/// Mean of densities (not log densities).
DensityMap average_densities(std::span<const DensityMap> densities);

/// Scores per-image densities against the fixations on `images`. The model densities
/// with a center prior feed log-likelihood and AUC (all-cell nonfixations), the
/// uniform-prior ones feed shuffled AUC. The gold standard is leave-one-subject-out.
/// All spans are parallel to `images` (dataset indices).
EvalReport evaluate_images(const FixationDataset& dataset, std::span<const std::size_t> images,
                           std::span<const DensityMap> model_with_prior,
                           std::span<const DensityMap> model_uniform, std::span<const DensityMap> baseline,
                           double gold_bandwidth);

// Declarative plan files (JSON).
struct PlanFile {
    std::string experiment = "cv";  // cv | layers | sweep
    SplitPolicy split_policy;
    ExperimentPlan plan;
};
PlanFile read_plan(const std::filesystem::path& path);
void write_plan(const PlanFile& plan, const std::filesystem::path& path);

/// plan.json, models/<cell>.json, cells.csv, ensembles.csv, long.csv.
void write_run_directory(const PlanFile& plan, std::span<const ExperimentResult> results,
                         const std::filesystem::path& dir);

}  // namespace fixpoint
