#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fixpoint/dataset.hpp"
#include "fixpoint/model.hpp"

namespace fixpoint {

/// Which prior built the saliency maps an AUC number was computed on.
enum class SaliencyConvention { UniformPrior, NonparametricPrior };
std::string to_string(SaliencyConvention convention);

/// model - baseline, in bits/fixation. Both must cover the same fixations.
double information_gain(const LogLikelihood& model, const LogLikelihood& baseline);

/// (model - baseline) / (gold - baseline). Throws when gold <= baseline.
double information_gain_explained(const LogLikelihood& model, const LogLikelihood& baseline,
                                  const LogLikelihood& gold);
double information_gain_explained(double model_bits, double baseline_bits, double gold_bits);

/// Mann-Whitney AUC by sorting and ranking; ties count one half.
double auc_from_scores(std::span<const double> positives, std::span<const double> negatives);

/// Where AUC nonfixations come from.
struct NonfixationSampler {
    enum class Kind { AllCells, Explicit };
    Kind kind = Kind::AllCells;
    std::vector<Cell> cells;

    static NonfixationSampler all_cells() { return {}; }
    static NonfixationSampler explicit_cells(std::vector<Cell> c) {
        return {Kind::Explicit, std::move(c)};
    }
};

struct AucResult {
    double value = 0.5;
    SaliencyConvention convention = SaliencyConvention::NonparametricPrior;
};

AucResult auc(const Map2d& saliency, std::span<const Cell> fixations, const NonfixationSampler& nonfixations,
              SaliencyConvention convention);

/// Per-image AUC with the other images' fixations (mapped through normalized
/// coordinates, with multiplicity) as nonfixations; unweighted mean over images
/// that have fixations. `maps` is indexed like dataset.images(); empty maps are skipped.
double shuffled_auc(std::span<const Map2d> maps, const FixationDataset& dataset);

/// Per-image shuffled AUCs, NaN where an image has no fixations or no map.
std::vector<double> shuffled_auc_per_image(std::span<const Map2d> maps, const FixationDataset& dataset);

struct ImageEval {
    std::string image_id;
    std::size_t fixations = 0;
    double model_bits = 0.0;
    double baseline_bits = 0.0;
    double gold_bits = 0.0;
    double auc = 0.0;
    double sauc = 0.0;
};

struct EvalReport {
    std::vector<ImageEval> images;
    double model_bits = 0.0;
    double baseline_bits = 0.0;
    double gold_bits = 0.0;
    double information_gain = 0.0;
    double information_gain_explained = 0.0;
    bool explained_defined = false;
    double auc = 0.0;
    double sauc = 0.0;
    SaliencyConvention auc_convention = SaliencyConvention::NonparametricPrior;
    SaliencyConvention sauc_convention = SaliencyConvention::UniformPrior;
    std::string aggregation = "fixation-pooled log-likelihood; unweighted image mean for AUC";
};

void write_report_csv(const EvalReport& report, const std::filesystem::path& path);
std::string report_summary(const EvalReport& report);

}  // namespace fixpoint
