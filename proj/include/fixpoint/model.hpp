#pragma once

#include <span>
#include <string>
#include <vector>

#include "fixpoint/cost.hpp"
#include "fixpoint/dataset.hpp"
#include "fixpoint/density.hpp"
#include "fixpoint/featstack.hpp"

namespace fixpoint {

/// Smoothing constant of the l1 surrogate sqrt(w^2 + eps^2) - eps.
inline constexpr double kL1Epsilon = 1e-8;

/// Linear readout + Gaussian blur + center bias + softmax.
struct SaliencyModel {
    std::vector<double> weights;
    double blur_sigma = 1.0;
    double center_weight = 1.0;
    NormalizationStats stats;
    std::vector<FeatureMeta> feature_meta;
    double lambda = 0.0;
    double epsilon = kL1Epsilon;
    std::string training_split;

    std::vector<std::string> feature_names() const;
    /// Throws if sigma <= 0, a weight is non-finite, or a degenerate feature has weight != 0.
    void validate() const;
};

/// Number of trainable parameters for K features: (w_1..w_K, log sigma, alpha).
inline std::size_t parameter_count(std::size_t features) { return features + 2; }

/// blur(sum_k w_k r_k). The stack is expected to be normalized already.
Map2d saliency_map(const FeatureStack& stack, std::span<const double> weights, double sigma);

/// alpha * center_log_density + saliency.
Map2d combine_center_bias(const Map2d& saliency, const Map2d& center_log_density, double alpha);

/// Max-subtracted softmax over all cells.
DensityMap softmax_density(const Map2d& output);

/// Normalize with the model's stats, then saliency -> combine -> softmax.
/// `stack` holds raw responses and may carry extra features; the model's are picked by name.
DensityMap predict(const SaliencyModel& model, const FeatureStack& stack, const DensityMap& prior);

struct LogLikelihood {
    double nats = 0.0;
    std::size_t count = 0;
    double bits() const;
};

/// Mean log density at the fixations' cells. Throws on fixations outside the image.
LogLikelihood log_likelihood(const DensityMap& density, std::span<const Fixation> fixations,
                             const ImageInfo& image);
LogLikelihood log_likelihood(const SaliencyModel& model, const FeatureStack& stack,
                             const DensityMap& prior, std::span<const Fixation> fixations,
                             const ImageInfo& image);

/// ||w||_1 / ||w||_2 with |w_i| ~ sqrt(w_i^2 + eps^2) - eps and ||w||_2 ~ sqrt(|w|^2 + eps^2).
/// Writes d rho / d w into `gradient` when it is non-empty. rho(0) = 0.
double sparsity_ratio(std::span<const double> weights, std::span<double> gradient = {},
                      double epsilon = kL1Epsilon);

/// One image's contribution to the training objective.
struct TrainingImage {
    std::string image_id;
    FeatureStack stack;           // normalized
    Map2d center_log_density;     // log prior on the stack grid
    std::vector<Cell> fixations;  // grid cells of training fixations
};

/// Pooled negative log-likelihood over all images' fixations plus lambda * rho(w),
/// with the analytic gradient over (w, log sigma, alpha).
CostBreakdown cost_and_gradient(std::span<const double> params, std::span<const TrainingImage> images,
                                double lambda);

/// Marks degenerate features, whose weights the objective holds at zero.
std::vector<bool> degenerate_mask(const FeatureStack& stack);

/// The same cost split into contiguous batches of images (sorted by id). Batch costs
/// sum to the full cost: each carries its share of the NLL and lambda * rho / batches.
/// Gradient entries of `pinned` features are zero.
class TrainingObjective {
public:
    TrainingObjective(std::vector<TrainingImage> images, double lambda, std::size_t batches = 1,
                      std::vector<bool> pinned = {});

    std::size_t feature_count() const { return features_; }
    std::size_t fixation_count() const { return fixations_; }
    std::size_t batch_count() const { return ranges_.size(); }
    double lambda() const { return lambda_; }
    const std::vector<TrainingImage>& images() const { return images_; }
    const std::vector<bool>& pinned() const { return pinned_; }

    CostBreakdown evaluate(std::span<const double> params) const;
    CostBreakdown evaluate_batch(std::size_t batch, std::span<const double> params) const;

private:
    CostBreakdown evaluate_range(std::size_t begin, std::size_t end, std::span<const double> params,
                                 double reg_share) const;

    std::vector<TrainingImage> images_;
    double lambda_;
    std::vector<bool> pinned_;
    std::size_t features_ = 0;
    std::size_t fixations_ = 0;
    std::vector<std::pair<std::size_t, std::size_t>> ranges_;
};

}  // namespace fixpoint
