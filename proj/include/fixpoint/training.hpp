#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fixpoint/dataset.hpp"
#include "fixpoint/densities.hpp"
#include "fixpoint/featstack.hpp"
#include "fixpoint/model.hpp"
#include "fixpoint/optimizer.hpp"

namespace fixpoint {

/// w ~ N(0, 0.01^2) from `seed`, log sigma = log(grid_width / 32), alpha = 1.
std::vector<double> initialize_params(std::size_t features, int grid_width, std::uint64_t seed);

/// Wraps the model cost so the optimizer can drive it.
class ModelObjective : public Objective {
public:
    explicit ModelObjective(const TrainingObjective& cost) : cost_(cost) {}
    std::size_t batch_count() const override { return cost_.batch_count(); }
    CostBreakdown evaluate(std::span<const double> x) const override { return cost_.evaluate(x); }
    CostBreakdown evaluate_batch(std::size_t b, std::span<const double> x) const override {
        return cost_.evaluate_batch(b, x);
    }

private:
    const TrainingObjective& cost_;
};

struct TrainingSetup {
    double lambda = 0.001;
    OptimizerConfig optimizer;
    HistogramConfig histogram;
    std::string split_description;
    /// When set, these log densities replace the leave-one-image-out histogram prior.
    std::optional<std::vector<Map2d>> center_log_densities;
};

struct TrainedModel {
    SaliencyModel model;
    OptTrace trace;
};

/// Fits a model on `stacks` (raw, one per training image, any order) using the
/// fixations in `dataset` on those images. Normalization stats come from the same
/// stacks. Center priors default to a histogram fitted on all other training images.
TrainedModel train_model(std::span<const FeatureStack> stacks, const FixationDataset& dataset,
                         const TrainingSetup& setup);

}  // namespace fixpoint
