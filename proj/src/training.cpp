#include "fixpoint/training.hpp"

#include <cmath>
#include <random>
#include <set>

namespace fixpoint {

std::vector<double> initialize_params(std::size_t features, int grid_width, std::uint64_t seed) {
    if (features < 1) throw Error("initialize_params: need at least one feature");
    if (grid_width < 1) throw Error("initialize_params: zero grid width");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.01);
    std::vector<double> params(parameter_count(features));
    for (std::size_t k = 0; k < features; ++k) params[k] = normal(rng);
    params[features] = std::log(static_cast<double>(grid_width) / 32.0);
    params[features + 1] = 1.0;
    return params;
}

TrainedModel train_model(std::span<const FeatureStack> stacks, const FixationDataset& dataset,
                         const TrainingSetup& setup) {
    if (stacks.empty()) throw Error("train_model: no training stacks");
    if (setup.center_log_densities && setup.center_log_densities->size() != stacks.size()) {
        throw Error("train_model: one center prior per stack required");
    }
    const NormalizationStats stats = compute_norm_stats(stacks);

    std::set<std::size_t> train_images;
    for (const auto& s : stacks) train_images.insert(dataset.image_index(s.image_id));
    const FixationDataset train_fixations =
        dataset.filtered([&](const Fixation& f) { return train_images.count(f.image) > 0; });
    if (train_fixations.fixations().empty()) throw Error("train_model: no fixations on the training images");

    std::vector<TrainingImage> images;
    images.reserve(stacks.size());
    for (std::size_t i = 0; i < stacks.size(); ++i) {
        const auto& raw = stacks[i];
        TrainingImage img;
        img.image_id = raw.image_id;
        img.stack = normalize(raw, stats);
        const std::size_t idx = dataset.image_index(raw.image_id);
        const auto& info = dataset.image(idx);
        for (const auto& f : train_fixations.fixations()) {
            if (f.image == idx) img.fixations.push_back(fixation_cell(f, info, raw.height, raw.width));
        }
        if (setup.center_log_densities) {
            img.center_log_density = (*setup.center_log_densities)[i];
        } else {
            const auto prior = fit_histogram_prior(train_fixations, setup.histogram.bins, setup.histogram.smoothing,
                                                   raw.image_id);
            img.center_log_density = render_prior(prior, raw.height, raw.width).log_grid();
        }
        images.push_back(std::move(img));
    }

    const FeatureStack& reference = images.front().stack;
    std::vector<bool> pinned = degenerate_mask(reference);
    const std::size_t K = reference.size();
    const int grid_width = reference.width;
    std::vector<FeatureMeta> meta = reference.meta;

    const TrainingObjective cost(std::move(images), setup.lambda,
                                 static_cast<std::size_t>(setup.optimizer.minibatch_count), pinned);
    std::vector<double> init = initialize_params(K, grid_width, setup.optimizer.seed);
    for (std::size_t k = 0; k < K; ++k) {
        if (pinned[k]) init[k] = 0.0;
    }
    const ModelObjective objective(cost);
    OptResult fit = minimize(objective, std::move(init), setup.optimizer);

    TrainedModel out;
    out.model.weights.assign(fit.params.begin(), fit.params.begin() + static_cast<std::ptrdiff_t>(K));
    out.model.blur_sigma = std::exp(fit.params[K]);
    out.model.center_weight = fit.params[K + 1];
    out.model.stats = stats;
    out.model.feature_meta = std::move(meta);
    out.model.lambda = setup.lambda;
    out.model.epsilon = kL1Epsilon;
    out.model.training_split = setup.split_description;
    out.trace = std::move(fit.trace);
    return out;
}

}  // namespace fixpoint
