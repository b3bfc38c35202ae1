#include "fixpoint/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "fixpoint/blur.hpp"

namespace fixpoint {

// ---- DensityMap ----------------------------------------------------------

DensityMap DensityMap::from_log_weights(const Map2d& log_weights) {
    if (log_weights.empty()) throw Error("density: empty grid");
    double m = -std::numeric_limits<double>::infinity();
    for (double v : log_weights.values()) {
        if (!std::isfinite(v)) throw Error("density: non-finite log weight");
        m = std::max(m, v);
    }
    double sum = 0.0;
    for (double v : log_weights.values()) sum += std::exp(v - m);
    const double log_z = m + std::log(sum);

    DensityMap d;
    d.log_grid_ = Map2d(log_weights.height(), log_weights.width());
    d.grid_ = Map2d(log_weights.height(), log_weights.width());
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
        d.log_grid_[i] = log_weights[i] - log_z;
        d.grid_[i] = std::max(std::exp(d.log_grid_[i]), std::numeric_limits<double>::min());
    }
    return d;
}

DensityMap DensityMap::from_weights(const Map2d& weights) {
    if (weights.empty()) throw Error("density: empty grid");
    double sum = 0.0;
    for (double v : weights.values()) {
        if (!(v > 0.0) || !std::isfinite(v)) throw Error("density: weights must be positive and finite");
        sum += v;
    }
    DensityMap d;
    d.grid_ = Map2d(weights.height(), weights.width());
    d.log_grid_ = Map2d(weights.height(), weights.width());
    const double log_sum = std::log(sum);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        d.grid_[i] = weights[i] / sum;
        d.log_grid_[i] = std::log(weights[i]) - log_sum;
    }
    return d;
}

DensityMap DensityMap::uniform(int height, int width) {
    if (height < 1 || width < 1) throw Error("density: zero dimension");
    return from_log_weights(Map2d(height, width, 0.0));
}

double DensityMap::total() const {
    double s = 0.0;
    for (double v : grid_.values()) s += v;
    return s;
}

double mean_log_density(const DensityMap& density, std::span<const Cell> cells) {
    if (cells.empty()) throw Error("log-likelihood of an empty fixation set");
    double s = 0.0;
    for (const auto& c : cells) s += density.log_at(c);
    return s / static_cast<double>(cells.size());
}

// ---- forward model ---------------------------------------------------------

std::vector<std::string> SaliencyModel::feature_names() const {
    std::vector<std::string> names;
    for (const auto& m : feature_meta) names.push_back(m.name);
    return names;
}

void SaliencyModel::validate() const {
    if (!(blur_sigma > 0.0) || !std::isfinite(blur_sigma)) throw Error("model: blur sigma must be positive");
    if (!std::isfinite(center_weight)) throw Error("model: center weight is not finite");
    if (weights.size() != feature_meta.size()) throw Error("model: weight count != feature count");
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (!std::isfinite(weights[k])) throw Error("model: non-finite weight");
        if (feature_meta[k].degenerate && weights[k] != 0.0) {
            throw Error("model: degenerate feature '" + feature_meta[k].name + "' has a nonzero weight");
        }
    }
}

namespace {

Map2d linear_readout(const FeatureStack& stack, std::span<const double> weights) {
    if (weights.size() != stack.size()) throw Error("saliency_map: weight count != feature count");
    Map2d u(stack.height, stack.width);
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const double w = weights[k];
        if (w == 0.0) continue;
        const auto r = stack.features[k].values();
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += w * r[i];
    }
    return u;
}

}  // namespace

Map2d saliency_map(const FeatureStack& stack, std::span<const double> weights, double sigma) {
    return gaussian_blur(linear_readout(stack, weights), sigma);
}

Map2d combine_center_bias(const Map2d& saliency, const Map2d& center_log_density, double alpha) {
    if (!saliency.same_shape(center_log_density)) throw Error("combine_center_bias: dimension mismatch");
    Map2d out(saliency.height(), saliency.width());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * center_log_density[i] + saliency[i];
    return out;
}

DensityMap softmax_density(const Map2d& output) { return DensityMap::from_log_weights(output); }

DensityMap predict(const SaliencyModel& model, const FeatureStack& stack, const DensityMap& prior) {
    const auto names = model.feature_names();
    for (const auto& n : names) {
        if (!stack.find(n)) throw Error("predict: stack '" + stack.image_id + "' lacks model feature '" + n + "'");
    }
    const FeatureStack normalized = normalize(select_features(stack, names), model.stats);
    if (prior.height() != stack.height || prior.width() != stack.width) {
        throw Error("predict: prior grid does not match stack grid");
    }
    const Map2d s = saliency_map(normalized, model.weights, model.blur_sigma);
    return softmax_density(combine_center_bias(s, prior.log_grid(), model.center_weight));
}

double LogLikelihood::bits() const { return nats / std::numbers::ln2; }

LogLikelihood log_likelihood(const DensityMap& density, std::span<const Fixation> fixations, const ImageInfo& image) {
    std::vector<Cell> cells;
    cells.reserve(fixations.size());
    for (const auto& f : fixations) cells.push_back(fixation_cell(f, image, density.height(), density.width()));
    return {mean_log_density(density, cells), cells.size()};
}

LogLikelihood log_likelihood(const SaliencyModel& model, const FeatureStack& stack, const DensityMap& prior,
                             std::span<const Fixation> fixations, const ImageInfo& image) {
    return log_likelihood(predict(model, stack, prior), fixations, image);
}

// ---- training cost ---------------------------------------------------------

double sparsity_ratio(std::span<const double> weights, std::span<double> gradient, double epsilon) {
    const double eps2 = epsilon * epsilon;
    double l1 = 0.0;
    double sq = 0.0;
    for (double w : weights) {
        l1 += std::sqrt(w * w + eps2) - epsilon;
        sq += w * w;
    }
    const double l2 = std::sqrt(sq + eps2);
    const double rho = l1 / l2;
    if (!gradient.empty()) {
        if (gradient.size() != weights.size()) throw Error("sparsity_ratio: gradient size mismatch");
        const double l2_3 = l2 * l2 * l2;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            const double w = weights[i];
            gradient[i] = (w / std::sqrt(w * w + eps2)) / l2 - l1 * w / l2_3;
        }
    }
    return rho;
}

namespace {

// Adds one image's summed NLL gradient (unscaled) into grad; returns the NLL sum.
double accumulate_image(const TrainingImage& img, std::span<const double> weights, double sigma, double alpha,
                        const std::vector<bool>& pinned, std::span<double> grad) {
    const std::size_t K = weights.size();
    const FeatureStack& stack = img.stack;
    if (stack.size() != K) throw Error("cost: image '" + img.image_id + "' has a different feature count");
    if (img.center_log_density.height() != stack.height || img.center_log_density.width() != stack.width) {
        throw Error("cost: center prior of '" + img.image_id + "' does not match its grid");
    }
    if (img.fixations.empty()) return 0.0;

    const GaussianBlur blur(stack.height, stack.width, sigma);
    const Map2d u = linear_readout(stack, weights);
    const Map2d s = blur.apply(u);
    const Map2d o = combine_center_bias(s, img.center_log_density, alpha);
    // Overflowing outputs make the cost infinite; the optimizer backs off from such points.
    for (double v : o.values()) {
        if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    }
    const DensityMap p = softmax_density(o);

    const double n = static_cast<double>(img.fixations.size());
    double nll = 0.0;
    Map2d g(stack.height, stack.width);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = n * p.grid()[i];
    for (const auto& c : img.fixations) {
        nll -= p.log_at(c);
        g(c.y, c.x) -= 1.0;
    }

    double d_alpha = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) d_alpha += g[i] * img.center_log_density[i];

    const Map2d v = blur.apply_transpose(g);
    for (std::size_t k = 0; k < K; ++k) {
        if (!pinned.empty() && pinned[k]) continue;
        const auto r = stack.features[k].values();
        double acc = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) acc += v[i] * r[i];
        grad[k] += acc;
    }

    const Map2d ds = blur.apply_sigma_derivative(u);
    double d_sigma = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) d_sigma += g[i] * ds[i];
    grad[K] += d_sigma * sigma;  // chain rule to log sigma
    grad[K + 1] += d_alpha;
    return nll;
}

}  // namespace

std::vector<bool> degenerate_mask(const FeatureStack& stack) {
    std::vector<bool> mask(stack.size());
    for (std::size_t k = 0; k < stack.size(); ++k) mask[k] = stack.meta[k].degenerate;
    return mask;
}

CostBreakdown cost_and_gradient(std::span<const double> params, std::span<const TrainingImage> images,
                                double lambda) {
    std::vector<TrainingImage> copy(images.begin(), images.end());
    if (copy.empty()) throw Error("cost: no training images");
    auto pinned = degenerate_mask(copy.front().stack);
    return TrainingObjective(std::move(copy), lambda, 1, std::move(pinned)).evaluate(params);
}

TrainingObjective::TrainingObjective(std::vector<TrainingImage> images, double lambda, std::size_t batches,
                                     std::vector<bool> pinned)
    : images_(std::move(images)), lambda_(lambda), pinned_(std::move(pinned)) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("cost: lambda must be >= 0");
    if (images_.empty()) throw Error("cost: no training images");
    std::sort(images_.begin(), images_.end(),
              [](const TrainingImage& a, const TrainingImage& b) { return a.image_id < b.image_id; });
    features_ = images_.front().stack.size();
    for (const auto& img : images_) {
        if (img.stack.size() != features_) throw Error("cost: images disagree on feature count");
        fixations_ += img.fixations.size();
    }
    if (fixations_ == 0) throw Error("cost: empty fixation set");
    if (!pinned_.empty() && pinned_.size() != features_) throw Error("cost: pinned mask size mismatch");

    batches = std::clamp<std::size_t>(batches, 1, images_.size());
    for (std::size_t b = 0; b < batches; ++b) {
        ranges_.emplace_back(b * images_.size() / batches, (b + 1) * images_.size() / batches);
    }
}

CostBreakdown TrainingObjective::evaluate(std::span<const double> params) const {
    return evaluate_range(0, images_.size(), params, 1.0);
}

CostBreakdown TrainingObjective::evaluate_batch(std::size_t batch, std::span<const double> params) const {
    const auto [b, e] = ranges_.at(batch);
    return evaluate_range(b, e, params, 1.0 / static_cast<double>(ranges_.size()));
}

CostBreakdown TrainingObjective::evaluate_range(std::size_t begin, std::size_t end, std::span<const double> params,
                                                double reg_share) const {
    const std::size_t K = features_;
    if (params.size() != parameter_count(K)) throw Error("cost: parameter vector has the wrong length");
    const auto weights = params.first(K);
    const double sigma = std::exp(params[K]);
    const double alpha = params[K + 1];

    CostBreakdown out;
    out.gradient.assign(K + 2, 0.0);
    if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(alpha) ||
        !std::all_of(weights.begin(), weights.end(), [](double w) { return std::isfinite(w); })) {
        out.nll = out.total = std::numeric_limits<double>::infinity();
        return out;
    }
    double nll_sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        nll_sum += accumulate_image(images_[i], weights, sigma, alpha, pinned_, out.gradient);
    }
    const double inv_n = 1.0 / static_cast<double>(fixations_);
    for (double& g : out.gradient) g *= inv_n;
    out.nll = nll_sum * inv_n;

    std::vector<double> reg_grad(K);
    out.reg = sparsity_ratio(weights, reg_grad) * reg_share;
    for (std::size_t k = 0; k < K; ++k) {
        if (!pinned_.empty() && pinned_[k]) continue;
        out.gradient[k] += lambda_ * reg_share * reg_grad[k];
    }
    out.total = out.nll + lambda_ * out.reg;
    return out;
}

}  // namespace fixpoint
