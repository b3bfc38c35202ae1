#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fixpoint/dataset.hpp"
#include "fixpoint/density.hpp"

namespace fixpoint {

struct HistogramConfig {
    int bins = 32;
    double smoothing = 0.1;
};

/// B x B fixation histogram over normalized image coordinates with additive smoothing.
struct HistogramPrior {
    int bins = 1;
    double smoothing = 0.0;
    std::optional<std::string> excluded_image;
    std::vector<double> counts;  // bins x bins, row-major (y, x)

    /// Probability mass of bin (by, bx), including smoothing.
    double mass(int by, int bx) const;
};

/// Counts every fixation not on `exclude`; coordinates are normalized by their own
/// image size. Throws if nothing is left to count.
HistogramPrior fit_histogram_prior(const FixationDataset& dataset, int bins, double smoothing,
                                   std::optional<std::string> exclude = std::nullopt);

/// Weight of the uniform component mixed into every kernel density so that all
/// cells stay strictly positive.
inline constexpr double kKdeUniformMix = 1e-6;

/// Gaussian KDE in a 100 x 100 normalized frame, for priors shared across image sizes.
struct KdePrior {
    struct Point {
        double x = 0.0;
        double y = 0.0;
    };
    std::vector<Point> points;
    double bandwidth = 5.0;
    double uniform_mix = kKdeUniformMix;
};

KdePrior fit_kde_prior(const FixationDataset& dataset, double bandwidth);

/// Piecewise-constant evaluation at cell centres, renormalized.
DensityMap render_prior(const HistogramPrior& prior, int height, int width);
/// Cell-integrated kernel sum, renormalized.
DensityMap render_prior(const KdePrior& prior, int height, int width);

/// Cell-integrated Gaussian KDE on a grid. Points are in grid-cell units; each kernel is
/// renormalized to unit mass inside the grid. Mixed with `uniform_mix` of the uniform density.
DensityMap kernel_density(std::span<const KdePrior::Point> points, double bandwidth, int height,
                          int width, double uniform_mix = kKdeUniformMix);

/// Per-image KDE over every subject's fixations on `image_id` except `held_out_subject`.
/// `bandwidth` is in grid cells.
DensityMap fit_gold_standard(const FixationDataset& dataset, const std::string& image_id,
                             int held_out_subject, double bandwidth, int grid_height, int grid_width);

/// Pooled leave-one-subject-out log-likelihood (nats/fixation) of the gold standard.
/// Fixations whose image has no other subject are skipped. `grids` is indexed like dataset.images().
double gold_standard_score(const FixationDataset& dataset, std::span<const Cell> grids, double bandwidth);

/// Picks the candidate with the best gold_standard_score; ties go to the larger bandwidth.
/// `grids` holds (width, height) per dataset image as Cell{x = width, y = height}.
double select_bandwidth(const FixationDataset& dataset, std::span<const Cell> grids,
                        std::span<const double> candidates);

/// FSTK single-map container plus a text header describing the estimator.
void write_density(const DensityMap& density, const std::string& header,
                   const std::filesystem::path& path);
DensityMap read_density(const std::filesystem::path& path);

}  // namespace fixpoint
