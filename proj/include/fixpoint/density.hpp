#pragma once

#include <span>

#include "fixpoint/map2d.hpp"

namespace fixpoint {

/// A probability distribution over grid cells. Cells are strictly positive and
/// sum to one; the log grid is kept alongside to avoid re-taking logs of tiny masses.
class DensityMap {
public:
    DensityMap() = default;

    /// Normalizes exp(log_weights) with max subtraction.
    static DensityMap from_log_weights(const Map2d& log_weights);
    /// Normalizes nonnegative weights; throws if any weight is negative or zero.
    static DensityMap from_weights(const Map2d& weights);
    static DensityMap uniform(int height, int width);

    const Map2d& grid() const { return grid_; }
    const Map2d& log_grid() const { return log_grid_; }
    int height() const { return grid_.height(); }
    int width() const { return grid_.width(); }

    double at(Cell c) const { return grid_(c.y, c.x); }
    double log_at(Cell c) const { return log_grid_(c.y, c.x); }

    /// Sum of the grid, for contract checks and sidecars.
    double total() const;

private:
    Map2d grid_;
    Map2d log_grid_;
};

/// Mean of log p over the given cells, in nats.
double mean_log_density(const DensityMap& density, std::span<const Cell> cells);

}  // namespace fixpoint
