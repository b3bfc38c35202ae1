#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fixpoint/map2d.hpp"

namespace fixpoint {

/// Receptive-field geometry of one feature channel, in source-image pixels.
/// Cell g of the stored grid is centred at rf_offset + g * rf_stride.
struct FeatureMeta {
    std::string name;
    std::string group;
    std::uint32_t rf_size = 1;
    std::uint32_t rf_stride = 1;
    std::int32_t rf_offset = 0;
    bool degenerate = false;

    friend bool operator==(const FeatureMeta&, const FeatureMeta&) = default;
};

/// K spatially aligned response maps for one image.
struct FeatureStack {
    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<Map2d> features;
    std::vector<FeatureMeta> meta;

    std::size_t size() const { return features.size(); }
    std::optional<std::size_t> find(const std::string& name) const;

    /// Throws Error when any invariant (shared dims, finite values, unique names,
    /// rf_size/rf_stride >= 1) is violated.
    void validate() const;

    friend bool operator==(const FeatureStack&, const FeatureStack&) = default;
};

/// A response map at its native resolution, before alignment.
struct SourceMap {
    Map2d values;
    FeatureMeta meta;
};

/// Bilinear resampling with pixel-centre alignment and edge clamping.
/// Same-size input is returned unchanged.
Map2d rescale_bilinear(const Map2d& map, int width, int height);

/// Resamples every map onto a width x height grid and adjusts rf_stride/rf_offset
/// to describe the new grid.
FeatureStack rescale_to_common_grid(std::string image_id, std::span<const SourceMap> maps,
                                    int width, int height);

struct NormalizationStats {
    std::vector<std::string> names;
    std::vector<double> mean;
    std::vector<double> stddev;
    /// Hash of the sorted contributing image ids.
    std::string fingerprint;

    std::optional<std::size_t> find(const std::string& name) const;
    friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

/// Pooled per-feature mean and population standard deviation. The reduction runs
/// over the stacks sorted by image_id so the result does not depend on input order.
NormalizationStats compute_norm_stats(std::span<const FeatureStack> stacks);

/// Divides each map by its pooled std (no mean subtraction). Features with zero std
/// pass through unchanged and are flagged degenerate.
FeatureStack normalize(const FeatureStack& stack, const NormalizationStats& stats);

/// Restricts a stack to the named features, in the given order.
FeatureStack select_features(const FeatureStack& stack, std::span<const std::string> names);

std::string stats_fingerprint(std::vector<std::string> image_ids);

// FSTK container.
void write_stack(const FeatureStack& stack, const std::filesystem::path& path);
FeatureStack read_stack(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_stack(const FeatureStack& stack);
FeatureStack decode_stack(std::span<const std::uint8_t> bytes, std::string image_id = {});

/// Reads every `*.fstk` in a directory, sorted by image id (the file stem).
std::vector<FeatureStack> read_stack_dir(const std::filesystem::path& dir);

}  // namespace fixpoint
