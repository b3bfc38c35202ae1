#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fixpoint/featstack.hpp"
#include "fixpoint/model.hpp"

namespace fixpoint {

struct PatchBox {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open, image pixels
};

struct TopResponse {
    std::string image_id;
    Cell cell;
    double response = 0.0;
    PatchBox box;
};

struct FeatureReport {
    std::string feature;
    double weight = 0.0;
    double relative_weight = 0.0;
    int sign = 0;
    std::vector<TopResponse> top;
};

/// The n features with the largest |w|, ties by name.
std::vector<std::string> top_features(const SaliencyModel& model, std::size_t n);

/// |w_k| / max |w|, per model feature (all zero when every weight is zero).
std::vector<double> relative_weights(const SaliencyModel& model);

/// Receptive-field box of a cell, clamped to width x height.
PatchBox patch_box(const FeatureMeta& meta, Cell cell, int image_width, int image_height);

/// Image size used for clamping: (width, height) by image id.
using ImageSizes = std::map<std::string, std::pair<int, int>>;

/// Extreme responses of one feature, at most one per stack. Maxima when
/// `weight_sign` >= 0, minima otherwise. Missing image sizes fall back to grid * stride.
FeatureReport max_response_patches(const std::string& feature, double weight,
                                   std::span<const FeatureStack> stacks, std::size_t k,
                                   const ImageSizes& sizes = {});

struct ResponseOverlay {
    FeatureStack map;  // K = 1
    Cell argmax;
};

/// Raw response of one feature and its first row-major maximum.
ResponseOverlay response_overlay(const std::string& feature, const FeatureStack& stack);

}  // namespace fixpoint
