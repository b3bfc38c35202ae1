#include "fixpoint/introspect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fixpoint {

std::vector<std::string> top_features(const SaliencyModel& model, std::size_t n) {
    const std::size_t K = model.weights.size();
    if (n < 1) throw Error("top_features: n must be >= 1");
    if (n > K) throw Error("top_features: n exceeds the feature count");
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double wa = std::abs(model.weights[a]), wb = std::abs(model.weights[b]);
        if (wa != wb) return wa > wb;
        return model.feature_meta[a].name < model.feature_meta[b].name;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(model.feature_meta[order[i]].name);
    return out;
}

std::vector<double> relative_weights(const SaliencyModel& model) {
    double max_abs = 0.0;
    for (double w : model.weights) max_abs = std::max(max_abs, std::abs(w));
    std::vector<double> out(model.weights.size(), 0.0);
    if (max_abs == 0.0) return out;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::abs(model.weights[k]) / max_abs;
    return out;
}

PatchBox patch_box(const FeatureMeta& meta, Cell cell, int image_width, int image_height) {
    if (meta.rf_stride < 1 || meta.rf_size < 1) throw Error("patch_box: feature '" + meta.name + "' lacks geometry");
    if (image_width < 1 || image_height < 1) throw Error("patch_box: zero image size");
    const int size = static_cast<int>(meta.rf_size);
    const int stride = static_cast<int>(meta.rf_stride);
    const int cx = std::clamp(meta.rf_offset + cell.x * stride, 0, image_width - 1);
    const int cy = std::clamp(meta.rf_offset + cell.y * stride, 0, image_height - 1);
    PatchBox box;
    box.x0 = std::max(0, cx - size / 2);
    box.y0 = std::max(0, cy - size / 2);
    box.x1 = std::min(image_width, cx - size / 2 + size);
    box.y1 = std::min(image_height, cy - size / 2 + size);
    return box;
}

namespace {

Cell extreme_cell(const Map2d& map, bool maximum) {
    Cell best{0, 0};
    double v = map(0, 0);
    for (int y = 0; y < map.height(); ++y) {
        for (int x = 0; x < map.width(); ++x) {
            const double c = map(y, x);
            if (maximum ? c > v : c < v) {
                v = c;
                best = {x, y};
            }
        }
    }
    return best;
}

}  // namespace

FeatureReport max_response_patches(const std::string& feature, double weight, std::span<const FeatureStack> stacks,
                                   std::size_t k, const ImageSizes& sizes) {
    const bool maximum = weight >= 0.0;
    FeatureReport report;
    report.feature = feature;
    report.weight = weight;
    report.sign = weight > 0.0 ? 1 : (weight < 0.0 ? -1 : 0);

    std::vector<std::pair<TopResponse, const FeatureMeta*>> candidates;
    for (const auto& stack : stacks) {
        const auto idx = stack.find(feature);
        if (!idx) throw Error("max_response_patches: stack '" + stack.image_id + "' lacks feature '" + feature + "'");
        const FeatureMeta& meta = stack.meta[*idx];
        if (meta.rf_stride < 1 || meta.rf_size < 1) {
            throw Error("max_response_patches: feature '" + feature + "' lacks geometry metadata");
        }
        const Map2d& map = stack.features[*idx];
        const Cell c = extreme_cell(map, maximum);
        TopResponse r;
        r.image_id = stack.image_id;
        r.cell = c;
        r.response = map(c.y, c.x);
        int w = stack.width * static_cast<int>(meta.rf_stride);
        int h = stack.height * static_cast<int>(meta.rf_stride);
        if (auto it = sizes.find(stack.image_id); it != sizes.end()) {
            w = it->second.first;
            h = it->second.second;
        }
        r.box = patch_box(meta, c, w, h);
        candidates.emplace_back(std::move(r), &meta);
    }
    std::sort(candidates.begin(), candidates.end(), [&](const auto& a, const auto& b) {
        const auto& ra = a.first;
        const auto& rb = b.first;
        if (ra.response != rb.response) return maximum ? ra.response > rb.response : ra.response < rb.response;
        if (ra.image_id != rb.image_id) return ra.image_id < rb.image_id;
        if (ra.cell.y != rb.cell.y) return ra.cell.y < rb.cell.y;
        return ra.cell.x < rb.cell.x;
    });
    for (std::size_t i = 0; i < std::min(k, candidates.size()); ++i) report.top.push_back(candidates[i].first);
    return report;
}

ResponseOverlay response_overlay(const std::string& feature, const FeatureStack& stack) {
    const auto idx = stack.find(feature);
    if (!idx) throw Error("response_overlay: stack '" + stack.image_id + "' lacks feature '" + feature + "'");
    ResponseOverlay out;
    out.map.image_id = stack.image_id;
    out.map.width = stack.width;
    out.map.height = stack.height;
    out.map.features.push_back(stack.features[*idx]);
    out.map.meta.push_back(stack.meta[*idx]);
    out.argmax = extreme_cell(stack.features[*idx], true);
    return out;
}

}  // namespace fixpoint
