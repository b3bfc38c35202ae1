#include "fixpoint/featstack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "fixpoint/dataset.hpp"

namespace fixpoint {

std::optional<std::size_t> FeatureStack::find(const std::string& name) const {
    for (std::size_t k = 0; k < meta.size(); ++k) {
        if (meta[k].name == name) return k;
    }
    return std::nullopt;
}

void FeatureStack::validate() const {
    if (width < 1 || height < 1) throw Error("stack '" + image_id + "': zero grid dimension");
    if (features.size() != meta.size()) throw Error("stack '" + image_id + "': metadata count != feature count");
    std::set<std::string> names;
    for (std::size_t k = 0; k < features.size(); ++k) {
        const auto& m = meta[k];
        if (features[k].height() != height || features[k].width() != width) {
            throw Error("stack '" + image_id + "': feature '" + m.name + "' has mismatched dimensions");
        }
        if (!names.insert(m.name).second) throw Error("stack '" + image_id + "': duplicate feature '" + m.name + "'");
        if (m.rf_size < 1 || m.rf_stride < 1) {
            throw Error("stack '" + image_id + "': feature '" + m.name + "' has rf_size or rf_stride < 1");
        }
        const auto& v = features[k].values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!std::isfinite(v[i])) {
                throw Error("stack '" + image_id + "': non-finite value in feature " + std::to_string(k) + " at pixel " +
                            std::to_string(i));
            }
        }
    }
}

Map2d rescale_bilinear(const Map2d& map, int width, int height) {
    if (width < 1 || height < 1) throw Error("rescale: zero target dimension");
    if (map.empty()) throw Error("rescale: empty map");
    if (map.width() == width && map.height() == height) return map;

    const int sw = map.width();
    const int sh = map.height();
    const double rx = static_cast<double>(sw) / width;
    const double ry = static_cast<double>(sh) / height;

    std::vector<int> x0(width), x1(width);
    std::vector<double> tx(width);
    for (int x = 0; x < width; ++x) {
        const double s = std::clamp((x + 0.5) * rx - 0.5, 0.0, static_cast<double>(sw - 1));
        x0[x] = static_cast<int>(std::floor(s));
        x1[x] = std::min(x0[x] + 1, sw - 1);
        tx[x] = s - x0[x];
    }

    Map2d out(height, width);
    for (int y = 0; y < height; ++y) {
        const double s = std::clamp((y + 0.5) * ry - 0.5, 0.0, static_cast<double>(sh - 1));
        const int y0 = static_cast<int>(std::floor(s));
        const int y1 = std::min(y0 + 1, sh - 1);
        const double ty = s - y0;
        for (int x = 0; x < width; ++x) {
            const double top = map(y0, x0[x]) + tx[x] * (map(y0, x1[x]) - map(y0, x0[x]));
            const double bottom = map(y1, x0[x]) + tx[x] * (map(y1, x1[x]) - map(y1, x0[x]));
            out(y, x) = top + ty * (bottom - top);
        }
    }
    return out;
}

FeatureStack rescale_to_common_grid(std::string image_id, std::span<const SourceMap> maps, int width, int height) {
    if (maps.empty()) throw Error("rescale_to_common_grid: empty map list");
    if (width < 1 || height < 1) throw Error("rescale_to_common_grid: zero target dimension");
    FeatureStack stack;
    stack.image_id = std::move(image_id);
    stack.width = width;
    stack.height = height;
    for (const auto& src : maps) {
        if (src.values.empty()) throw Error("rescale_to_common_grid: empty map '" + src.meta.name + "'");
        stack.features.push_back(rescale_bilinear(src.values, width, height));
        FeatureMeta meta = src.meta;
        if (src.values.width() != width) {
            const double r = static_cast<double>(src.values.width()) / width;
            const double stride = meta.rf_stride;
            meta.rf_stride = static_cast<std::uint32_t>(std::max(1L, std::lround(stride * r)));
            meta.rf_offset += static_cast<std::int32_t>(std::lround(stride * (r - 1.0) / 2.0));
        }
        stack.meta.push_back(std::move(meta));
    }
    return stack;
}

std::optional<std::size_t> NormalizationStats::find(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (names[k] == name) return k;
    }
    return std::nullopt;
}

std::string stats_fingerprint(std::vector<std::string> image_ids) {
    std::sort(image_ids.begin(), image_ids.end());
    std::uint64_t h = fnv1a("fixpoint-stats");
    for (const auto& id : image_ids) {
        h = fnv1a(id, h);
        h = fnv1a("\n", h);
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

NormalizationStats compute_norm_stats(std::span<const FeatureStack> stacks) {
    if (stacks.empty()) throw Error("compute_norm_stats: no stacks");
    std::vector<const FeatureStack*> order;
    for (const auto& s : stacks) order.push_back(&s);
    std::stable_sort(order.begin(), order.end(),
                     [](const FeatureStack* a, const FeatureStack* b) { return a->image_id < b->image_id; });

    const auto& first = *order.front();
    NormalizationStats stats;
    for (const auto& m : first.meta) stats.names.push_back(m.name);
    for (const auto* s : order) {
        if (s->meta.size() != stats.names.size()) throw Error("compute_norm_stats: inconsistent feature sets");
        for (std::size_t k = 0; k < stats.names.size(); ++k) {
            if (s->meta[k].name != stats.names[k]) throw Error("compute_norm_stats: inconsistent feature sets");
        }
    }

    const std::size_t K = stats.names.size();
    stats.mean.assign(K, 0.0);
    stats.stddev.assign(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto* s : order) {
            for (double v : s->features[k].values()) sum += v;
            n += s->features[k].size();
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (const auto* s : order) {
            for (double v : s->features[k].values()) ss += (v - mean) * (v - mean);
        }
        stats.mean[k] = mean;
        stats.stddev[k] = std::sqrt(ss / static_cast<double>(n));
    }
    std::vector<std::string> ids;
    for (const auto* s : order) ids.push_back(s->image_id);
    stats.fingerprint = stats_fingerprint(std::move(ids));
    return stats;
}

FeatureStack normalize(const FeatureStack& stack, const NormalizationStats& stats) {
    FeatureStack out = stack;
    for (std::size_t k = 0; k < out.features.size(); ++k) {
        const auto idx = stats.find(out.meta[k].name);
        if (!idx) throw Error("normalize: no stats entry for feature '" + out.meta[k].name + "'");
        const double sd = stats.stddev[*idx];
        if (sd > 0.0) {
            for (double& v : out.features[k].values()) v /= sd;
        } else {
            out.meta[k].degenerate = true;
        }
    }
    return out;
}

FeatureStack select_features(const FeatureStack& stack, std::span<const std::string> names) {
    FeatureStack out;
    out.image_id = stack.image_id;
    out.width = stack.width;
    out.height = stack.height;
    for (const auto& name : names) {
        const auto idx = stack.find(name);
        if (!idx) throw Error("stack '" + stack.image_id + "' lacks feature '" + name + "'");
        out.features.push_back(stack.features[*idx]);
        out.meta.push_back(stack.meta[*idx]);
    }
    return out;
}

}  // namespace fixpoint
