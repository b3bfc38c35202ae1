#include "fixpoint/featgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"

namespace fixpoint {

void FilterBankSpec::validate() const {
    if (scales.empty()) throw Error("filter bank: at least one scale required");
    for (int s : scales) {
        if (s < 1) throw Error("filter bank: scales must be >= 1");
    }
    if (!intensity && !color_opponent && !oriented && !center_surround) throw Error("filter bank: no filters enabled");
    if (oriented && orientations < 1) throw Error("filter bank: orientations must be >= 1");
    for (int k : {intensity_size, color_size, oriented_size, center_surround_size}) {
        if (k < 1 || k % 2 == 0) throw Error("filter bank: kernel sizes must be odd and >= 1");
    }
}

FilterBankSpec read_filter_bank_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    FilterBankSpec spec;
    try {
        const auto doc = nlohmann::json::parse(in);
        spec.scales = doc.value("scales", spec.scales);
        spec.orientations = doc.value("orientations", spec.orientations);
        if (doc.contains("include")) {
            const auto& inc = doc.at("include");
            spec.intensity = inc.value("intensity", spec.intensity);
            spec.color_opponent = inc.value("color_opponent", spec.color_opponent);
            spec.oriented = inc.value("oriented", spec.oriented);
            spec.center_surround = inc.value("center_surround", spec.center_surround);
        }
        if (doc.contains("kernel_sizes")) {
            const auto& ks = doc.at("kernel_sizes");
            spec.intensity_size = ks.value("intensity", spec.intensity_size);
            spec.color_size = ks.value("color_opponent", spec.color_size);
            spec.oriented_size = ks.value("oriented", spec.oriented_size);
            spec.center_surround_size = ks.value("center_surround", spec.center_surround_size);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": malformed filter bank spec: " + e.what());
    }
    spec.validate();
    return spec;
}

void write_filter_bank_spec(const FilterBankSpec& spec, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["scales"] = spec.scales;
    doc["orientations"] = spec.orientations;
    doc["include"] = {{"intensity", spec.intensity},
                      {"color_opponent", spec.color_opponent},
                      {"oriented", spec.oriented},
                      {"center_surround", spec.center_surround}};
    doc["kernel_sizes"] = {{"intensity", spec.intensity_size},
                           {"color_opponent", spec.color_size},
                           {"oriented", spec.oriented_size},
                           {"center_surround", spec.center_surround_size}};
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

Map2d downsample(const Map2d& channel, int factor) {
    if (factor < 1) throw Error("downsample: factor must be >= 1");
    if (factor == 1) return channel;
    const int H = channel.height();
    const int W = channel.width();
    const int h = (H + factor - 1) / factor;
    const int w = (W + factor - 1) / factor;
    Map2d out(h, w);
    for (int by = 0; by < h; ++by) {
        for (int bx = 0; bx < w; ++bx) {
            double sum = 0.0;
            int n = 0;
            for (int y = by * factor; y < std::min(H, (by + 1) * factor); ++y) {
                for (int x = bx * factor; x < std::min(W, (bx + 1) * factor); ++x) {
                    sum += channel(y, x);
                    ++n;
                }
            }
            out(by, bx) = sum / n;
        }
    }
    return out;
}

RgbImage downsample(const RgbImage& image, int factor) {
    if (factor < 1) throw Error("downsample: factor must be >= 1");
    if (factor == 1) return image;
    const int h = (image.height + factor - 1) / factor;
    const int w = (image.width + factor - 1) / factor;
    RgbImage out(w, h);
    for (int c = 0; c < 3; ++c) {
        for (int by = 0; by < h; ++by) {
            for (int bx = 0; bx < w; ++bx) {
                int sum = 0, n = 0;
                for (int y = by * factor; y < std::min(image.height, (by + 1) * factor); ++y) {
                    for (int x = bx * factor; x < std::min(image.width, (bx + 1) * factor); ++x) {
                        sum += image.at(y, x, c);
                        ++n;
                    }
                }
                out.at(by, bx, c) = static_cast<std::uint8_t>((sum + n / 2) / n);
            }
        }
    }
    return out;
}

Map2d convolve_full(const Map2d& image, const Map2d& kernel) {
    const int H = image.height(), W = image.width();
    const int kh = kernel.height(), kw = kernel.width();
    if (H < 1 || W < 1 || kh < 1 || kw < 1) throw Error("convolve: empty operand");
    Map2d out(H + kh - 1, W + kw - 1);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double v = image(y, x);
            if (v == 0.0) continue;
            for (int a = 0; a < kh; ++a) {
                for (int b = 0; b < kw; ++b) out(y + a, x + b) += v * kernel(a, b);
            }
        }
    }
    return out;
}

Map2d convolve_same(const Map2d& image, const Map2d& kernel) {
    const Map2d full = convolve_full(image, kernel);
    const int py = (kernel.height() - 1) / 2;
    const int px = (kernel.width() - 1) / 2;
    Map2d out(image.height(), image.width());
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) out(y, x) = full(y + py, x + px);
    }
    return out;
}

Map2d gaussian_kernel(int size, double sigma) {
    if (size < 1 || !(sigma > 0.0)) throw Error("gaussian_kernel: bad size or sigma");
    const int r = size / 2;
    Map2d k(size, size);
    double sum = 0.0;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dx = x - r, dy = y - r;
            k(y, x) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            sum += k(y, x);
        }
    }
    for (double& v : k.values()) v /= sum;
    return k;
}

Map2d gabor_kernel(int size, double theta, bool odd) {
    if (size < 1) throw Error("gabor_kernel: bad size");
    const int r = size / 2;
    const double sigma = size / 5.0;
    const double wavelength = size / 2.0;
    Map2d k(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dx = x - r, dy = y - r;
            const double u = dx * std::cos(theta) + dy * std::sin(theta);
            const double v = -dx * std::sin(theta) + dy * std::cos(theta);
            const double env = std::exp(-(u * u + v * v) / (2.0 * sigma * sigma));
            const double phase = 2.0 * std::numbers::pi * u / wavelength;
            k(y, x) = env * (odd ? std::sin(phase) : std::cos(phase));
        }
    }
    double mean = 0.0;
    for (double v : k.values()) mean += v;
    mean /= static_cast<double>(k.size());
    double l1 = 0.0;
    for (double& v : k.values()) {
        v -= mean;
        l1 += std::abs(v);
    }
    if (l1 > 0.0) {
        for (double& v : k.values()) v /= l1;
    }
    return k;
}

Map2d center_surround_kernel(int size) {
    const Map2d centre = gaussian_kernel(size, size / 8.0);
    const Map2d surround = gaussian_kernel(size, size / 4.0);
    Map2d k(size, size);
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = centre[i] - surround[i];
    return k;
}

namespace {

struct Channels {
    Map2d r, g, b;
};

Channels split_channels(const RgbImage& image) {
    Channels c{Map2d(image.height, image.width), Map2d(image.height, image.width), Map2d(image.height, image.width)};
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            c.r(y, x) = image.at(y, x, 0);
            c.g(y, x) = image.at(y, x, 1);
            c.b(y, x) = image.at(y, x, 2);
        }
    }
    return c;
}

FeatureMeta meta_for(const std::string& type, int scale, int kernel, const std::string& channel) {
    FeatureMeta m;
    m.group = type + "_s" + std::to_string(scale);
    m.name = m.group + ":" + channel;
    m.rf_size = static_cast<std::uint32_t>(kernel * scale);
    m.rf_stride = static_cast<std::uint32_t>(scale);
    m.rf_offset = (scale - 1) / 2;
    return m;
}

void push_signed(std::vector<SourceMap>& out, const Map2d& response, const FeatureMeta& base,
                 const std::string& pos_name, const std::string& neg_name) {
    Map2d pos(response.height(), response.width()), neg(response.height(), response.width());
    for (std::size_t i = 0; i < response.size(); ++i) {
        pos[i] = std::max(response[i], 0.0);
        neg[i] = std::max(-response[i], 0.0);
    }
    FeatureMeta mp = base, mn = base;
    mp.name = base.group + ":" + pos_name;
    mn.name = base.group + ":" + neg_name;
    out.push_back({std::move(pos), std::move(mp)});
    out.push_back({std::move(neg), std::move(mn)});
}

}  // namespace

FeatureStack extract(const RgbImage& image, const FilterBankSpec& spec, std::string image_id) {
    spec.validate();
    if (image.width < 1 || image.height < 1) throw Error("extract: zero image dimension");
    std::vector<int> scales = spec.scales;
    std::sort(scales.begin(), scales.end());
    scales.erase(std::unique(scales.begin(), scales.end()), scales.end());

    std::vector<SourceMap> maps;
    int grid_w = 0, grid_h = 0;
    for (int scale : scales) {
        const Channels ch = split_channels(image);
        const Map2d r = downsample(ch.r, scale);
        const Map2d g = downsample(ch.g, scale);
        const Map2d b = downsample(ch.b, scale);
        if (grid_w == 0) {
            grid_w = r.width();
            grid_h = r.height();
        }
        Map2d intensity(r.height(), r.width());
        for (std::size_t i = 0; i < intensity.size(); ++i) intensity[i] = (r[i] + g[i] + b[i]) / 765.0;
        double mean = 0.0;
        for (double v : intensity.values()) mean += v;
        mean /= static_cast<double>(intensity.size());
        Map2d contrast = intensity;
        for (double& v : contrast.values()) v -= mean;

        if (spec.intensity) {
            const auto k = gaussian_kernel(spec.intensity_size, spec.intensity_size / 4.0);
            auto meta = meta_for("intensity", scale, spec.intensity_size, "luminance");
            maps.push_back({convolve_same(intensity, k), std::move(meta)});
        }
        if (spec.color_opponent) {
            const auto k = gaussian_kernel(spec.color_size, spec.color_size / 4.0);
            Map2d rg(r.height(), r.width()), by(r.height(), r.width());
            for (std::size_t i = 0; i < rg.size(); ++i) {
                rg[i] = (r[i] - g[i]) / 255.0;
                by[i] = (b[i] - 0.5 * (r[i] + g[i])) / 255.0;
            }
            const auto base = meta_for("color", scale, spec.color_size, "");
            push_signed(maps, convolve_same(rg, k), base, "rg_pos", "rg_neg");
            push_signed(maps, convolve_same(by, k), base, "by_pos", "by_neg");
        }
        if (spec.oriented) {
            const auto base = meta_for("oriented", scale, spec.oriented_size, "");
            for (int o = 0; o < spec.orientations; ++o) {
                const double theta = std::numbers::pi * o / spec.orientations;
                const std::string tag = "o" + std::to_string(o);
                push_signed(maps, convolve_same(contrast, gabor_kernel(spec.oriented_size, theta, false)), base,
                            tag + "_even_pos", tag + "_even_neg");
                push_signed(maps, convolve_same(contrast, gabor_kernel(spec.oriented_size, theta, true)), base,
                            tag + "_odd_pos", tag + "_odd_neg");
            }
        }
        if (spec.center_surround) {
            const auto base = meta_for("center_surround", scale, spec.center_surround_size, "");
            push_signed(maps, convolve_same(contrast, center_surround_kernel(spec.center_surround_size)), base, "on",
                        "off");
        }
    }
    FeatureStack stack = rescale_to_common_grid(std::move(image_id), maps, grid_w, grid_h);
    stack.validate();
    return stack;
}

}  // namespace fixpoint
