#include "fixpoint/densities.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "fixpoint/featstack.hpp"

namespace fixpoint {

// ---- histogram ---------------------------------------------------------------

double HistogramPrior::mass(int by, int bx) const {
    double total = 0.0;
    for (double c : counts) total += c;
    const double b2 = static_cast<double>(bins) * bins;
    return (counts[static_cast<std::size_t>(by) * bins + bx] + smoothing) / (total + b2 * smoothing);
}

namespace {

int bin_of(double normalized, int bins) {
    const int b = static_cast<int>(std::floor(normalized * bins));
    return std::clamp(b, 0, bins - 1);
}

}  // namespace

HistogramPrior fit_histogram_prior(const FixationDataset& dataset, int bins, double smoothing,
                                   std::optional<std::string> exclude) {
    if (bins < 1) throw Error("histogram prior: bins must be >= 1");
    if (!(smoothing > 0.0)) throw Error("histogram prior: smoothing must be > 0");
    if (dataset.fixations().empty()) throw Error("histogram prior: empty dataset");
    std::optional<std::size_t> excluded;
    if (exclude) excluded = dataset.find_image(*exclude);

    HistogramPrior prior;
    prior.bins = bins;
    prior.smoothing = smoothing;
    prior.excluded_image = std::move(exclude);
    prior.counts.assign(static_cast<std::size_t>(bins) * bins, 0.0);
    std::size_t used = 0;
    for (const auto& f : dataset.fixations()) {
        if (excluded && f.image == *excluded) continue;
        const auto& img = dataset.image(f.image);
        const int bx = bin_of(f.x / img.width, bins);
        const int by = bin_of(f.y / img.height, bins);
        prior.counts[static_cast<std::size_t>(by) * bins + bx] += 1.0;
        ++used;
    }
    if (used == 0) throw Error("histogram prior: every fixation was excluded");
    return prior;
}

DensityMap render_prior(const HistogramPrior& prior, int height, int width) {
    if (height < 1 || width < 1) throw Error("render_prior: zero dimension");
    if (prior.bins < 1 || prior.counts.size() != static_cast<std::size_t>(prior.bins) * prior.bins) {
        throw Error("render_prior: malformed histogram");
    }
    std::vector<double> masses(prior.counts.size());
    for (int by = 0; by < prior.bins; ++by) {
        for (int bx = 0; bx < prior.bins; ++bx) masses[static_cast<std::size_t>(by) * prior.bins + bx] = prior.mass(by, bx);
    }
    Map2d w(height, width);
    for (int y = 0; y < height; ++y) {
        const int by = bin_of((y + 0.5) / height, prior.bins);
        for (int x = 0; x < width; ++x) {
            const int bx = bin_of((x + 0.5) / width, prior.bins);
            w(y, x) = masses[static_cast<std::size_t>(by) * prior.bins + bx];
        }
    }
    return DensityMap::from_weights(w);
}

// ---- kernel densities ------------------------------------------------------

namespace {

// P(a <= Z <= b) for Z ~ N(0, 1), accurate in both tails.
double normal_mass(double a, double b) {
    const double r = 1.0 / std::numbers::sqrt2;
    if (a >= 0.0) return 0.5 * (std::erfc(a * r) - std::erfc(b * r));
    if (b <= 0.0) return 0.5 * (std::erfc(-b * r) - std::erfc(-a * r));
    return 1.0 - 0.5 * std::erfc(b * r) - 0.5 * std::erfc(-a * r);
}

// Mass of a 1-D Gaussian at `centre` inside each unit cell of [0, n), renormalized to 1.
void cell_masses(double centre, double bandwidth, int n, std::vector<double>& out) {
    out.assign(n, 0.0);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        out[j] = normal_mass((j - centre) / bandwidth, (j + 1 - centre) / bandwidth);
        sum += out[j];
    }
    if (sum > 0.0) {
        for (double& v : out) v /= sum;
    } else {
        out[std::clamp(static_cast<int>(std::floor(centre)), 0, n - 1)] = 1.0;
    }
}

DensityMap anisotropic_kde(std::span<const KdePrior::Point> points, double hx, double hy, int height, int width,
                           double uniform_mix) {
    if (points.empty()) throw Error("kernel density: no points");
    if (!(hx > 0.0) || !(hy > 0.0)) throw Error("kernel density: bandwidth must be > 0");
    if (height < 1 || width < 1) throw Error("kernel density: zero dimension");
    if (!(uniform_mix > 0.0 && uniform_mix < 1.0)) throw Error("kernel density: uniform mix must be in (0, 1)");

    Map2d acc(height, width);
    std::vector<double> ax, ay;
    for (const auto& p : points) {
        cell_masses(p.x, hx, width, ax);
        cell_masses(p.y, hy, height, ay);
        for (int y = 0; y < height; ++y) {
            const double wy = ay[y];
            if (wy == 0.0) continue;
            for (int x = 0; x < width; ++x) acc(y, x) += wy * ax[x];
        }
    }
    const double scale = (1.0 - uniform_mix) / static_cast<double>(points.size());
    const double floor = uniform_mix / (static_cast<double>(height) * width);
    for (double& v : acc.values()) v = v * scale + floor;
    return DensityMap::from_weights(acc);
}

}  // namespace

DensityMap kernel_density(std::span<const KdePrior::Point> points, double bandwidth, int height, int width,
                          double uniform_mix) {
    return anisotropic_kde(points, bandwidth, bandwidth, height, width, uniform_mix);
}

KdePrior fit_kde_prior(const FixationDataset& dataset, double bandwidth) {
    if (!(bandwidth > 0.0)) throw Error("KDE prior: bandwidth must be > 0");
    KdePrior prior;
    prior.bandwidth = bandwidth;
    for (const auto& f : dataset.fixations()) {
        const auto& img = dataset.image(f.image);
        prior.points.push_back({100.0 * f.x / img.width, 100.0 * f.y / img.height});
    }
    if (prior.points.empty()) throw Error("KDE prior: empty dataset");
    return prior;
}

DensityMap render_prior(const KdePrior& prior, int height, int width) {
    std::vector<KdePrior::Point> scaled;
    scaled.reserve(prior.points.size());
    for (const auto& p : prior.points) scaled.push_back({p.x * width / 100.0, p.y * height / 100.0});
    return anisotropic_kde(scaled, prior.bandwidth * width / 100.0, prior.bandwidth * height / 100.0, height, width,
                           prior.uniform_mix);
}

// ---- gold standard ---------------------------------------------------------

namespace {

std::vector<KdePrior::Point> grid_points(const FixationDataset& dataset, std::size_t image, int held_out_subject,
                                         int grid_height, int grid_width) {
    const auto& info = dataset.image(image);
    std::vector<KdePrior::Point> pts;
    for (const auto& f : dataset.fixations()) {
        if (f.image != image || f.subject == held_out_subject) continue;
        pts.push_back({f.x * grid_width / info.width, f.y * grid_height / info.height});
    }
    return pts;
}

}  // namespace

DensityMap fit_gold_standard(const FixationDataset& dataset, const std::string& image_id, int held_out_subject,
                             double bandwidth, int grid_height, int grid_width) {
    const std::size_t image = dataset.image_index(image_id);
    const auto pts = grid_points(dataset, image, held_out_subject, grid_height, grid_width);
    if (pts.empty()) {
        throw Error("gold standard: no fixations on '" + image_id + "' after holding out subject " +
                    std::to_string(held_out_subject));
    }
    return kernel_density(pts, bandwidth, grid_height, grid_width);
}

double gold_standard_score(const FixationDataset& dataset, std::span<const Cell> grids, double bandwidth) {
    if (grids.size() != dataset.images().size()) throw Error("gold standard: one grid per image required");
    std::map<std::pair<std::size_t, int>, std::vector<Fixation>> by_subject;
    for (const auto& f : dataset.fixations()) by_subject[{f.image, f.subject}].push_back(f);

    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& [key, fixes] : by_subject) {
        const auto [image, subject] = key;
        const auto& g = grids[image];
        const auto pts = grid_points(dataset, image, subject, g.y, g.x);
        if (pts.empty()) continue;
        const DensityMap d = kernel_density(pts, bandwidth, g.y, g.x);
        for (const auto& f : fixes) {
            sum += d.log_at(fixation_cell(f, dataset.image(image), g.y, g.x));
            ++count;
        }
    }
    if (count == 0) throw Error("gold standard: no image has fixations from two subjects");
    return sum / static_cast<double>(count);
}

double select_bandwidth(const FixationDataset& dataset, std::span<const Cell> grids, std::span<const double> candidates) {
    if (candidates.empty()) throw Error("select_bandwidth: empty candidate grid");
    if (dataset.subjects().size() < 2) throw Error("select_bandwidth: need at least two subjects");
    std::vector<double> sorted(candidates.begin(), candidates.end());
    std::sort(sorted.begin(), sorted.end());
    double best = sorted.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (double h : sorted) {
        const double score = gold_standard_score(dataset, grids, h);
        if (score >= best_score) {
            best_score = score;
            best = h;
        }
    }
    return best;
}

// ---- serialization -----------------------------------------------------------

void write_density(const DensityMap& density, const std::string& header, const std::filesystem::path& path) {
    FeatureStack stack;
    stack.height = density.height();
    stack.width = density.width();
    stack.features.push_back(density.grid());
    stack.meta.push_back({"density", "density", 1, 1, 0, false});
    write_stack(stack, path);

    double sum = 0.0;
    for (double v : density.grid().values()) sum += static_cast<float>(v);
    std::ofstream side(path.string() + ".txt");
    if (!side) throw Error("cannot write sidecar for " + path.string());
    side.precision(17);
    if (!header.empty()) side << header << (header.back() == '\n' ? "" : "\n");
    side << "height = " << density.height() << "\n";
    side << "width = " << density.width() << "\n";
    side << "sum = " << sum << "\n";
}

DensityMap read_density(const std::filesystem::path& path) {
    const FeatureStack stack = read_stack(path);
    if (stack.size() != 1 || stack.meta[0].group != "density") {
        throw Error(path.string() + ": not a single-map density container");
    }
    return DensityMap::from_weights(stack.features[0]);
}

}  // namespace fixpoint
