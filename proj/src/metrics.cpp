#include "fixpoint/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace fixpoint {

std::string to_string(SaliencyConvention convention) {
    return convention == SaliencyConvention::UniformPrior ? "uniform-prior" : "nonparametric-prior";
}

double information_gain(const LogLikelihood& model, const LogLikelihood& baseline) {
    if (model.count != baseline.count) throw Error("information gain: mismatched fixation sets");
    return model.bits() - baseline.bits();
}

double information_gain_explained(double model_bits, double baseline_bits, double gold_bits) {
    if (!(gold_bits > baseline_bits)) {
        throw Error("information gain explained: gold standard does not beat the baseline");
    }
    return (model_bits - baseline_bits) / (gold_bits - baseline_bits);
}

double information_gain_explained(const LogLikelihood& model, const LogLikelihood& baseline,
                                  const LogLikelihood& gold) {
    if (model.count != baseline.count || gold.count != baseline.count) {
        throw Error("information gain explained: mismatched fixation sets");
    }
    return information_gain_explained(model.bits(), baseline.bits(), gold.bits());
}

double auc_from_scores(std::span<const double> positives, std::span<const double> negatives) {
    if (positives.empty()) throw Error("AUC: no fixations");
    if (negatives.empty()) throw Error("AUC: no nonfixations");
    struct Item {
        double value;
        bool positive;
    };
    std::vector<Item> items;
    items.reserve(positives.size() + negatives.size());
    for (double v : positives) items.push_back({v, true});
    for (double v : negatives) items.push_back({v, false});
    for (const auto& it : items) {
        if (std::isnan(it.value)) throw Error("AUC: NaN saliency value");
    }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.value < b.value; });

    // Sum of 1-based midranks of the positives.
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        std::size_t pos_in_group = 0;
        while (j < items.size() && items[j].value == items[i].value) {
            pos_in_group += items[j].positive ? 1 : 0;
            ++j;
        }
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        rank_sum += midrank * static_cast<double>(pos_in_group);
        i = j;
    }
    const double n = static_cast<double>(positives.size());
    const double m = static_cast<double>(negatives.size());
    return (rank_sum - n * (n + 1.0) / 2.0) / (n * m);
}

AucResult auc(const Map2d& saliency, std::span<const Cell> fixations, const NonfixationSampler& nonfixations,
              SaliencyConvention convention) {
    if (fixations.empty()) throw Error("AUC: no fixations");
    std::vector<double> pos;
    pos.reserve(fixations.size());
    for (const auto& c : fixations) pos.push_back(saliency(c.y, c.x));
    std::vector<double> neg;
    if (nonfixations.kind == NonfixationSampler::Kind::AllCells) {
        neg.assign(saliency.values().begin(), saliency.values().end());
    } else {
        for (const auto& c : nonfixations.cells) neg.push_back(saliency(c.y, c.x));
    }
    return {auc_from_scores(pos, neg), convention};
}

std::vector<double> shuffled_auc_per_image(std::span<const Map2d> maps, const FixationDataset& dataset) {
    const auto& images = dataset.images();
    if (maps.size() != images.size()) throw Error("shuffled AUC: one map per dataset image required");
    std::vector<double> out(images.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Map2d& map = maps[i];
        if (map.empty()) continue;
        std::vector<double> pos, neg;
        for (const auto& f : dataset.fixations()) {
            if (f.image == i) {
                const Cell c = fixation_cell(f, images[i], map.height(), map.width());
                pos.push_back(map(c.y, c.x));
            } else {
                const auto& other = images[f.image];
                const int cx = std::clamp(static_cast<int>(std::floor(f.x / other.width * map.width())), 0,
                                          map.width() - 1);
                const int cy = std::clamp(static_cast<int>(std::floor(f.y / other.height * map.height())), 0,
                                          map.height() - 1);
                neg.push_back(map(cy, cx));
            }
        }
        if (pos.empty() || neg.empty()) continue;
        out[i] = auc_from_scores(pos, neg);
    }
    return out;
}

double shuffled_auc(std::span<const Map2d> maps, const FixationDataset& dataset) {
    std::vector<bool> has(dataset.images().size(), false);
    for (const auto& f : dataset.fixations()) has[f.image] = true;
    if (std::count(has.begin(), has.end(), true) < 2) throw Error("shuffled AUC: need at least two images with fixations");
    const auto per_image = shuffled_auc_per_image(maps, dataset);
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : per_image) {
        if (std::isnan(v)) continue;
        sum += v;
        ++n;
    }
    if (n == 0) throw Error("shuffled AUC: no image could be scored");
    return sum / static_cast<double>(n);
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(10);
    out << "image_id,fixations,model_bits,baseline_bits,gold_bits,information_gain,auc,sauc\n";
    std::size_t total = 0;
    for (const auto& r : report.images) {
        out << r.image_id << ',' << r.fixations << ',' << r.model_bits << ',' << r.baseline_bits << ',' << r.gold_bits
            << ',' << (r.model_bits - r.baseline_bits) << ',' << r.auc << ',' << r.sauc << '\n';
        total += r.fixations;
    }
    out << "ALL," << total << ',' << report.model_bits << ',' << report.baseline_bits << ',' << report.gold_bits << ','
        << report.information_gain << ',' << report.auc << ',' << report.sauc << '\n';
}

std::string report_summary(const EvalReport& report) {
    std::ostringstream s;
    s.precision(6);
    s << std::fixed;
    s << "images = " << report.images.size() << '\n';
    s << "model_bits_per_fixation = " << report.model_bits << '\n';
    s << "baseline_bits_per_fixation = " << report.baseline_bits << '\n';
    s << "gold_bits_per_fixation = " << report.gold_bits << '\n';
    s << "information_gain_bits = " << report.information_gain << '\n';
    if (report.explained_defined) {
        s << "information_gain_explained = " << report.information_gain_explained << '\n';
    } else {
        s << "information_gain_explained = undefined (gold <= baseline)\n";
    }
    s << "auc = " << report.auc << "  [" << to_string(report.auc_convention) << "]\n";
    s << "sauc = " << report.sauc << "  [" << to_string(report.sauc_convention) << "]\n";
    s << "aggregation = " << report.aggregation << '\n';
    return s.str();
}

}  // namespace fixpoint
