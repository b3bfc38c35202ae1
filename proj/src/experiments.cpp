#include "fixpoint/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "fixpoint/model_io.hpp"
#include "fixpoint/training.hpp"
#include "json.hpp"

namespace fixpoint {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double to_bits(double nats) { return nats / std::numbers::ln2; }

std::string fmt_lambda(double lambda) {
    std::ostringstream s;
    s << lambda;
    return s.str();
}

}  // namespace

// ---- splits --------------------------------------------------------------------

Split make_split(const FixationDataset& dataset, const SplitPolicy& policy) {
    Split split;
    const auto& images = dataset.images();
    std::set<std::string> train;
    switch (policy.kind) {
        case SplitPolicy::Kind::BySize:
            for (const auto& img : images) {
                if (img.width == policy.width && img.height == policy.height) train.insert(img.id);
            }
            break;
        case SplitPolicy::Kind::RandomHalf: {
            std::vector<std::string> ids;
            for (const auto& img : images) ids.push_back(img.id);
            std::mt19937_64 rng(policy.seed);
            for (std::size_t i = ids.size(); i > 1; --i) {
                std::swap(ids[i - 1], ids[rng() % i]);
            }
            train.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>((ids.size() + 1) / 2));
            break;
        }
        case SplitPolicy::Kind::Explicit:
            for (const auto& id : policy.train_images) {
                dataset.image_index(id);
                train.insert(id);
            }
            break;
    }
    if (train.empty()) throw Error("make_split: empty training split");
    for (const auto& img : images) {
        (train.count(img.id) ? split.train_images : split.test_images).push_back(img.id);
    }
    split.train_subjects = dataset.subjects();
    split.test_subjects = split.train_subjects;
    return split;
}

// ---- feature filters -------------------------------------------------------

GroupTable groups_from_featgen(std::span<const FeatureMeta> meta) {
    std::map<std::string, std::pair<std::string, int>> parsed;
    std::set<int> scales;
    for (const auto& m : meta) {
        const auto pos = m.group.rfind("_s");
        if (pos == std::string::npos || pos + 2 >= m.group.size()) {
            throw Error("groups_from_featgen: group '" + m.group + "' is not <type>_s<scale>");
        }
        int scale = 0;
        try {
            scale = std::stoi(m.group.substr(pos + 2));
        } catch (const std::logic_error&) {
            throw Error("groups_from_featgen: group '" + m.group + "' is not <type>_s<scale>");
        }
        parsed[m.group] = {m.group.substr(0, pos), scale};
        scales.insert(scale);
    }
    const std::vector<int> ranked(scales.begin(), scales.end());
    GroupTable table;
    for (const auto& [group, ts] : parsed) {
        const int depth = static_cast<int>(std::lower_bound(ranked.begin(), ranked.end(), ts.second) - ranked.begin()) + 1;
        table[group] = {depth, ts.first};
    }
    return table;
}

std::string FeatureFilter::label() const {
    switch (kind) {
        case Kind::All: return "all";
        case Kind::FromDepthUp: return "from-depth-" + std::to_string(depth);
        case Kind::UpToDepth: return "up-to-depth-" + std::to_string(depth);
        case Kind::ExactlyDepth: return "depth-" + std::to_string(depth);
        case Kind::ByType: return "type-" + type;
        case Kind::Explicit: return "explicit-" + std::to_string(names.size());
    }
    return "?";
}

std::vector<std::string> select_feature_names(const FeatureFilter& filter, std::span<const FeatureMeta> meta,
                                              const GroupTable& groups) {
    const bool needs_groups = filter.kind != FeatureFilter::Kind::All && filter.kind != FeatureFilter::Kind::Explicit;
    std::set<std::string> wanted(filter.names.begin(), filter.names.end());
    if (filter.kind == FeatureFilter::Kind::Explicit) {
        for (const auto& n : filter.names) {
            if (std::none_of(meta.begin(), meta.end(), [&](const FeatureMeta& m) { return m.name == n; })) {
                throw Error("feature filter: unknown feature '" + n + "'");
            }
        }
    }
    std::vector<std::string> out;
    for (const auto& m : meta) {
        bool keep = false;
        if (needs_groups) {
            const auto it = groups.find(m.group);
            if (it == groups.end()) throw Error("feature filter: unknown group '" + m.group + "'");
            const auto& g = it->second;
            switch (filter.kind) {
                case FeatureFilter::Kind::FromDepthUp: keep = g.depth >= filter.depth; break;
                case FeatureFilter::Kind::UpToDepth: keep = g.depth <= filter.depth; break;
                case FeatureFilter::Kind::ExactlyDepth: keep = g.depth == filter.depth; break;
                case FeatureFilter::Kind::ByType: keep = g.type == filter.type; break;
                default: break;
            }
        } else {
            keep = filter.kind == FeatureFilter::Kind::All || wanted.count(m.name) > 0;
        }
        if (keep && !m.degenerate) out.push_back(m.name);
    }
    if (out.empty()) throw Error("feature filter '" + filter.label() + "' selects no usable feature");
    return out;
}

void ExperimentPlan::validate() const {
    if (split.train_images.empty()) throw Error("plan: empty training split");
    std::set<std::string> train(split.train_images.begin(), split.train_images.end());
    for (const auto& id : split.test_images) {
        if (train.count(id)) throw Error("plan: image '" + id + "' is in both train and test splits");
    }
    if (split.train_subjects.size() < 2) throw Error("plan: cross-validation needs at least two training subjects");
    if (lambda_grid.empty()) throw Error("plan: empty lambda grid");
    for (double l : lambda_grid) {
        if (!(l >= 0.0)) throw Error("plan: lambda must be >= 0");
    }
    if (gold_bandwidths.empty()) throw Error("plan: empty gold-standard bandwidth grid");
    optimizer.validate();
}

// ---- evaluation ------------------------------------------------------------

DensityMap average_densities(std::span<const DensityMap> densities) {
    if (densities.empty()) throw Error("average_densities: nothing to average");
    Map2d sum(densities.front().height(), densities.front().width());
    for (const auto& d : densities) {
        if (d.height() != sum.height() || d.width() != sum.width()) throw Error("average_densities: size mismatch");
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += d.grid()[i];
    }
    for (double& v : sum.values()) v /= static_cast<double>(densities.size());
    return DensityMap::from_weights(sum);
}

namespace {

/// The images in `indices` (with their fixations) as a dataset of their own.
FixationDataset subset_dataset(const FixationDataset& dataset, std::span<const std::size_t> indices) {
    std::vector<ImageInfo> infos;
    std::map<std::size_t, std::size_t> remap;
    for (std::size_t i : indices) {
        remap[i] = infos.size();
        infos.push_back(dataset.image(i));
    }
    std::vector<Fixation> fixes;
    for (const auto& f : dataset.fixations()) {
        if (auto it = remap.find(f.image); it != remap.end()) {
            Fixation g = f;
            g.image = it->second;
            fixes.push_back(g);
        }
    }
    return FixationDataset(std::move(infos), std::move(fixes));
}

/// Sum of log gold-standard density (nats) over one subject's fixations on one image,
/// or nullopt when nobody else looked at the image.
std::optional<double> gold_log_sum(const FixationDataset& dataset, std::size_t image, int subject,
                                   std::span<const Fixation> fixes, double bandwidth, int gh, int gw) {
    const auto& info = dataset.image(image);
    bool others = false;
    for (const auto& f : dataset.fixations()) {
        if (f.image == image && f.subject != subject) {
            others = true;
            break;
        }
    }
    if (!others) return std::nullopt;
    const DensityMap gold = fit_gold_standard(dataset, info.id, subject, bandwidth, gh, gw);
    double s = 0.0;
    for (const auto& f : fixes) s += gold.log_at(fixation_cell(f, info, gh, gw));
    return s;
}

double explained_or_nan(double model, double baseline, double gold) {
    return gold > baseline ? information_gain_explained(model, baseline, gold) : kNaN;
}

}  // namespace

EvalReport evaluate_images(const FixationDataset& dataset, std::span<const std::size_t> images,
                           std::span<const DensityMap> model_with_prior, std::span<const DensityMap> model_uniform,
                           std::span<const DensityMap> baseline, double gold_bandwidth) {
    if (model_with_prior.size() != images.size() || model_uniform.size() != images.size() ||
        baseline.size() != images.size()) {
        throw Error("evaluate_images: one density per image required");
    }
    EvalReport report;
    std::vector<Map2d> uniform_maps;
    std::vector<std::size_t> sorted(images.begin(), images.end());
    for (const auto& d : model_uniform) uniform_maps.push_back(d.grid());

    // sAUC over these images only; subset order follows image ids, as does dataset order.
    std::vector<std::size_t> order(images.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return images[a] < images[b]; });
    std::vector<std::size_t> sorted_images;
    std::vector<Map2d> sorted_maps;
    for (std::size_t i : order) {
        sorted_images.push_back(images[i]);
        sorted_maps.push_back(uniform_maps[i]);
    }
    const FixationDataset sub = subset_dataset(dataset, sorted_images);
    std::vector<double> sauc_sorted(order.size(), kNaN);
    if (sub.fixations().size() > 0) sauc_sorted = shuffled_auc_per_image(sorted_maps, sub);
    std::vector<double> sauc(images.size(), kNaN);
    for (std::size_t r = 0; r < order.size(); ++r) sauc[order[r]] = sauc_sorted[r];

    double model_sum = 0.0, base_sum = 0.0, gold_sum = 0.0;
    std::size_t total = 0;
    double auc_sum = 0.0, sauc_sum = 0.0;
    std::size_t auc_n = 0, sauc_n = 0;
    for (std::size_t r = 0; r < images.size(); ++r) {
        const std::size_t idx = images[r];
        const auto& info = dataset.image(idx);
        const auto fixes = dataset.fixations_on(idx);
        if (fixes.empty()) continue;
        const DensityMap& p = model_with_prior[r];
        const DensityMap& b = baseline[r];
        const int gh = p.height(), gw = p.width();

        ImageEval row;
        row.image_id = info.id;
        row.fixations = fixes.size();
        std::vector<Cell> cells;
        double m = 0.0, bl = 0.0;
        for (const auto& f : fixes) {
            const Cell c = fixation_cell(f, info, gh, gw);
            cells.push_back(c);
            m += p.log_at(c);
            bl += b.log_at(c);
        }
        std::map<int, std::vector<Fixation>> by_subject;
        for (const auto& f : fixes) by_subject[f.subject].push_back(f);
        double g = 0.0;
        for (const auto& [subject, sf] : by_subject) {
            if (auto s = gold_log_sum(dataset, idx, subject, sf, gold_bandwidth, gh, gw)) {
                g += *s;
            } else {
                for (const auto& f : sf) g += b.log_at(fixation_cell(f, info, gh, gw));
            }
        }
        const double n = static_cast<double>(fixes.size());
        row.model_bits = to_bits(m / n);
        row.baseline_bits = to_bits(bl / n);
        row.gold_bits = to_bits(g / n);
        row.auc = auc(p.grid(), cells, NonfixationSampler::all_cells(), SaliencyConvention::NonparametricPrior).value;
        row.sauc = sauc[r];
        model_sum += m;
        base_sum += bl;
        gold_sum += g;
        total += fixes.size();
        auc_sum += row.auc;
        ++auc_n;
        if (!std::isnan(row.sauc)) {
            sauc_sum += row.sauc;
            ++sauc_n;
        }
        report.images.push_back(std::move(row));
    }
    if (total == 0) throw Error("evaluate_images: no fixations on the evaluated images");
    report.model_bits = to_bits(model_sum / static_cast<double>(total));
    report.baseline_bits = to_bits(base_sum / static_cast<double>(total));
    report.gold_bits = to_bits(gold_sum / static_cast<double>(total));
    report.information_gain = report.model_bits - report.baseline_bits;
    report.explained_defined = report.gold_bits > report.baseline_bits;
    report.information_gain_explained =
        report.explained_defined
            ? information_gain_explained(report.model_bits, report.baseline_bits, report.gold_bits)
            : kNaN;
    report.auc = auc_sum / static_cast<double>(auc_n);
    report.sauc = sauc_n > 0 ? sauc_sum / static_cast<double>(sauc_n) : kNaN;
    return report;
}

// ---- cross-validated training ------------------------------------------------

ExperimentResult run_cv_training(const ExperimentPlan& plan, std::span<const FeatureStack> stacks,
                                 const FixationDataset& dataset) {
    plan.validate();
    std::map<std::string, const FeatureStack*> by_id;
    for (const auto& s : stacks) by_id[s.image_id] = &s;
    auto stack_of = [&](const std::string& id) -> const FeatureStack& {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error("run_cv_training: no feature stack for image '" + id + "'");
        return *it->second;
    };

    std::vector<std::size_t> train_idx, test_idx;
    for (const auto& id : plan.split.train_images) train_idx.push_back(dataset.image_index(id));
    for (const auto& id : plan.split.test_images) test_idx.push_back(dataset.image_index(id));
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    const std::set<std::size_t> train_set(train_idx.begin(), train_idx.end());
    const std::set<int> train_subjects(plan.split.train_subjects.begin(), plan.split.train_subjects.end());

    const FixationDataset base = dataset.filtered(
        [&](const Fixation& f) { return train_set.count(f.image) > 0 && train_subjects.count(f.subject) > 0; });
    const FixationDataset test_data = dataset.filtered([&](const Fixation& f) {
        return std::binary_search(test_idx.begin(), test_idx.end(), f.image);
    });

    const auto names =
        select_feature_names(plan.filter, stack_of(dataset.image(train_idx.front()).id).meta, plan.groups);
    std::vector<FeatureStack> train_stacks, test_stacks;
    for (std::size_t i : train_idx) train_stacks.push_back(select_features(stack_of(dataset.image(i).id), names));
    for (std::size_t i : test_idx) test_stacks.push_back(select_features(stack_of(dataset.image(i).id), names));

    std::vector<Cell> grids(dataset.images().size(), Cell{1, 1});
    for (std::size_t r = 0; r < train_idx.size(); ++r) grids[train_idx[r]] = {train_stacks[r].width, train_stacks[r].height};
    for (std::size_t r = 0; r < test_idx.size(); ++r) grids[test_idx[r]] = {test_stacks[r].width, test_stacks[r].height};

    ExperimentResult result;
    result.gold_bandwidth = select_bandwidth(base, grids, plan.gold_bandwidths);

    // Gold-standard log sums per (image, subject) on the training images.
    std::map<std::pair<std::size_t, int>, std::vector<Fixation>> groups;
    for (const auto& f : base.fixations()) groups[{f.image, f.subject}].push_back(f);
    std::map<std::pair<std::size_t, int>, std::optional<double>> gold;
    for (const auto& [key, fixes] : groups) {
        const auto& g = grids[key.first];
        gold[key] = gold_log_sum(base, key.first, key.second, fixes, result.gold_bandwidth, g.y, g.x);
    }

    // Test-image priors come from every training fixation.
    std::vector<DensityMap> test_priors, test_uniform;
    if (!test_idx.empty()) {
        const auto prior = fit_histogram_prior(base, plan.histogram.bins, plan.histogram.smoothing);
        for (const auto& s : test_stacks) {
            test_priors.push_back(render_prior(prior, s.height, s.width));
            test_uniform.push_back(DensityMap::uniform(s.height, s.width));
        }
    }
    std::vector<DensityMap> train_uniform;
    for (const auto& s : train_stacks) train_uniform.push_back(DensityMap::uniform(s.height, s.width));

    const std::string label = plan.filter.label();
    for (double lambda : plan.lambda_grid) {
        std::vector<std::vector<DensityMap>> fold_train_uniform, fold_test_prior, fold_test_uniform;
        std::vector<std::size_t> ens_cells;
        for (int subject : plan.split.train_subjects) {
            const FixationDataset fold = base.filtered([&](const Fixation& f) { return f.subject != subject; });
            if (fold.fixations().empty()) {
                throw Error("run_cv_training: fold holding out subject " + std::to_string(subject) +
                            " has no training fixations");
            }
            TrainingSetup setup;
            setup.lambda = lambda;
            setup.optimizer = plan.optimizer;
            setup.optimizer.seed = plan.seed;
            setup.histogram = plan.histogram;
            std::ostringstream desc;
            desc << train_idx.size() << " train images; subjects";
            for (int s : plan.split.train_subjects) {
                if (s != subject) desc << ' ' << s;
            }
            desc << "; held out " << subject << "; filter " << label;
            setup.split_description = desc.str();
            TrainedModel trained = train_model(train_stacks, fold, setup);

            CellResult cell;
            cell.filter = label;
            cell.lambda = lambda;
            cell.held_out_subject = subject;

            double tr_m = 0, tr_b = 0, tr_g = 0, te_m = 0, te_b = 0, te_g = 0;
            std::size_t tr_n = 0, te_n = 0;
            std::vector<DensityMap> uniform_maps;
            for (std::size_t r = 0; r < train_idx.size(); ++r) {
                const std::size_t idx = train_idx[r];
                const auto& info = dataset.image(idx);
                const FeatureStack& stack = train_stacks[r];
                const DensityMap prior = render_prior(
                    fit_histogram_prior(fold, plan.histogram.bins, plan.histogram.smoothing, info.id), stack.height,
                    stack.width);
                const DensityMap p = predict(trained.model, stack, prior);
                uniform_maps.push_back(predict(trained.model, stack, train_uniform[r]));
                for (const auto& [key, fixes] : groups) {
                    if (key.first != idx) continue;
                    double m = 0, b = 0;
                    for (const auto& f : fixes) {
                        const Cell c = fixation_cell(f, info, stack.height, stack.width);
                        m += p.log_at(c);
                        b += prior.log_at(c);
                    }
                    const double g = gold.at(key).value_or(b);
                    if (key.second == subject) {
                        te_m += m, te_b += b, te_g += g, te_n += fixes.size();
                    } else {
                        tr_m += m, tr_b += b, tr_g += g, tr_n += fixes.size();
                    }
                }
            }
            if (tr_n > 0) {
                cell.train_subjects_bits = to_bits(tr_m / tr_n);
                cell.train_subjects_baseline_bits = to_bits(tr_b / tr_n);
                cell.train_subjects_gold_bits = to_bits(tr_g / tr_n);
                cell.train_subjects_explained = explained_or_nan(cell.train_subjects_bits,
                                                                 cell.train_subjects_baseline_bits,
                                                                 cell.train_subjects_gold_bits);
            }
            cell.test_subject_fixations = te_n;
            if (te_n > 0) {
                cell.test_subject_bits = to_bits(te_m / te_n);
                cell.test_subject_baseline_bits = to_bits(te_b / te_n);
                cell.test_subject_gold_bits = to_bits(te_g / te_n);
                cell.test_subject_explained = explained_or_nan(cell.test_subject_bits, cell.test_subject_baseline_bits,
                                                               cell.test_subject_gold_bits);
            } else {
                cell.test_subject_bits = cell.test_subject_baseline_bits = cell.test_subject_gold_bits = kNaN;
                cell.test_subject_explained = kNaN;
            }
            fold_train_uniform.push_back(std::move(uniform_maps));

            std::vector<DensityMap> tp, tu;
            for (std::size_t r = 0; r < test_idx.size(); ++r) {
                tp.push_back(predict(trained.model, test_stacks[r], test_priors[r]));
                tu.push_back(predict(trained.model, test_stacks[r], test_uniform[r]));
            }
            fold_test_prior.push_back(std::move(tp));
            fold_test_uniform.push_back(std::move(tu));

            cell.model = std::move(trained.model);
            cell.trace = std::move(trained.trace);
            ens_cells.push_back(result.cells.size());
            result.cells.push_back(std::move(cell));
        }

        auto ensemble_of = [](const std::vector<std::vector<DensityMap>>& folds, std::size_t r) {
            std::vector<DensityMap> members;
            for (const auto& f : folds) members.push_back(f[r]);
            return average_densities(members);
        };

        EnsembleResult ens;
        ens.filter = label;
        ens.lambda = lambda;
        {
            std::vector<Map2d> maps(dataset.images().size());
            for (std::size_t r = 0; r < train_idx.size(); ++r) {
                maps[train_idx[r]] = ensemble_of(fold_train_uniform, r).grid();
            }
            std::size_t with_fix = 0;
            for (std::size_t i : train_idx) with_fix += base.fixations_on(i).empty() ? 0 : 1;
            ens.train_images_sauc = with_fix >= 2 ? shuffled_auc(maps, base) : kNaN;
        }
        if (!test_idx.empty() && !test_data.fixations().empty()) {
            std::vector<DensityMap> ep, eu;
            for (std::size_t r = 0; r < test_idx.size(); ++r) {
                ep.push_back(ensemble_of(fold_test_prior, r));
                eu.push_back(ensemble_of(fold_test_uniform, r));
            }
            ens.test_images = evaluate_images(test_data, test_idx, ep, eu, test_priors, result.gold_bandwidth);
        }
        double num = 0.0;
        std::size_t den = 0;
        for (std::size_t c : ens_cells) {
            const auto& cell = result.cells[c];
            if (cell.test_subject_fixations == 0) continue;
            num += cell.test_subject_bits * static_cast<double>(cell.test_subject_fixations);
            den += cell.test_subject_fixations;
        }
        ens.mean_held_out_bits = den > 0 ? num / static_cast<double>(den) : kNaN;
        result.ensembles.push_back(std::move(ens));
    }
    return result;
}

std::vector<FeatureFilter> layer_subset_filters(const GroupTable& groups) {
    std::set<int> depths;
    std::set<std::string> types;
    for (const auto& [name, g] : groups) {
        depths.insert(g.depth);
        types.insert(g.type);
    }
    std::vector<FeatureFilter> out;
    for (auto kind : {FeatureFilter::Kind::FromDepthUp, FeatureFilter::Kind::UpToDepth,
                      FeatureFilter::Kind::ExactlyDepth}) {
        for (int d : depths) {
            FeatureFilter f;
            f.kind = kind;
            f.depth = d;
            out.push_back(f);
        }
    }
    for (const auto& t : types) {
        FeatureFilter f;
        f.kind = FeatureFilter::Kind::ByType;
        f.type = t;
        out.push_back(f);
    }
    return out;
}

std::vector<ExperimentResult> run_layer_subsets(const ExperimentPlan& base, std::span<const FeatureStack> stacks,
                                                const FixationDataset& dataset) {
    if (base.groups.empty()) throw Error("run_layer_subsets: the plan has no group table");
    std::vector<ExperimentResult> out;
    for (const auto& filter : layer_subset_filters(base.groups)) {
        ExperimentPlan plan = base;
        plan.filter = filter;
        out.push_back(run_cv_training(plan, stacks, dataset));
    }
    return out;
}

double select_lambda(const ExperimentResult& result) {
    std::map<double, std::pair<double, std::size_t>> scores;
    for (const auto& c : result.cells) {
        auto& s = scores[c.lambda];
        if (c.test_subject_fixations == 0) continue;
        s.first += c.test_subject_bits * static_cast<double>(c.test_subject_fixations);
        s.second += c.test_subject_fixations;
    }
    if (scores.empty()) throw Error("select_lambda: no cells");
    double best = scores.begin()->first;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& [lambda, s] : scores) {
        const double score = s.second > 0 ? s.first / static_cast<double>(s.second) : -std::numeric_limits<double>::infinity();
        if (score >= best_score) {
            best_score = score;
            best = lambda;
        }
    }
    return best;
}

LambdaSweep run_lambda_sweep(const ExperimentPlan& plan, std::span<const FeatureStack> stacks,
                             const FixationDataset& dataset) {
    if (plan.lambda_grid.empty()) throw Error("run_lambda_sweep: empty lambda grid");
    LambdaSweep sweep;
    sweep.result = run_cv_training(plan, stacks, dataset);
    sweep.selected_lambda = select_lambda(sweep.result);
    return sweep;
}

// ---- plan files and run directories --------------------------------------------

namespace {

using nlohmann::json;

const std::map<std::string, FeatureFilter::Kind>& filter_kinds() {
    static const std::map<std::string, FeatureFilter::Kind> kinds = {
        {"all", FeatureFilter::Kind::All},
        {"from-depth-up", FeatureFilter::Kind::FromDepthUp},
        {"up-to-depth", FeatureFilter::Kind::UpToDepth},
        {"exactly-depth", FeatureFilter::Kind::ExactlyDepth},
        {"by-type", FeatureFilter::Kind::ByType},
        {"explicit", FeatureFilter::Kind::Explicit}};
    return kinds;
}

std::string filter_kind_name(FeatureFilter::Kind kind) {
    for (const auto& [name, k] : filter_kinds()) {
        if (k == kind) return name;
    }
    return "all";
}

}  // namespace

PlanFile read_plan(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    PlanFile pf;
    try {
        const json doc = json::parse(in);
        pf.experiment = doc.value("experiment", "cv");
        if (pf.experiment != "cv" && pf.experiment != "layers" && pf.experiment != "sweep") {
            throw Error(path.string() + ": experiment must be cv, layers or sweep");
        }
        if (doc.contains("split")) {
            const auto& s = doc.at("split");
            const std::string policy = s.value("policy", "random-half");
            if (policy == "by-size") {
                pf.split_policy = SplitPolicy::by_size(s.value("width", 1024), s.value("height", 768));
            } else if (policy == "random-half") {
                pf.split_policy = SplitPolicy::random_half(s.value("seed", std::uint64_t{0}));
            } else if (policy == "explicit") {
                pf.split_policy = SplitPolicy::explicit_images(s.at("train_images").get<std::vector<std::string>>());
            } else {
                throw Error(path.string() + ": unknown split policy '" + policy + "'");
            }
        }
        auto& plan = pf.plan;
        if (doc.contains("filter")) {
            const auto& f = doc.at("filter");
            const auto kind = f.value("kind", "all");
            const auto it = filter_kinds().find(kind);
            if (it == filter_kinds().end()) throw Error(path.string() + ": unknown filter kind '" + kind + "'");
            plan.filter.kind = it->second;
            plan.filter.depth = f.value("depth", 0);
            plan.filter.type = f.value("type", "");
            plan.filter.names = f.value("names", std::vector<std::string>{});
        }
        plan.lambda_grid = doc.value("lambda_grid", plan.lambda_grid);
        plan.seed = doc.value("seed", plan.seed);
        if (doc.contains("optimizer")) {
            const auto& o = doc.at("optimizer");
            plan.optimizer.max_iterations = o.value("max_iterations", plan.optimizer.max_iterations);
            plan.optimizer.gradient_tolerance = o.value("gradient_tolerance", plan.optimizer.gradient_tolerance);
            plan.optimizer.history_size = o.value("history_size", plan.optimizer.history_size);
            plan.optimizer.minibatch_count = o.value("minibatch_count", plan.optimizer.minibatch_count);
        }
        if (doc.contains("histogram")) {
            plan.histogram.bins = doc.at("histogram").value("bins", plan.histogram.bins);
            plan.histogram.smoothing = doc.at("histogram").value("smoothing", plan.histogram.smoothing);
        }
        plan.gold_bandwidths = doc.value("gold_bandwidths", plan.gold_bandwidths);
        if (doc.contains("groups")) {
            for (const auto& [name, g] : doc.at("groups").items()) {
                plan.groups[name] = {g.at("depth").get<int>(), g.at("type").get<std::string>()};
            }
        }
    } catch (const json::exception& e) {
        throw Error(path.string() + ": malformed plan: " + e.what());
    }
    return pf;
}

void write_plan(const PlanFile& pf, const std::filesystem::path& path) {
    json doc;
    doc["experiment"] = pf.experiment;
    const auto& sp = pf.split_policy;
    switch (sp.kind) {
        case SplitPolicy::Kind::BySize:
            doc["split"] = {{"policy", "by-size"}, {"width", sp.width}, {"height", sp.height}};
            break;
        case SplitPolicy::Kind::RandomHalf: doc["split"] = {{"policy", "random-half"}, {"seed", sp.seed}}; break;
        case SplitPolicy::Kind::Explicit:
            doc["split"] = {{"policy", "explicit"}, {"train_images", sp.train_images}};
            break;
    }
    const auto& plan = pf.plan;
    doc["filter"] = {{"kind", filter_kind_name(plan.filter.kind)},
                     {"depth", plan.filter.depth},
                     {"type", plan.filter.type},
                     {"names", plan.filter.names}};
    doc["lambda_grid"] = plan.lambda_grid;
    doc["seed"] = plan.seed;
    doc["optimizer"] = {{"max_iterations", plan.optimizer.max_iterations},
                        {"gradient_tolerance", plan.optimizer.gradient_tolerance},
                        {"history_size", plan.optimizer.history_size},
                        {"minibatch_count", plan.optimizer.minibatch_count}};
    doc["histogram"] = {{"bins", plan.histogram.bins}, {"smoothing", plan.histogram.smoothing}};
    doc["gold_bandwidths"] = plan.gold_bandwidths;
    json groups = json::object();
    for (const auto& [name, g] : plan.groups) groups[name] = {{"depth", g.depth}, {"type", g.type}};
    doc["groups"] = groups;
    doc["resolved_split"] = {{"train_images", plan.split.train_images},
                             {"test_images", plan.split.test_images},
                             {"subjects", plan.split.train_subjects}};
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

void write_run_directory(const PlanFile& plan, std::span<const ExperimentResult> results,
                         const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "models");
    write_plan(plan, dir / "plan.json");

    std::ofstream cells(dir / "cells.csv"), ens(dir / "ensembles.csv"), long_csv(dir / "long.csv");
    if (!cells || !ens || !long_csv) throw Error("cannot write run directory " + dir.string());
    for (auto* s : {&cells, &ens, &long_csv}) s->precision(10);
    cells << "filter,lambda,held_out_subject,iterations,converged,train_subjects_bits,train_subjects_baseline_bits,"
             "train_subjects_gold_bits,train_subjects_explained,test_subject_bits,test_subject_baseline_bits,"
             "test_subject_gold_bits,test_subject_explained\n";
    ens << "filter,lambda,mean_held_out_bits,train_images_sauc,test_images_sauc,test_images_auc,test_images_bits,"
           "test_images_baseline_bits,test_images_gold_bits,test_images_explained\n";
    long_csv << "filter,lambda,subject,surface,metric,value\n";

    for (const auto& result : results) {
        for (const auto& c : result.cells) {
            const std::string stem = c.filter + "_lambda" + fmt_lambda(c.lambda) + "_subject" +
                                     std::to_string(c.held_out_subject);
            write_model(c.model, dir / "models" / (stem + ".json"));
            write_trace_csv(c.trace, dir / "models" / (stem + ".trace.csv"));
            cells << c.filter << ',' << c.lambda << ',' << c.held_out_subject << ',' << c.trace.iterations << ','
                  << c.trace.converged << ',' << c.train_subjects_bits << ',' << c.train_subjects_baseline_bits << ','
                  << c.train_subjects_gold_bits << ',' << c.train_subjects_explained << ',' << c.test_subject_bits
                  << ',' << c.test_subject_baseline_bits << ',' << c.test_subject_gold_bits << ','
                  << c.test_subject_explained << '\n';
            auto row = [&](const char* surface, const char* metric, double v) {
                long_csv << c.filter << ',' << c.lambda << ',' << c.held_out_subject << ',' << surface << ',' << metric
                         << ',' << v << '\n';
            };
            row("train-images/train-subjects", "bits", c.train_subjects_bits);
            row("train-images/train-subjects", "information_gain_explained", c.train_subjects_explained);
            row("train-images/test-subject", "bits", c.test_subject_bits);
            row("train-images/test-subject", "information_gain_explained", c.test_subject_explained);
        }
        for (const auto& e : result.ensembles) {
            const auto& t = e.test_images;
            ens << e.filter << ',' << e.lambda << ',' << e.mean_held_out_bits << ',' << e.train_images_sauc << ','
                << t.sauc << ',' << t.auc << ',' << t.model_bits << ',' << t.baseline_bits << ',' << t.gold_bits << ','
                << t.information_gain_explained << '\n';
            auto row = [&](const char* surface, const char* metric, double v) {
                long_csv << e.filter << ',' << e.lambda << ",ensemble," << surface << ',' << metric << ',' << v << '\n';
            };
            row("train-images", "sauc", e.train_images_sauc);
            row("test-images", "sauc", t.sauc);
            row("test-images", "auc", t.auc);
            row("test-images", "bits", t.model_bits);
            row("test-images", "information_gain_explained", t.information_gain_explained);
        }
    }
}

}  // namespace fixpoint
