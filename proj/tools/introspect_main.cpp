#include <cstdio>
#include <filesystem>
#include <fstream>

#include "CLI11.hpp"
#include "fixpoint/featstack.hpp"
#include "fixpoint/image_io.hpp"
#include "fixpoint/introspect.hpp"
#include "fixpoint/model_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace fixpoint;

namespace {

std::optional<fs::path> find_image(const fs::path& dir, const std::string& id) {
    for (const char* ext : {".png", ".ppm"}) {
        auto p = dir / (id + ext);
        if (fs::exists(p)) return p;
    }
    return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inspect the most weighted features of a model"};
    app.require_subcommand(1);
    auto* report = app.add_subcommand("report", "JSON-lines feature report with receptive-field crops");
    std::string model_path, stacks_dir, images_dir, out_dir;
    std::size_t top = 10, patches = 9;
    report->add_option("--model", model_path)->required();
    report->add_option("--stacks", stacks_dir)->required();
    report->add_option("--images", images_dir, "Source images; crops are skipped without them");
    report->add_option("--top", top)->capture_default_str();
    report->add_option("--patches", patches)->capture_default_str();
    report->add_option("--out", out_dir)->required();
    CLI11_PARSE(app, argc, argv);

    try {
        const auto model = read_model(model_path);
        const auto stacks = read_stack_dir(stacks_dir);
        fs::create_directories(out_dir);

        std::map<std::string, RgbImage> images;
        ImageSizes sizes;
        if (!images_dir.empty()) {
            for (const auto& s : stacks) {
                if (auto p = find_image(images_dir, s.image_id)) {
                    auto img = read_image(*p);
                    sizes[s.image_id] = {img.width, img.height};
                    images.emplace(s.image_id, std::move(img));
                }
            }
        }

        const auto names = model.feature_names();
        const auto rel = relative_weights(model);
        std::ofstream out(fs::path(out_dir) / "report.jsonl");
        if (!out) throw Error("cannot write report in " + out_dir);
        int rank = 0;
        for (const auto& name : top_features(model, std::min(top, names.size()))) {
            ++rank;
            const auto k = static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
            const auto fr = max_response_patches(name, model.weights[k], stacks, patches, sizes);
            nlohmann::json row;
            row["rank"] = rank;
            row["feature"] = fr.feature;
            row["weight"] = fr.weight;
            row["relative_weight"] = rel[k];
            row["sign"] = fr.sign;
            row["top"] = nlohmann::json::array();
            int i = 0;
            for (const auto& t : fr.top) {
                nlohmann::json entry = {{"image_id", t.image_id},
                                        {"x", t.cell.x},
                                        {"y", t.cell.y},
                                        {"response", t.response},
                                        {"box", {t.box.x0, t.box.y0, t.box.x1, t.box.y1}}};
                if (auto it = images.find(t.image_id); it != images.end()) {
                    const auto file = "feature" + std::to_string(rank) + "_patch" + std::to_string(++i) + ".png";
                    write_png(crop(it->second, t.box.x0, t.box.y0, t.box.x1, t.box.y1), fs::path(out_dir) / file);
                    entry["crop"] = file;
                }
                row["top"].push_back(entry);
            }
            out << row.dump() << '\n';
        }
        std::printf("%d features reported to %s\n", rank, (fs::path(out_dir) / "report.jsonl").c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
