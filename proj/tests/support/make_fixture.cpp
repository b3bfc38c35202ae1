// Writes a small end-to-end fixture: images/, fixations.csv, spec.json, plan.json.
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fixpoint/experiments.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace fixpoint;

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: make_fixture <dir>\n");
        return 2;
    }
    const fs::path dir = argv[1];
    fs::create_directories(dir / "images");
    fixtest::Rng rng(2024);

    std::vector<ImageInfo> infos;
    std::vector<Fixation> fixations;
    const int size = 48, grid = 24;
    const auto center = DensityMap::from_log_weights(fixtest::center_log_density(grid, grid));
    for (std::size_t i = 0; i < 8; ++i) {
        char id[16];
        std::snprintf(id, sizeof(id), "img%02zu", i);
        write_png(fixtest::synthetic_image(rng, size), dir / "images" / (std::string(id) + ".png"));
        infos.push_back({id, size, size});
        for (int subject = 1; subject <= 3; ++subject) {
            for (int n = 0; n < 15; ++n) {
                fixations.push_back(fixtest::pixel_in_cell(fixtest::sample_cell(center, rng), i, infos.back(), grid,
                                                           grid, subject, rng));
            }
        }
    }
    write_fixations_csv(FixationDataset(infos, fixations), dir / "fixations.csv");

    FilterBankSpec spec;
    spec.scales = {2, 4};
    spec.orientations = 1;
    write_filter_bank_spec(spec, dir / "spec.json");

    PlanFile plan;
    plan.experiment = "cv";
    plan.split_policy = SplitPolicy::random_half(3);
    plan.plan.lambda_grid = {1e-3};
    plan.plan.optimizer.max_iterations = 20;
    plan.plan.histogram.bins = 8;
    plan.plan.gold_bandwidths = {1.0, 2.0};
    write_plan(plan, dir / "plan.json");
    return 0;
}
