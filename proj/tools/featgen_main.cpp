#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "fixpoint/featgen.hpp"
#include "fixpoint/image_io.hpp"

namespace fs = std::filesystem;
using namespace fixpoint;

int main(int argc, char** argv) {
    CLI::App app{"Filter-bank feature stacks"};
    app.require_subcommand(1);
    auto* extract_cmd = app.add_subcommand("extract", "Write one .fstk per image");
    std::string spec_path, images_dir, out_dir;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    extract_cmd->add_option("--spec", spec_path, "Filter-bank spec (JSON)")->required();
    extract_cmd->add_option("--images", images_dir, "Directory of .png/.ppm images")->required();
    extract_cmd->add_option("--out", out_dir, "Output directory")->required();
    extract_cmd->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        const auto spec = read_filter_bank_spec(spec_path);
        std::vector<fs::path> inputs;
        for (const auto& e : fs::directory_iterator(images_dir)) {
            const auto ext = e.path().extension().string();
            if (e.is_regular_file() && (ext == ".png" || ext == ".ppm")) inputs.push_back(e.path());
        }
        std::sort(inputs.begin(), inputs.end());
        fs::create_directories(out_dir);

        std::atomic<std::size_t> next{0};
        std::mutex err_mutex;
        std::vector<std::string> errors;
        auto worker = [&] {
            for (std::size_t i = next++; i < inputs.size(); i = next++) {
                try {
                    const auto id = inputs[i].stem().string();
                    write_stack(extract(read_image(inputs[i]), spec, id), fs::path(out_dir) / (id + ".fstk"));
                } catch (const std::exception& e) {
                    std::lock_guard lock(err_mutex);
                    errors.push_back(inputs[i].string() + ": " + e.what());
                }
            }
        };
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < std::max(1u, jobs); ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        std::sort(errors.begin(), errors.end());
        for (const auto& e : errors) std::fprintf(stderr, "error: %s\n", e.c_str());
        std::printf("%zu of %zu images extracted\n", inputs.size() - errors.size(), inputs.size());
        return errors.empty() ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
