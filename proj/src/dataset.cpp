#include "fixpoint/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fixpoint {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

FixationDataset::FixationDataset(std::vector<ImageInfo> images, std::vector<Fixation> fixations) {
    std::vector<std::size_t> order(images.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return images[a].id < images[b].id; });
    std::vector<std::size_t> remap(images.size());
    images_.reserve(images.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& info = images[order[i]];
        if (info.width < 1 || info.height < 1) throw Error("image '" + info.id + "' has zero size");
        if (!images_.empty() && images_.back().id == info.id) throw Error("duplicate image id '" + info.id + "'");
        remap[order[i]] = i;
        images_.push_back(info);
    }
    fixations_ = std::move(fixations);
    for (auto& f : fixations_) {
        if (f.image >= remap.size()) throw Error("fixation references unknown image");
        f.image = remap[f.image];
        if (!std::isfinite(f.x) || !std::isfinite(f.y)) throw Error("non-finite fixation coordinate");
    }
}

std::optional<std::size_t> FixationDataset::find_image(const std::string& id) const {
    auto it = std::lower_bound(images_.begin(), images_.end(), id,
                               [](const ImageInfo& info, const std::string& key) { return info.id < key; });
    if (it == images_.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - images_.begin());
}

std::size_t FixationDataset::image_index(const std::string& id) const {
    auto idx = find_image(id);
    if (!idx) throw Error("unknown image id '" + id + "'");
    return *idx;
}

std::vector<Fixation> FixationDataset::fixations_on(std::size_t image) const {
    std::vector<Fixation> out;
    for (const auto& f : fixations_) {
        if (f.image == image) out.push_back(f);
    }
    return out;
}

std::vector<int> FixationDataset::subjects() const {
    std::set<int> s;
    for (const auto& f : fixations_) s.insert(f.subject);
    return {s.begin(), s.end()};
}

std::uint64_t FixationDataset::fingerprint() const {
    std::uint64_t h = fnv1a("fixations");
    for (const auto& f : fixations_) {
        char buf[sizeof(std::size_t) + sizeof(int) + 2 * sizeof(double)];
        std::memcpy(buf, &f.image, sizeof(std::size_t));
        std::memcpy(buf + sizeof(std::size_t), &f.subject, sizeof(int));
        std::memcpy(buf + sizeof(std::size_t) + sizeof(int), &f.x, sizeof(double));
        std::memcpy(buf + sizeof(std::size_t) + sizeof(int) + sizeof(double), &f.y, sizeof(double));
        h = fnv1a(std::string_view(buf, sizeof(buf)), h);
    }
    return h;
}

Cell fixation_cell(const Fixation& fixation, const ImageInfo& image, int grid_height, int grid_width) {
    if (fixation.x < 0.0 || fixation.y < 0.0 || fixation.x > image.width || fixation.y > image.height) {
        std::ostringstream msg;
        msg << "fixation (" << fixation.x << ", " << fixation.y << ") outside image '" << image.id << "' of size "
            << image.width << "x" << image.height;
        throw Error(msg.str());
    }
    const double sx = static_cast<double>(image.width) / grid_width;
    const double sy = static_cast<double>(image.height) / grid_height;
    int cx = static_cast<int>(std::floor(fixation.x / sx));
    int cy = static_cast<int>(std::floor(fixation.y / sy));
    return {std::min(cx, grid_width - 1), std::min(cy, grid_height - 1)};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out(1);
    for (char c : line) {
        if (c == ',') {
            out.emplace_back();
        } else if (c != '\r') {
            out.back().push_back(c);
        }
    }
    for (auto& field : out) {
        const auto b = field.find_first_not_of(' ');
        const auto e = field.find_last_not_of(' ');
        field = b == std::string::npos ? std::string() : field.substr(b, e - b + 1);
    }
    return out;
}

}  // namespace

FixationDataset read_fixations_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open fixation file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error("empty fixation file " + path.string());
    const auto header = split_csv_line(line);
    const std::vector<std::string> expected = {"image_id", "width", "height", "subject", "x", "y"};
    if (header != expected) throw Error("fixation CSV header must be image_id,width,height,subject,x,y");

    std::vector<ImageInfo> images;
    std::map<std::string, std::size_t> index;
    std::vector<Fixation> fixations;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 6) throw Error("fixation CSV line " + std::to_string(line_no) + ": expected 6 fields");
        try {
            const int w = std::stoi(fields[1]);
            const int h = std::stoi(fields[2]);
            auto [it, inserted] = index.emplace(fields[0], images.size());
            if (inserted) {
                images.push_back({fields[0], w, h});
            } else if (images[it->second].width != w || images[it->second].height != h) {
                throw Error("inconsistent size for image '" + fields[0] + "'");
            }
            // Rows with an empty subject only declare an image.
            if (fields[3].empty()) continue;
            fixations.push_back({it->second, std::stoi(fields[3]), std::stod(fields[4]), std::stod(fields[5])});
        } catch (const std::logic_error&) {
            throw Error("fixation CSV line " + std::to_string(line_no) + ": malformed number");
        }
    }
    return FixationDataset(std::move(images), std::move(fixations));
}

void write_fixations_csv(const FixationDataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "image_id,width,height,subject,x,y\n";
    out.precision(17);
    std::vector<bool> seen(dataset.images().size(), false);
    for (const auto& f : dataset.fixations()) {
        const auto& img = dataset.image(f.image);
        seen[f.image] = true;
        out << img.id << ',' << img.width << ',' << img.height << ',' << f.subject << ',' << f.x << ',' << f.y
            << '\n';
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) {
            const auto& img = dataset.image(i);
            out << img.id << ',' << img.width << ',' << img.height << ",,,\n";
        }
    }
}

}  // namespace fixpoint
