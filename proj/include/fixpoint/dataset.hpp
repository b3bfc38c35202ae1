#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fixpoint/map2d.hpp"

namespace fixpoint {

struct ImageInfo {
    std::string id;
    int width = 0;
    int height = 0;
};

/// One gaze event. `image` indexes FixationDataset::images(); x/y are pixels.
struct Fixation {
    std::size_t image = 0;
    int subject = 0;
    double x = 0.0;
    double y = 0.0;
};

/// Images (kept sorted by id) and the fixations recorded on them.
class FixationDataset {
public:
    FixationDataset() = default;
    FixationDataset(std::vector<ImageInfo> images, std::vector<Fixation> fixations);

    const std::vector<ImageInfo>& images() const { return images_; }
    const std::vector<Fixation>& fixations() const { return fixations_; }

    std::optional<std::size_t> find_image(const std::string& id) const;
    std::size_t image_index(const std::string& id) const;
    const ImageInfo& image(std::size_t index) const { return images_.at(index); }

    /// Fixations on one image, in dataset order.
    std::vector<Fixation> fixations_on(std::size_t image) const;
    /// Sorted distinct subject ids.
    std::vector<int> subjects() const;

    /// Keeps the fixations matching `keep`; the image table is unchanged.
    template <typename Pred>
    FixationDataset filtered(Pred keep) const {
        FixationDataset out;
        out.images_ = images_;
        for (const auto& f : fixations_) {
            if (keep(f)) out.fixations_.push_back(f);
        }
        return out;
    }

    /// Order-sensitive hash of the fixation records.
    std::uint64_t fingerprint() const;

private:
    std::vector<ImageInfo> images_;
    std::vector<Fixation> fixations_;
};

/// Maps a pixel coordinate onto a grid cell by floor(coord / (image_size / grid_size)).
/// Coordinates equal to the far image edge clamp to the last cell.
Cell fixation_cell(const Fixation& fixation, const ImageInfo& image, int grid_height, int grid_width);

/// CSV with header `image_id,width,height,subject,x,y`.
FixationDataset read_fixations_csv(const std::filesystem::path& path);
void write_fixations_csv(const FixationDataset& dataset, const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace fixpoint
