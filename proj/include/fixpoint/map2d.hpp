#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "fixpoint/error.hpp"

namespace fixpoint {

/// Dense row-major real-valued grid.
class Map2d {
public:
    Map2d() = default;
    Map2d(int height, int width, double fill = 0.0)
        : height_(height), width_(width), data_(checked_size(height, width), fill) {}
    Map2d(int height, int width, std::vector<double> values)
        : height_(height), width_(width), data_(std::move(values)) {
        if (data_.size() != checked_size(height, width)) {
            throw Error("Map2d: value count does not match dimensions");
        }
    }

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int y, int x) { return data_[index(y, x)]; }
    double operator()(int y, int x) const { return data_[index(y, x)]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    const std::vector<double>& storage() const { return data_; }

    bool same_shape(const Map2d& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const Map2d&, const Map2d&) = default;

private:
    static std::size_t checked_size(int height, int width) {
        if (height < 0 || width < 0) throw Error("Map2d: negative dimension");
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }
    std::size_t index(int y, int x) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

}  // namespace fixpoint
