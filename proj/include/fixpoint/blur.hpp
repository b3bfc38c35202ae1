#pragma once

#include <vector>

#include "fixpoint/map2d.hpp"

namespace fixpoint {

/// One axis of the truncated Gaussian blur. Taps are cut at |d| <= 4 sigma and
/// renormalized per output position, so each row of the operator sums to one.
class GaussianKernel1d {
public:
    GaussianKernel1d(int length, double sigma);

    int length() const { return length_; }
    double sigma() const { return sigma_; }
    int radius() const { return radius_; }

    int first(int i) const { return first_[i]; }
    int count(int i) const { return count_[i]; }
    /// Normalized tap weight for output i, input first(i) + t.
    double tap(int i, int t) const { return taps_[offsets_[i] + t]; }
    /// d tap / d sigma.
    double dtap(int i, int t) const { return dtaps_[offsets_[i] + t]; }

private:
    int length_;
    double sigma_;
    int radius_;
    std::vector<int> first_, count_, offsets_;
    std::vector<double> taps_, dtaps_;
};

/// Separable 2-D blur: rows along x, then columns along y.
class GaussianBlur {
public:
    GaussianBlur(int height, int width, double sigma);

    double sigma() const { return x_.sigma(); }

    Map2d apply(const Map2d& in) const;
    /// Adjoint operator, used to pull gradients back through the blur.
    Map2d apply_transpose(const Map2d& in) const;
    /// d(apply(in)) / d sigma.
    Map2d apply_sigma_derivative(const Map2d& in) const;

private:
    enum class Mode { Forward, Transpose, Derivative };
    static Map2d along_x(const Map2d& in, const GaussianKernel1d& k, Mode mode);
    static Map2d along_y(const Map2d& in, const GaussianKernel1d& k, Mode mode);

    GaussianKernel1d y_;
    GaussianKernel1d x_;
};

inline Map2d gaussian_blur(const Map2d& in, double sigma) {
    return GaussianBlur(in.height(), in.width(), sigma).apply(in);
}

}  // namespace fixpoint
