#include "fixpoint/blur.hpp"

#include <algorithm>
#include <cmath>

namespace fixpoint {

GaussianKernel1d::GaussianKernel1d(int length, double sigma)
    : length_(length), sigma_(sigma), radius_(0) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error("blur: sigma must be positive and finite");
    if (length < 1) throw Error("blur: empty axis");
    radius_ = static_cast<int>(std::min(std::floor(4.0 * sigma), static_cast<double>(length)));
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const double inv_s3 = 1.0 / (sigma * sigma * sigma);
    first_.resize(length);
    count_.resize(length);
    offsets_.resize(length);
    std::vector<double> g;
    for (int i = 0; i < length; ++i) {
        const int lo = std::max(0, i - radius_);
        const int hi = std::min(length - 1, i + radius_);
        first_[i] = lo;
        count_[i] = hi - lo + 1;
        offsets_[i] = static_cast<int>(taps_.size());
        double z = 0.0, zp = 0.0;
        g.assign(count_[i], 0.0);
        for (int j = lo; j <= hi; ++j) {
            const double d2 = static_cast<double>(j - i) * (j - i);
            g[j - lo] = std::exp(-d2 * inv2s2);
            z += g[j - lo];
            zp += g[j - lo] * d2 * inv_s3;
        }
        for (int j = lo; j <= hi; ++j) {
            const double d2 = static_cast<double>(j - i) * (j - i);
            const double tap = g[j - lo] / z;
            taps_.push_back(tap);
            dtaps_.push_back(tap * (d2 * inv_s3 - zp / z));
        }
    }
}

GaussianBlur::GaussianBlur(int height, int width, double sigma) : y_(height, sigma), x_(width, sigma) {}

Map2d GaussianBlur::along_x(const Map2d& in, const GaussianKernel1d& k, Mode mode) {
    const int H = in.height();
    const int W = in.width();
    Map2d out(H, W);
    for (int y = 0; y < H; ++y) {
        for (int i = 0; i < W; ++i) {
            const int f = k.first(i);
            const int n = k.count(i);
            if (mode == Mode::Transpose) {
                const double v = in(y, i);
                for (int t = 0; t < n; ++t) out(y, f + t) += k.tap(i, t) * v;
            } else {
                double acc = 0.0;
                for (int t = 0; t < n; ++t) {
                    acc += (mode == Mode::Forward ? k.tap(i, t) : k.dtap(i, t)) * in(y, f + t);
                }
                out(y, i) = acc;
            }
        }
    }
    return out;
}

Map2d GaussianBlur::along_y(const Map2d& in, const GaussianKernel1d& k, Mode mode) {
    const int H = in.height();
    const int W = in.width();
    Map2d out(H, W);
    for (int i = 0; i < H; ++i) {
        const int f = k.first(i);
        const int n = k.count(i);
        for (int t = 0; t < n; ++t) {
            const double w = mode == Mode::Derivative ? k.dtap(i, t) : k.tap(i, t);
            if (mode == Mode::Transpose) {
                for (int x = 0; x < W; ++x) out(f + t, x) += w * in(i, x);
            } else {
                for (int x = 0; x < W; ++x) out(i, x) += w * in(f + t, x);
            }
        }
    }
    return out;
}

Map2d GaussianBlur::apply(const Map2d& in) const {
    if (in.height() != y_.length() || in.width() != x_.length()) throw Error("blur: map size mismatch");
    return along_y(along_x(in, x_, Mode::Forward), y_, Mode::Forward);
}

Map2d GaussianBlur::apply_transpose(const Map2d& in) const {
    if (in.height() != y_.length() || in.width() != x_.length()) throw Error("blur: map size mismatch");
    return along_x(along_y(in, y_, Mode::Transpose), x_, Mode::Transpose);
}

Map2d GaussianBlur::apply_sigma_derivative(const Map2d& in) const {
    if (in.height() != y_.length() || in.width() != x_.length()) throw Error("blur: map size mismatch");
    Map2d a = along_y(along_x(in, x_, Mode::Forward), y_, Mode::Derivative);
    const Map2d b = along_y(along_x(in, x_, Mode::Derivative), y_, Mode::Forward);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

}  // namespace fixpoint
