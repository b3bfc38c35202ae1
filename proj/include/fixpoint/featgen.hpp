#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fixpoint/featstack.hpp"
#include "fixpoint/image_io.hpp"

namespace fixpoint {

/// Multi-scale filter bank. Kernel formulas (all sizes odd, in pixels of the scaled image):
///   intensity        I = (R+G+B)/765 smoothed by a normalized Gaussian, sigma = size/4.
///   color opponent   RG = (R-G)/255, BY = (B-(R+G)/2)/255, same Gaussian smoothing.
///   oriented         on the contrast image I - mean(I):
///                      even = cos(2 pi u / lambda) g(u,v), zero-mean,
///                      odd  = sin(2 pi u / lambda) g(u,v),
///                    u = x cos t + y sin t, v = -x sin t + y cos t, t = pi * o / orientations,
///                    lambda = size / 2, g Gaussian with sigma = size / 5.
///   center-surround  on the contrast image: G(size/8) - G(size/4), each normalized to sum 1.
/// Signed responses split into `_pos`/`_neg` half-wave channels.
struct FilterBankSpec {
    std::vector<int> scales = {2, 4};
    int orientations = 2;
    bool intensity = true;
    bool color_opponent = true;
    bool oriented = true;
    bool center_surround = true;
    int intensity_size = 5;
    int color_size = 5;
    int oriented_size = 7;
    int center_surround_size = 9;

    void validate() const;
};

FilterBankSpec read_filter_bank_spec(const std::filesystem::path& path);
void write_filter_bank_spec(const FilterBankSpec& spec, const std::filesystem::path& path);

/// Box average over factor x factor blocks; partial trailing blocks average what they cover.
Map2d downsample(const Map2d& channel, int factor);
RgbImage downsample(const RgbImage& image, int factor);

/// Zero-padded full 2-D convolution: output is (H + kh - 1) x (W + kw - 1).
Map2d convolve_full(const Map2d& image, const Map2d& kernel);
/// Central H x W window of convolve_full (odd kernels).
Map2d convolve_same(const Map2d& image, const Map2d& kernel);

/// The kernels the bank applies, exposed for tests and documentation.
Map2d gaussian_kernel(int size, double sigma);
Map2d gabor_kernel(int size, double theta, bool odd);
Map2d center_surround_kernel(int size);

/// Runs the bank on one image; all maps land on the finest scale's grid.
FeatureStack extract(const RgbImage& image, const FilterBankSpec& spec, std::string image_id = {});

}  // namespace fixpoint
