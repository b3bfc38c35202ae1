#include "fixpoint/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>

#include "fixpoint/error.hpp"

namespace fixpoint {
namespace {

RgbImage read_png(const std::filesystem::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw Error(path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    RgbImage out(static_cast<int>(img.width), static_cast<int>(img.height));
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw Error(path.string() + ": " + msg);
    }
    return out;
}

std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

RgbImage read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    if (next_token(in) != "P6") throw Error(path.string() + ": only binary PPM (P6) is supported");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token(in));
        h = std::stoi(next_token(in));
        maxval = std::stoi(next_token(in));
    } catch (const std::logic_error&) {
        throw Error(path.string() + ": malformed PPM header");
    }
    if (w < 1 || h < 1) throw Error(path.string() + ": zero image dimension");
    if (maxval != 255) throw Error(path.string() + ": only 8-bit PPM is supported");
    RgbImage out(w, h);
    in.read(reinterpret_cast<char*>(out.pixels.data()), static_cast<std::streamsize>(out.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(out.pixels.size())) throw Error(path.string() + ": truncated PPM");
    return out;
}

}  // namespace

RgbImage read_image(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    RgbImage img;
    if (ext == ".png") {
        img = read_png(path);
    } else if (ext == ".ppm") {
        img = read_ppm(path);
    } else {
        throw Error(path.string() + ": unsupported image format (PNG or PPM expected)");
    }
    if (img.width < 1 || img.height < 1) throw Error(path.string() + ": zero image dimension");
    return img;
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
        throw Error(path.string() + ": " + img.message);
    }
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

RgbImage crop(const RgbImage& image, int x0, int y0, int x1, int y1) {
    x0 = std::clamp(x0, 0, image.width);
    x1 = std::clamp(x1, 0, image.width);
    y0 = std::clamp(y0, 0, image.height);
    y1 = std::clamp(y1, 0, image.height);
    if (x1 <= x0 || y1 <= y0) throw Error("crop: empty region");
    RgbImage out(x1 - x0, y1 - y0);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            for (int c = 0; c < 3; ++c) out.at(y - y0, x - x0, c) = image.at(y, x, c);
        }
    }
    return out;
}

}  // namespace fixpoint
