#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fixpoint/featstack.hpp"

namespace fixpoint {
namespace {

constexpr char kMagic[4] = {'F', 'S', 'T', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "FSTK I/O assumes a little-endian host");

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void i32(std::int32_t v) { bytes(&v, 4); }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void f32(float v) { bytes(&v, 4); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
    void bytes(void* p, std::size_t n) {
        if (n > in_.size() - pos_) throw Error("FSTK: truncated payload");
        std::memcpy(p, in_.data() + pos_, n);
        pos_ += n;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, 4);
        return v;
    }
    std::int32_t i32() {
        std::int32_t v;
        bytes(&v, 4);
        return v;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::string str() {
        const auto n = u32();
        if (n > in_.size() - pos_) throw Error("FSTK: truncated payload");
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_stack(const FeatureStack& stack) {
    stack.validate();
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(stack.size()));
    w.u32(static_cast<std::uint32_t>(stack.height));
    w.u32(static_cast<std::uint32_t>(stack.width));
    for (const auto& m : stack.meta) {
        w.str(m.name);
        w.str(m.group);
        w.u32(m.rf_size);
        w.u32(m.rf_stride);
        w.i32(m.rf_offset);
        w.u8(m.degenerate ? 1 : 0);
    }
    for (std::size_t k = 0; k < stack.size(); ++k) {
        for (double v : stack.features[k].values()) {
            const float f = static_cast<float>(v);
            if (!std::isfinite(f)) {
                throw Error("FSTK: feature " + std::to_string(k) + " overflows float32");
            }
            w.f32(f);
        }
    }
    return w.take();
}

FeatureStack decode_stack(std::span<const std::uint8_t> bytes, std::string image_id) {
    Reader r(bytes);
    char magic[4];
    if (bytes.size() < 4) throw Error("FSTK: bad magic");
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw Error("FSTK: bad magic");
    const auto version = r.u32();
    if (version != kVersion) throw Error("FSTK: unsupported version " + std::to_string(version));
    const auto K = r.u32();
    const auto height = r.u32();
    const auto width = r.u32();
    if (height == 0 || width == 0) throw Error("FSTK: zero grid dimension");

    FeatureStack stack;
    stack.image_id = std::move(image_id);
    stack.height = static_cast<int>(height);
    stack.width = static_cast<int>(width);
    for (std::uint32_t k = 0; k < K; ++k) {
        FeatureMeta m;
        m.name = r.str();
        m.group = r.str();
        m.rf_size = r.u32();
        m.rf_stride = r.u32();
        m.rf_offset = r.i32();
        m.degenerate = r.u8() != 0;
        stack.meta.push_back(std::move(m));
    }
    const std::size_t cells = static_cast<std::size_t>(height) * width;
    if (r.remaining() < static_cast<std::size_t>(K) * cells * 4) throw Error("FSTK: truncated payload");
    for (std::uint32_t k = 0; k < K; ++k) {
        std::vector<double> values(cells);
        for (std::size_t i = 0; i < cells; ++i) {
            float f;
            r.bytes(&f, 4);
            if (!std::isfinite(f)) {
                std::ostringstream msg;
                msg << "FSTK: non-finite value in feature " << k << " at pixel (" << i / width << ", " << i % width
                    << ")";
                throw Error(msg.str());
            }
            values[i] = f;
        }
        stack.features.emplace_back(stack.height, stack.width, std::move(values));
    }
    if (r.remaining() != 0) throw Error("FSTK: trailing bytes after payload");
    stack.validate();
    return stack;
}

void write_stack(const FeatureStack& stack, const std::filesystem::path& path) {
    const auto bytes = encode_stack(stack);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + path.string());
}

FeatureStack read_stack(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_stack(bytes, path.stem().string());
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

std::vector<FeatureStack> read_stack_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".fstk") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.stem().string() < b.stem().string(); });
    std::vector<FeatureStack> stacks;
    for (const auto& f : files) stacks.push_back(read_stack(f));
    return stacks;
}

}  // namespace fixpoint
