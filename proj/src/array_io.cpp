#include "lesen/array_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lesen {

namespace {

constexpr char kMagic[4] = {'V', 'P', 'I', '1'};
constexpr std::uint8_t kDtypeF32 = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("corrupted image file (short header): " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_image(const std::string& path, const Tensor& img) {
    if (img.shape.size() != 2)
        throw std::invalid_argument("write_image expects a rank-2 tensor");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(kMagic, 4);
    out.put(static_cast<char>(kDtypeF32));
    put_u32(out, static_cast<std::uint32_t>(img.shape[0]));
    put_u32(out, static_cast<std::uint32_t>(img.shape[1]));
    for (double v : img.data) {
        float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        unsigned char b[4] = {static_cast<unsigned char>(bits & 0xff),
                              static_cast<unsigned char>((bits >> 8) & 0xff),
                              static_cast<unsigned char>((bits >> 16) & 0xff),
                              static_cast<unsigned char>((bits >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 4);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Tensor read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("missing image file: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bad magic in image file: " + path);
    int dtype = in.get();
    if (dtype != kDtypeF32)
        throw std::runtime_error("unsupported dtype code in image file: " + path);
    std::uint32_t h = get_u32(in, path);
    std::uint32_t w = get_u32(in, path);
    if (h == 0 || w == 0 || h > (1u << 20) || w > (1u << 20))
        throw std::runtime_error("implausible dimensions in image file: " + path);
    Tensor img({static_cast<int>(h), static_cast<int>(w)});
    for (std::size_t i = 0; i < img.size(); ++i) {
        unsigned char b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4))
            throw std::runtime_error("corrupted image file (truncated data): " + path);
        std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                             (static_cast<std::uint32_t>(b[1]) << 8) |
                             (static_cast<std::uint32_t>(b[2]) << 16) |
                             (static_cast<std::uint32_t>(b[3]) << 24);
        float f;
        std::memcpy(&f, &bits, 4);
        img[i] = static_cast<double>(f);
    }
    return img;
}

}  // namespace lesen
