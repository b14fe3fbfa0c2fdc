#include "lesen/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lesen {

namespace {

constexpr char kMagic[4] = {'V', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("checkpoint truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::ifstream& in) {
    std::uint64_t lo = get_u32(in);
    std::uint64_t hi = get_u32(in);
    return lo | (hi << 32);
}

void put_tensor(std::ofstream& out, const std::string& name, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    out.put(static_cast<char>(kDtypeF32));
    out.put(static_cast<char>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.data) {
        float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
}

std::pair<std::string, Tensor> get_tensor(std::ifstream& in) {
    std::uint32_t nlen = get_u32(in);
    if (nlen > 4096) throw std::runtime_error("checkpoint: implausible name length");
    std::string name(nlen, '\0');
    if (!in.read(name.data(), nlen)) throw std::runtime_error("checkpoint truncated");
    int dtype = in.get();
    if (dtype != kDtypeF32) throw std::runtime_error("checkpoint: unsupported dtype");
    int rank = in.get();
    if (rank < 1 || rank > 4) throw std::runtime_error("checkpoint: bad tensor rank");
    std::vector<int> shape(rank);
    for (int i = 0; i < rank; ++i) shape[i] = static_cast<int>(get_u32(in));
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::uint32_t bits = get_u32(in);
        float f;
        std::memcpy(&f, &bits, 4);
        t[i] = static_cast<double>(f);
    }
    return {name, std::move(t)};
}

void put_model(std::ofstream& out, const ModelState& m) {
    put_u32(out, static_cast<std::uint32_t>(m.entries.size()));
    for (const auto& e : m.entries) put_tensor(out, e.name, e.value);
}

ModelState get_model(std::ifstream& in) {
    std::uint32_t n = get_u32(in);
    ModelState m;
    for (std::uint32_t i = 0; i < n; ++i) {
        auto [name, t] = get_tensor(in);
        m.entries.push_back({std::move(name), std::move(t)});
    }
    return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkConfig& config,
                     const TrainState& state) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(config.in_channels_per_modality));
    put_u32(out, static_cast<std::uint32_t>(config.base_width));
    put_u32(out, static_cast<std::uint32_t>(config.depth));
    put_u32(out, static_cast<std::uint32_t>(config.n_classes));
    put_u32(out, config.use_spatial_attention ? 1 : 0);
    put_model(out, state.student);
    put_model(out, state.teacher);
    put_u64(out, state.optimizer.t);
    put_u32(out, static_cast<std::uint32_t>(state.optimizer.slots.size()));
    for (const auto& s : state.optimizer.slots) {
        put_tensor(out, s.name + ".m", s.m);
        put_tensor(out, s.name + ".v", s.v);
    }
    put_u64(out, static_cast<std::uint64_t>(state.global_step));
    put_u32(out, static_cast<std::uint32_t>(state.epoch));
    put_u64(out, state.rng_seed);
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    if (get_u32(in) != kVersion) throw std::runtime_error("unsupported checkpoint version");
    LoadedCheckpoint lc;
    lc.config.in_channels_per_modality = static_cast<int>(get_u32(in));
    lc.config.base_width = static_cast<int>(get_u32(in));
    lc.config.depth = static_cast<int>(get_u32(in));
    lc.config.n_classes = static_cast<int>(get_u32(in));
    lc.config.use_spatial_attention = get_u32(in) != 0;
    lc.state.student = get_model(in);
    lc.state.teacher = get_model(in);
    lc.state.optimizer.t = get_u64(in);
    std::uint32_t nslots = get_u32(in);
    for (std::uint32_t i = 0; i < nslots; ++i) {
        auto [mname, m] = get_tensor(in);
        auto [vname, v] = get_tensor(in);
        if (mname.size() < 2 || vname.size() < 2)
            throw std::runtime_error("checkpoint: bad optimizer entry");
        AdamState::Slot slot;
        slot.name = mname.substr(0, mname.size() - 2);
        slot.m = std::move(m);
        slot.v = std::move(v);
        lc.state.optimizer.slots.push_back(std::move(slot));
    }
    lc.state.global_step = static_cast<long>(get_u64(in));
    lc.state.epoch = static_cast<int>(get_u32(in));
    lc.state.rng_seed = get_u64(in);
    if (!lc.state.student.same_structure(lc.state.teacher))
        throw std::runtime_error("checkpoint: student/teacher structure mismatch");
    return lc;
}

}  // namespace lesen
