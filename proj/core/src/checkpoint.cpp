#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "conolink/error.hpp"
#include "conolink/mpn.hpp"

namespace conolink {

namespace {

constexpr char kMagic[8] = {'C', 'N', 'L', 'K', 'M', 'P', 'N', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T take(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw LengthError("checkpoint truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

void save_checkpoint(const MpnParams& params, const std::filesystem::path& path) {
    params.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    const auto& cfg = params.config;
    for (std::size_t dim : {cfg.embed_dim, cfg.node_dim, cfg.edge_dim, cfg.hidden, cfg.steps}) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
    }
    put<float>(out, static_cast<float>(cfg.time_scale));
    auto list = tensors(const_cast<MpnParams&>(params));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(list.size()));
    for (const auto& t : list) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols));
        for (std::size_t i = 0; i < t.size(); ++i) put<float>(out, static_cast<float>(t.data[i]));
    }
    if (!out) throw IoError("write failed for " + path.string());
}

MpnParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw ValidationError("not a checkpoint file");
    const auto version = take<std::uint32_t>(in);
    if (version != kVersion) throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    MpnConfig cfg;
    cfg.embed_dim = take<std::uint32_t>(in);
    cfg.node_dim = take<std::uint32_t>(in);
    cfg.edge_dim = take<std::uint32_t>(in);
    cfg.hidden = take<std::uint32_t>(in);
    cfg.steps = take<std::uint32_t>(in);
    cfg.time_scale = static_cast<double>(take<float>(in));
    MpnParams params = MpnParams::zeros(cfg);
    auto list = tensors(params);
    const auto count = take<std::uint32_t>(in);
    if (count != list.size()) throw ValidationError("checkpoint tensor count does not match the configuration");
    for (auto& t : list) {
        const auto rows = take<std::uint32_t>(in);
        const auto cols = take<std::uint32_t>(in);
        if (rows != t.rows || cols != t.cols) throw ValidationError("checkpoint shape mismatch for " + t.name);
        for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = static_cast<double>(take<float>(in));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw LengthError("checkpoint has trailing bytes");
    params.validate();
    return params;
}

}  // namespace conolink
