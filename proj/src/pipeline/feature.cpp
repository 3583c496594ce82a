#include "modrwkv/pipeline/feature.hpp"

#include <cstring>
#include <fstream>

namespace modrwkv {

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::image: return "image";
        case Modality::audio: return "audio";
        case Modality::timeseries: return "timeseries";
        case Modality::precomputed: return "precomputed";
    }
    return "unknown";
}

Modality modality_from_name(const std::string& name) {
    if (name == "image") return Modality::image;
    if (name == "audio") return Modality::audio;
    if (name == "timeseries") return Modality::timeseries;
    if (name == "precomputed") return Modality::precomputed;
    throw FormatError("unknown modality tag: " + name);
}

void FeatureSequence::validate() const {
    if (features.rank() != 2)
        throw ShapeError("feature sequence must be [L×C], got " + shape_str(features.shape()));
    if (!features.all_finite()) throw DomainError("feature sequence contains non-finite entries");
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in, std::size_t offset) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw FormatError("MFEA file truncated at byte offset " + std::to_string(offset));
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_mfea(const FeatureSequence& fs, const std::string& path) {
    fs.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    out.write("MFEA", 4);
    put_u32(out, kMfeaVersion);
    put_u32(out, static_cast<std::uint32_t>(fs.length()));
    put_u32(out, static_cast<std::uint32_t>(fs.channels()));
    const auto tag = static_cast<unsigned char>(fs.modality);
    out.write(reinterpret_cast<const char*>(&tag), 1);
    for (std::size_t i = 0; i < fs.features.numel(); ++i) {
        const float f = static_cast<float>(fs.features[i]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                              static_cast<unsigned char>(bits >> 16),
                              static_cast<unsigned char>(bits >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
    }
    if (!out) throw FormatError("failed writing " + path);
}

FeatureSequence load_precomputed(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open feature file " + path);

    char magic[4];
    if (!in.read(magic, 4)) throw FormatError("MFEA file truncated at byte offset 0");
    if (std::memcmp(magic, "MFEA", 4) != 0)
        throw FormatError("bad magic at byte offset 0: expected \"MFEA\"");
    const std::uint32_t version = get_u32(in, 4);
    if (version != kMfeaVersion)
        throw FormatError("unsupported MFEA version " + std::to_string(version) +
                          " at byte offset 4");
    const std::uint32_t L = get_u32(in, 8);
    const std::uint32_t C = get_u32(in, 12);
    if (L == 0 || C == 0) throw FormatError("MFEA dims must be positive (byte offset 8)");

    unsigned char tag;
    if (!in.read(reinterpret_cast<char*>(&tag), 1))
        throw FormatError("MFEA file truncated at byte offset 16");
    if (tag > 3) throw FormatError("unknown modality tag at byte offset 16");

    FeatureSequence fs;
    fs.modality = static_cast<Modality>(tag);
    fs.meta = path;
    fs.features = Tensor({L, C});
    for (std::size_t i = 0; i < static_cast<std::size_t>(L) * C; ++i) {
        unsigned char b[4];
        const std::size_t offset = 17 + i * 4;
        if (!in.read(reinterpret_cast<char*>(b), 4))
            throw FormatError("MFEA file truncated at byte offset " + std::to_string(offset));
        std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                             (static_cast<std::uint32_t>(b[1]) << 8) |
                             (static_cast<std::uint32_t>(b[2]) << 16) |
                             (static_cast<std::uint32_t>(b[3]) << 24);
        float f;
        std::memcpy(&f, &bits, 4);
        fs.features[i] = static_cast<double>(f);
    }
    return fs;
}

}  // namespace modrwkv
