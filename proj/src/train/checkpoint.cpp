#include "modrwkv/train/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

#ifdef __unix__
#include <fcntl.h>
#include <unistd.h>
#endif

#include "modrwkv/train/runconfig.hpp"

namespace modrwkv {

using nlohmann::json;

namespace {

void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::string& buf, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    return v;
}

std::uint64_t read_u64(const std::string& buf, std::size_t off) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    return v;
}

void append_tensor(std::string& out, const Tensor& t) {
    static_assert(sizeof(double) == 8);
    const std::size_t n = t.numel() * sizeof(double);
    const std::size_t base = out.size();
    out.resize(base + n);
    std::memcpy(out.data() + base, t.data(), n);  // host is little-endian
}

json rng_to_json(const RngStream::State& st) {
    return json{{"seed", st.seed},
                {"s", {st.s[0], st.s[1], st.s[2], st.s[3]}},
                {"split_counter", st.split_counter},
                {"has_gauss_spare", st.has_gauss_spare},
                {"gauss_spare_bits", [&] {
                     std::uint64_t bits;
                     std::memcpy(&bits, &st.gauss_spare, 8);
                     return bits;
                 }()}};
}

RngStream::State rng_from_json(const json& j) {
    RngStream::State st;
    st.seed = j.at("seed").get<std::uint64_t>();
    for (int i = 0; i < 4; ++i) st.s[i] = j.at("s")[static_cast<std::size_t>(i)].get<std::uint64_t>();
    st.split_counter = j.at("split_counter").get<std::uint64_t>();
    st.has_gauss_spare = j.at("has_gauss_spare").get<bool>();
    const auto bits = j.at("gauss_spare_bits").get<std::uint64_t>();
    std::memcpy(&st.gauss_spare, &bits, 8);
    return st;
}

}  // namespace

void save_checkpoint(const ParameterStore& params, const CheckpointExtra& extra,
                     const std::string& path) {
    // collect every tensor (parameters plus optional optimizer moments) in
    // sorted name order
    std::map<std::string, const Tensor*> tensors;
    params.for_each([&](const Parameter& p) { tensors.emplace(p.name, &p.value); });
    if (extra.has_optim) {
        for (const auto& [name, mom] : extra.optim.moments) {
            tensors.emplace("optim.m." + name, &mom.m);
            tensors.emplace("optim.v." + name, &mom.v);
        }
    }

    json dir = json::array();
    std::string payload;
    for (const auto& [name, t] : tensors) {
        dir.push_back(json{{"name", name},
                           {"dtype", "f64"},
                           {"shape", t->shape()},
                           {"offset", payload.size()},
                           {"bytes", t->numel() * sizeof(double)}});
        append_tensor(payload, *t);
    }

    json header;
    header["config"] = extra.config;
    header["rng"] = rng_to_json(extra.rng);
    header["optim"] = json{{"enabled", extra.has_optim}, {"t", extra.optim.t}};
    header["progress"] = json{{"phase", extra.progress.phase}, {"step", extra.progress.step}};
    header["tensors"] = dir;
    const std::string header_str = header.dump();

    std::string blob;
    blob.reserve(20 + header_str.size() + payload.size() + 8);
    blob.append("MRWK", 4);
    append_u32(blob, kCheckpointVersion);
    append_u64(blob, header_str.size());
    blob += header_str;
    blob += payload;
    append_u64(blob, fnv1a(payload.data(), payload.size()));

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open " + tmp + " for writing");
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!out) throw FormatError("failed writing " + tmp);
    }
#ifdef __unix__
    if (int fd = ::open(tmp.c_str(), O_RDONLY); fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
#endif
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw FormatError("cannot move " + tmp + " into place");
}

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

json parse_header(const std::string& buf, const std::string& path, std::size_t& payload_off,
                  std::size_t& payload_len) {
    if (buf.size() < 16) throw FormatError(path + ": truncated checkpoint header");
    if (std::memcmp(buf.data(), "MRWK", 4) != 0)
        throw FormatError(path + ": bad magic, expected \"MRWK\"");
    const std::uint32_t version = read_u32(buf, 4);
    if (version != kCheckpointVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint64_t hlen = read_u64(buf, 8);
    if (16 + hlen + 8 > buf.size()) throw FormatError(path + ": truncated checkpoint");
    json header;
    try {
        header = json::parse(buf.substr(16, hlen));
    } catch (const json::exception& e) {
        throw FormatError(path + ": corrupt header JSON: " + e.what());
    }
    payload_off = 16 + hlen;
    payload_len = buf.size() - payload_off - 8;
    const std::uint64_t stored = read_u64(buf, buf.size() - 8);
    const std::uint64_t computed = fnv1a(buf.data() + payload_off, payload_len);
    if (stored != computed) throw FormatError(path + ": payload checksum mismatch (corrupt file)");
    return header;
}

Tensor tensor_from_payload(const std::string& buf, std::size_t payload_off, const json& entry,
                           std::size_t payload_len, const std::string& path) {
    const auto shape = entry.at("shape").get<Tensor::Shape>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto bytes = entry.at("bytes").get<std::size_t>();
    if (entry.at("dtype").get<std::string>() != "f64")
        throw FormatError(path + ": unsupported tensor dtype");
    if (offset + bytes > payload_len) throw FormatError(path + ": tensor payload out of range");
    Tensor t(shape);
    if (t.numel() * sizeof(double) != bytes) throw FormatError(path + ": tensor byte count mismatch");
    std::memcpy(t.data(), buf.data() + payload_off + offset, bytes);
    return t;
}

}  // namespace

LoadedCheckpoint load_checkpoint(const std::string& path) {
    const std::string buf = read_file(path);
    std::size_t payload_off = 0, payload_len = 0;
    const json header = parse_header(buf, path, payload_off, payload_len);

    LoadedCheckpoint out;
    out.extra.config = header.at("config");
    out.extra.rng = rng_from_json(header.at("rng"));
    out.extra.has_optim = header.at("optim").at("enabled").get<bool>();
    out.extra.optim.t = header.at("optim").at("t").get<std::uint64_t>();
    out.extra.progress.phase = header.at("progress").at("phase").get<std::string>();
    out.extra.progress.step = header.at("progress").at("step").get<std::size_t>();

    std::map<std::string, Tensor> moments_m, moments_v;
    for (const auto& entry : header.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        Tensor t = tensor_from_payload(buf, payload_off, entry, payload_len, path);
        if (name.rfind("optim.m.", 0) == 0)
            moments_m.emplace(name.substr(8), std::move(t));
        else if (name.rfind("optim.v.", 0) == 0)
            moments_v.emplace(name.substr(8), std::move(t));
        else
            out.params.add(name, std::move(t));
    }
    for (auto& [name, m] : moments_m) {
        auto itv = moments_v.find(name);
        if (itv == moments_v.end()) throw FormatError(path + ": optimizer moment pair incomplete");
        out.extra.optim.moments.emplace(name,
                                        OptimState::Moments{std::move(m), std::move(itv->second)});
    }
    return out;
}

json inspect_checkpoint(const std::string& path) {
    const std::string buf = read_file(path);
    std::size_t payload_off = 0, payload_len = 0;
    json header = parse_header(buf, path, payload_off, payload_len);
    header["payload_bytes"] = payload_len;
    header["checksum_ok"] = true;
    return header;
}

}  // namespace modrwkv
