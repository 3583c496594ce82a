#include "modrwkv/encoders/encoders.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace modrwkv {

std::size_t EncoderSpec::feature_dim(std::size_t input_channels) const {
    switch (kind) {
        case Kind::image_patch: return patch * patch * input_channels;
        case Kind::audio_frame: return frame;
        case Kind::ts_pointwise_dilated: return channels;
        case Kind::ts_patch: return patch;
        case Kind::precomputed: return 0;  // resolved from the file
    }
    return 0;
}

const char* encoder_kind_name(EncoderSpec::Kind k) {
    switch (k) {
        case EncoderSpec::Kind::image_patch: return "image_patch";
        case EncoderSpec::Kind::audio_frame: return "audio_frame";
        case EncoderSpec::Kind::ts_pointwise_dilated: return "ts_pointwise_dilated";
        case EncoderSpec::Kind::ts_patch: return "ts_patch";
        case EncoderSpec::Kind::precomputed: return "precomputed";
    }
    return "unknown";
}

EncoderSpec::Kind encoder_kind_from_name(const std::string& name) {
    if (name == "image_patch") return EncoderSpec::Kind::image_patch;
    if (name == "audio_frame") return EncoderSpec::Kind::audio_frame;
    if (name == "ts_pointwise_dilated") return EncoderSpec::Kind::ts_pointwise_dilated;
    if (name == "ts_patch") return EncoderSpec::Kind::ts_patch;
    if (name == "precomputed") return EncoderSpec::Kind::precomputed;
    throw ConfigError("unknown encoder kind: " + name);
}

FeatureSequence encode_image_patches(const Tensor& image, std::size_t P) {
    if (image.rank() != 3)
        throw ShapeError("image must be [H×W×C], got " + shape_str(image.shape()));
    const std::size_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
    if (P == 0 || H % P != 0 || W % P != 0)
        throw ShapeError("image " + shape_str(image.shape()) + " not tileable by patch " +
                         std::to_string(P));
    const std::size_t rows = H / P, cols = W / P;
    FeatureSequence fs;
    fs.modality = Modality::image;
    fs.features = Tensor({rows * cols, P * P * C});
    for (std::size_t pr = 0; pr < rows; ++pr)
        for (std::size_t pc = 0; pc < cols; ++pc) {
            const std::size_t out_row = pr * cols + pc;
            std::size_t idx = 0;
            for (std::size_t u = 0; u < P; ++u)
                for (std::size_t v = 0; v < P; ++v)
                    for (std::size_t c = 0; c < C; ++c)
                        fs.features.at(out_row, idx++) =
                            image[((pr * P + u) * W + (pc * P + v)) * C + c];
        }
    return fs;
}

FeatureSequence encode_audio_frames(const Tensor& waveform, std::size_t F, std::size_t H) {
    if (waveform.rank() != 1) throw ShapeError("waveform must be 1-D");
    const std::size_t N = waveform.dim(0);
    if (N < F)
        throw ShapeError("waveform of " + std::to_string(N) + " samples shorter than frame " +
                         std::to_string(F));
    if (H == 0) throw ConfigError("audio hop must be positive");
    const std::size_t frames = (N - F) / H + 1;
    FeatureSequence fs;
    fs.modality = Modality::audio;
    fs.features = Tensor({frames, F});
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t i = 0; i < F; ++i) fs.features.at(t, i) = waveform[t * H + i];
    return fs;
}

Var encode_ts_pointwise(const Var& series, const EncoderSpec& spec, ParameterStore& store,
                        Tape* tape) {
    if (series.shape().size() != 1) throw ShapeError("time series must be 1-D");
    const std::size_t L = series.shape()[0];
    const std::size_t C = spec.channels;
    auto get = [&](const std::string& name) -> Var {
        Parameter& p = store.at(name);
        return tape ? tape->leaf(p) : Var::constant(p.value);
    };

    // 1×1 lift: h[t] = series[t]*w + b per channel
    Var lift_w = get("encoder.lift.weight");
    Var lift_b = get("encoder.lift.bias");
    Var h = add(outer(series, lift_w), outer(Var::constant(Tensor::full({L}, 1.0)), lift_b));

    for (std::size_t blk = 0; blk < spec.blocks; ++blk) {
        const std::size_t dil = std::size_t{1} << blk;
        Var w_prev = get("encoder.block" + std::to_string(blk) + ".w_prev");
        Var w_cur = get("encoder.block" + std::to_string(blk) + ".w_cur");
        Var bias = get("encoder.block" + std::to_string(blk) + ".bias");

        Var shifted;  // h delayed by `dil` positions, zero history
        if (dil >= L) {
            shifted = Var::constant(Tensor::zeros({L, C}));
        } else {
            Var zeros = Var::constant(Tensor::zeros({dil, C}));
            shifted = concat_rows(zeros, rows_range(h, 0, L - dil));
        }
        Var z = add(add(matmul(shifted, w_prev), matmul(h, w_cur)),
                    outer(Var::constant(Tensor::full({L}, 1.0)), bias));
        h = add(h, tanh(z));
    }
    return h;
}

FeatureSequence encode_ts_pointwise(const Tensor& series, const EncoderSpec& spec,
                                    ParameterStore& store) {
    FeatureSequence fs;
    fs.modality = Modality::timeseries;
    fs.features = encode_ts_pointwise(Var::constant(series), spec, store, nullptr).val();
    return fs;
}

FeatureSequence encode_ts_patch(const Tensor& series, std::size_t patch) {
    if (series.rank() != 1) throw ShapeError("time series must be 1-D");
    if (patch == 0) throw ConfigError("patch length must be positive");
    const std::size_t L = series.dim(0);
    if (L < patch)
        throw ShapeError("series of length " + std::to_string(L) + " shorter than patch " +
                         std::to_string(patch));
    const std::size_t n = L / patch;  // tail remainder dropped
    FeatureSequence fs;
    fs.modality = Modality::timeseries;
    fs.features = Tensor({n, patch});
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t i = 0; i < patch; ++i) fs.features.at(t, i) = series[t * patch + i];
    return fs;
}

void init_encoder_params(ParameterStore& store, const EncoderSpec& spec, RngStream& rng) {
    if (spec.kind != EncoderSpec::Kind::ts_pointwise_dilated) return;
    const std::size_t C = spec.channels;
    auto glorot = [&rng](std::size_t fan_in, std::size_t fan_out) {
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
        Tensor t({fan_in, fan_out});
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, std);
        return t;
    };
    Tensor lift({C});
    const double lift_std = std::sqrt(2.0 / static_cast<double>(1 + C));
    for (std::size_t i = 0; i < C; ++i) lift[i] = rng.normal(0.0, lift_std);
    store.add("encoder.lift.weight", std::move(lift));
    store.add("encoder.lift.bias", Tensor::zeros({C}));
    for (std::size_t blk = 0; blk < spec.blocks; ++blk) {
        store.add("encoder.block" + std::to_string(blk) + ".w_prev", glorot(C, C));
        store.add("encoder.block" + std::to_string(blk) + ".w_cur", glorot(C, C));
        store.add("encoder.block" + std::to_string(blk) + ".bias", Tensor::zeros({C}));
    }
}

std::vector<double> load_series_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open series CSV " + path);
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip trailing CR from CRLF files
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1 && line == "value") continue;
        std::size_t pos = 0;
        double v;
        try {
            v = std::stod(line, &pos);
        } catch (const std::exception&) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": not a number: " + line);
        }
        if (pos != line.size())
            throw FormatError(path + ":" + std::to_string(lineno) + ": trailing characters: " + line);
        values.push_back(v);
    }
    if (values.empty()) throw FormatError(path + ": no values");
    return values;
}

}  // namespace modrwkv
