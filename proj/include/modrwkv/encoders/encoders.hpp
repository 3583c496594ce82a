#pragma once

#include <string>
#include <vector>

#include "modrwkv/core/param.hpp"
#include "modrwkv/core/rng.hpp"
#include "modrwkv/core/tape.hpp"
#include "modrwkv/pipeline/feature.hpp"

namespace modrwkv {

// Frozen, pluggable modality front-ends. Deterministic stand-ins for the
// pretrained encoders: flattened image patches, raw strided audio frames, a
// causal dilated-convolution stack for point-wise time-series features, and
// patch-wise time-series embeddings. Precomputed features load from MFEA
// files so any external encoder can be used offline.
struct EncoderSpec {
    enum class Kind { image_patch, audio_frame, ts_pointwise_dilated, ts_patch, precomputed };
    Kind kind = Kind::image_patch;

    std::size_t patch = 4;     // image patch side P, or ts_patch length
    std::size_t frame = 400;   // audio frame length F (50 Hz at 16 kHz with hop 320)
    std::size_t hop = 320;     // audio hop H
    std::size_t channels = 8;  // ts_pointwise channel width C
    std::size_t blocks = 4;    // ts_pointwise dilation stack depth D (dilations 1,2,...,2^{D-1})
    std::string path;          // precomputed feature file

    bool trainable = false;  // when set, the dilated encoder joins Phase II

    // Adapter input width produced by this encoder.
    std::size_t feature_dim(std::size_t input_channels = 1) const;
    // Receptive field of the dilated stack: 2^D for kernel-2 blocks.
    std::size_t receptive_field() const { return std::size_t{1} << blocks; }
};

const char* encoder_kind_name(EncoderSpec::Kind k);
EncoderSpec::Kind encoder_kind_from_name(const std::string& name);

// Non-overlapping P×P patches of an [H×W×C] image, flattened row-major
// (pixel row, pixel column, channel), patches ordered top-left to
// bottom-right.
FeatureSequence encode_image_patches(const Tensor& image, std::size_t P);

// Raw strided windows of a waveform: frame t is waveform[tH, tH+F).
FeatureSequence encode_audio_frames(const Tensor& waveform, std::size_t F, std::size_t H);

// Causal dilated-convolution stack (1×1 lift to C channels, then residual
// kernel-2 blocks with dilations 1,2,4,...,2^{D-1} and tanh activations).
// Output length equals the input length; position t never sees t+1.
Var encode_ts_pointwise(const Var& series, const EncoderSpec& spec, ParameterStore& store,
                        Tape* tape);
FeatureSequence encode_ts_pointwise(const Tensor& series, const EncoderSpec& spec,
                                    ParameterStore& store);

// Non-overlapping length-`patch` windows as features; tail remainder dropped.
FeatureSequence encode_ts_patch(const Tensor& series, std::size_t patch);

// Creates "encoder.*" parameters for the dilated stack (other kinds have no
// weights).
void init_encoder_params(ParameterStore& store, const EncoderSpec& spec, RngStream& rng);

// Single-column CSV, one scalar per line, optional "value" header.
std::vector<double> load_series_csv(const std::string& path);

}  // namespace modrwkv
