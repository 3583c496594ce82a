#pragma once

#include <optional>
#include <vector>

#include "modrwkv/core/tape.hpp"

namespace modrwkv {

// Which text positions carry answer tokens, as a half-open range relative to
// the text segment. The loss mask is true exactly there.
struct FuseLayout {
    std::size_t answer_begin = 0;
    std::size_t answer_end = 0;
};

struct Fused {
    Var embeddings;               // [(L'+T)×d_model], modality first
    std::vector<bool> loss_mask;  // true on answer positions
    std::size_t modality_len = 0;
};

// Concatenates adapted modality embeddings with text embeddings along the
// sequence axis. Either segment may be absent (pass std::nullopt), but not
// both.
Fused fuse(const std::optional<Var>& modality_emb, const std::optional<Var>& text_emb,
           const FuseLayout& layout);

}  // namespace modrwkv
