#include "modrwkv/pipeline/fusion.hpp"

namespace modrwkv {

Fused fuse(const std::optional<Var>& modality_emb, const std::optional<Var>& text_emb,
           const FuseLayout& layout) {
    if (!modality_emb && !text_emb) throw ShapeError("fuse needs at least one segment");

    const std::size_t lm = modality_emb ? modality_emb->shape()[0] : 0;
    const std::size_t lt = text_emb ? text_emb->shape()[0] : 0;
    if (modality_emb && text_emb && modality_emb->shape()[1] != text_emb->shape()[1])
        throw ShapeError("fuse width mismatch: " + shape_str(modality_emb->shape()) + " vs " +
                         shape_str(text_emb->shape()));
    if (layout.answer_end > lt || layout.answer_begin > layout.answer_end)
        throw ShapeError("answer span outside the text segment");

    Fused out;
    out.modality_len = lm;
    if (modality_emb && text_emb)
        out.embeddings = concat_rows(*modality_emb, *text_emb);
    else
        out.embeddings = modality_emb ? *modality_emb : *text_emb;

    out.loss_mask.assign(lm + lt, false);
    for (std::size_t i = layout.answer_begin; i < layout.answer_end; ++i)
        out.loss_mask[lm + i] = true;
    return out;
}

}  // namespace modrwkv
