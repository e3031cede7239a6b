#include "rxncond/projector.hpp"

#include <stdexcept>

namespace rxncond {

PerceiverProjector::PerceiverProjector(ProjectorConfig cfg, std::string prefix)
    : cfg_(cfg), prefix_(std::move(prefix)) {
    if (cfg_.out_tokens <= 0 || cfg_.in_tokens <= 0)
        throw std::invalid_argument("projector: token counts must be positive");
}

void PerceiverProjector::init(ParamStore& store, Rng& rng, int vocab_rows) {
    if (vocab_rows <= 0) throw std::invalid_argument("projector: vocab_rows must be positive");
    input_adapt_ = nn::Linear::create(store, prefix_ + ".input", cfg_.in_width, cfg_.llm_width, rng);
    word_proj_ = nn::Linear::create(store, prefix_ + ".word_proj", cfg_.llm_width, cfg_.llm_width, rng);
    // token-axis resize [out_tokens x (in_tokens + V)], stored in two
    // pieces so the reaction and table column blocks stay readable
    const double s = 1.0 / std::sqrt(static_cast<double>(cfg_.in_tokens + vocab_rows));
    store.create(prefix_ + ".resize.reaction", {cfg_.out_tokens, cfg_.in_tokens}, rng, s);
    store.create(prefix_ + ".resize.table", {cfg_.out_tokens, vocab_rows}, rng, s);
    store.create(prefix_ + ".latents", {cfg_.out_tokens, cfg_.llm_width}, rng, 0.5);
    cross_ = nn::TransformerBlock::create(store, prefix_ + ".cross", cfg_.llm_width, cfg_.heads,
                                          cfg_.ffn_mult, rng);
    tower_.clear();
    for (int t = 0; t < cfg_.tower_blocks; ++t)
        tower_.push_back(nn::TransformerBlock::create(store, prefix_ + ".tower" + std::to_string(t),
                                                      cfg_.llm_width, cfg_.heads, cfg_.ffn_mult,
                                                      rng));
}

Tensor PerceiverProjector::project(const ParamStore& store, const Tensor& x,
                                   const Tensor& word_table) const {
    if (x.rank() != 2 || x.dim(1) != cfg_.in_width)
        throw std::invalid_argument("projector: input width mismatch, got " + x.shape_str());
    if (word_table.dim(1) != cfg_.llm_width)
        throw std::invalid_argument("projector: word table width mismatch");

    // reaction rows into decoder width, padded/truncated to in_tokens
    Tensor adapted = input_adapt_(store, x);
    const int n = adapted.dim(0);
    if (n > cfg_.in_tokens) {
        adapted = slice_rows(adapted, 0, cfg_.in_tokens);
    } else if (n < cfg_.in_tokens) {
        Tensor pad = Tensor::zeros({cfg_.in_tokens - n, cfg_.llm_width}, adapted.dtype());
        adapted = concat({adapted, pad}, 0);
    }

    // concat the projected vocabulary table on the token axis, then
    // resize the token axis to out_tokens with a learned map
    Tensor table = word_proj_(store, word_table);
    Tensor joined = concat({adapted, table}, 0);  // [(in_tokens + V) x C]
    Tensor resize =
        concat({store.get(prefix_ + ".resize.reaction"), store.get(prefix_ + ".resize.table")}, 1);
    if (resize.dim(1) != joined.dim(0))
        throw std::invalid_argument("projector: vocabulary row count changed after init");
    Tensor tokens = matmul(resize, joined);  // [out_tokens x C]

    // latent queries cross-attend into the resized tokens, then the tower
    Tensor latents = store.get(prefix_ + ".latents");
    Tensor out = cross_.cross(store, latents, tokens);
    for (const auto& block : tower_) out = block(store, out);
    return out;
}

Tensor assemble_context(const Tensor& smiles_tokens, const Tensor& graph_tokens,
                        const Tensor* text_tokens) {
    if (smiles_tokens.dim(1) != graph_tokens.dim(1))
        throw std::invalid_argument("assemble_context: width mismatch between modalities");
    std::vector<Tensor> parts = {smiles_tokens, graph_tokens};
    if (text_tokens) {
        if (text_tokens->dim(1) != smiles_tokens.dim(1))
            throw std::invalid_argument("assemble_context: text width mismatch");
        parts.push_back(*text_tokens);
    }
    return concat(parts, 0);
}

}  // namespace rxncond
