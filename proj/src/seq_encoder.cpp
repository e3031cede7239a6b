#include "rxncond/seq_encoder.hpp"

#include <stdexcept>

namespace rxncond {

void SeqEncoderConfig::validate() const {
    if (vocab_size <= 0) throw std::invalid_argument("seq encoder: vocab_size must be positive");
    if (width % heads != 0)
        throw std::invalid_argument("seq encoder: width must be divisible by heads");
    if (dropout != 0.0)
        throw std::invalid_argument("seq encoder: nonzero dropout is not supported at desk scale");
}

SeqEncoder::SeqEncoder(SeqEncoderConfig cfg, std::string prefix)
    : cfg_(cfg), prefix_(std::move(prefix)) {
    cfg_.validate();
}

void SeqEncoder::init(ParamStore& store, Rng& rng) {
    store.create(prefix_ + ".tok_embed", {cfg_.vocab_size, cfg_.width}, rng, 0.1);
    store.create(prefix_ + ".pos_embed", {cfg_.max_len, cfg_.width}, rng, 0.1);
    blocks_.clear();
    for (int l = 0; l < cfg_.layers; ++l)
        blocks_.push_back(nn::TransformerBlock::create(
            store, prefix_ + ".block" + std::to_string(l), cfg_.width, cfg_.heads, 4, rng));
}

Tensor SeqEncoder::encode(const ParamStore& store, const std::vector<int>& token_ids,
                          bool* truncated) const {
    if (token_ids.empty()) throw std::invalid_argument("seq encoder: empty token list");
    for (int id : token_ids)
        if (id < 0 || id >= cfg_.vocab_size)
            throw std::out_of_range("seq encoder: token id out of vocabulary");
    std::vector<int> ids = token_ids;
    if (static_cast<int>(ids.size()) > cfg_.max_len) {
        ids.resize(static_cast<size_t>(cfg_.max_len));
        if (truncated) *truncated = true;
    } else if (truncated) {
        *truncated = false;
    }
    const int len = static_cast<int>(ids.size());
    std::vector<int> positions(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i) positions[static_cast<size_t>(i)] = i;

    Tensor x = add(gather_rows(store.get(prefix_ + ".tok_embed"), ids),
                   gather_rows(store.get(prefix_ + ".pos_embed"), positions));
    for (const auto& block : blocks_) x = block(store, x);
    if (len == cfg_.max_len) return x;
    Tensor pad = Tensor::zeros({cfg_.max_len - len, cfg_.width}, x.dtype());
    return concat({x, pad}, 0);
}

}  // namespace rxncond
