#pragma once

// Transformer reaction-SMILES encoder producing fixed-height contextual
// embeddings [max_len x width]. Only the real tokens pass through the
// attention blocks; rows past the sequence length are zero padding in
// the output, so padding can never leak into the valid positions.

#include <string>
#include <vector>

#include "rxncond/nn.hpp"

namespace rxncond {

struct SeqEncoderConfig {
    int vocab_size = 0;
    int max_len = 128;
    int width = 64;
    int heads = 4;
    int layers = 2;
    double dropout = 0.0;  // desk scale trains without dropout

    void validate() const;
};

class SeqEncoder {
public:
    SeqEncoder() = default;
    SeqEncoder(SeqEncoderConfig cfg, std::string prefix = "seq_enc");

    void init(ParamStore& store, Rng& rng);

    // token ids -> [max_len x width]; sequences longer than max_len are
    // truncated (flagged through `truncated` when given)
    Tensor encode(const ParamStore& store, const std::vector<int>& token_ids,
                  bool* truncated = nullptr) const;

    const SeqEncoderConfig& config() const { return cfg_; }

private:
    SeqEncoderConfig cfg_;
    std::string prefix_;
    std::vector<nn::TransformerBlock> blocks_;
};

}  // namespace rxncond
