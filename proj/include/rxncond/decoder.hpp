#pragma once

// Tiny causal transformer decoder with the two prediction modules:
// five-slot classification over a pooled context state, and
// autoregressive condition generation with beam search.

#include <array>
#include <string>
#include <vector>

#include "rxncond/nn.hpp"
#include "rxncond/vocab.hpp"

namespace rxncond {

struct DecoderConfig {
    int vocab_size = 0;
    int width = 64;
    int heads = 4;
    int layers = 2;
    int ffn_mult = 4;
    int max_positions = 512;  // context + generated tokens

    void validate() const;
};

// Fused modality/text token matrix fed to the decoder. Every context
// position is visible to every query; generated positions are causal.
struct ContextTokens {
    Tensor tokens;  // [L_ctx x width]
};

class Decoder {
public:
    Decoder() = default;
    Decoder(DecoderConfig cfg, std::string prefix = "decoder");

    void init(ParamStore& store, Rng& rng);

    // The decoder's token embedding table, shared with the projectors as
    // the word-embedding table of the projection algorithm.
    Tensor word_table(const ParamStore& store) const;

    // prefix must begin with BOS; returns logits [len(prefix) x V] over
    // the next token at each prefix position.
    Tensor decode_forward(const ParamStore& store, const ContextTokens& ctx,
                          const std::vector<int>& prefix) const;

    // mean of the decoder states over the context region (no prefix),
    // [1 x width]; the attachment point of the classification heads
    Tensor pooled_context_state(const ParamStore& store, const ContextTokens& ctx) const;

    const DecoderConfig& config() const { return cfg_; }

private:
    Tensor run_blocks(const ParamStore& store, const ContextTokens& ctx,
                      const std::vector<int>& prefix) const;

    DecoderConfig cfg_;
    std::string prefix_;
    std::vector<nn::TransformerBlock> blocks_;
    nn::Linear out_;
};

class ClassificationHeads {
public:
    ClassificationHeads() = default;
    ClassificationHeads(std::array<int, kSlotCount> slot_sizes, int width,
                        std::string prefix = "heads");

    void init(ParamStore& store, Rng& rng);

    // logits per slot from the pooled state
    std::array<Tensor, kSlotCount> slot_logits(const ParamStore& store,
                                               const Tensor& pooled) const;
    const std::array<int, kSlotCount>& slot_sizes() const { return sizes_; }

private:
    std::array<int, kSlotCount> sizes_{};
    int width_ = 0;
    std::string prefix_;
    std::array<nn::Linear, kSlotCount> heads_;
};

// Sum over the five slots of cross entropy between slot logits and labels.
Tensor classification_loss(const ParamStore& store, const Decoder& decoder,
                           const ClassificationHeads& heads, const ContextTokens& ctx,
                           const std::array<int, kSlotCount>& labels);

// Teacher-forced sum over positions of cross entropy; target must end
// with EOS and contain no interior PAD.
Tensor generation_loss(const ParamStore& store, const Decoder& decoder, const ContextTokens& ctx,
                       const std::vector<int>& target);

// Descending-logit ranking of a [1 x V] logits row; ties break toward
// the lower index.
std::vector<int> rank_logits_row(const Tensor& logits);

// Per slot, the k most probable labels in descending order; ties break
// toward the lower index. Throws if k exceeds a slot vocabulary.
std::array<std::vector<int>, kSlotCount> predict_slots_topk(const ParamStore& store,
                                                            const Decoder& decoder,
                                                            const ClassificationHeads& heads,
                                                            const ContextTokens& ctx, int k);

struct BeamCandidate {
    std::string text;
    double score = 0.0;  // length-normalized log probability
    std::vector<int> tokens;
};

struct BeamResult {
    std::vector<BeamCandidate> candidates;  // descending score, deduplicated
    bool incomplete = false;                // fewer than k candidates reached EOS
};

// Length-normalized beam search over the generation head.
BeamResult beam_search_topk(const ParamStore& store, const Decoder& decoder,
                            const TokenVocab& vocab, const ContextTokens& ctx, int k,
                            int beam_width, int max_len, double length_norm_power = 1.0);

// Greedy decode used by the overfit checks.
std::vector<int> greedy_decode(const ParamStore& store, const Decoder& decoder,
                               const ContextTokens& ctx, int max_len);

// Normalized log probability of a full candidate token sequence (must
// end with EOS); the scoring rule shared by beam search and
// candidate-restricted ranking.
double sequence_score(const ParamStore& store, const Decoder& decoder, const ContextTokens& ctx,
                      const std::vector<int>& target, double length_norm_power = 1.0);

}  // namespace rxncond
