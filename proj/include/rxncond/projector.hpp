#pragma once

// Perceiver modality projection: adapt the encoder output into the
// decoder's channel width, concatenate the projected word-embedding
// table along the token axis, linearly resize the token axis to the
// fixed output count, then run learned latent queries through
// cross-attention and a small self-attention tower. Output token count
// is constant regardless of input length. The SMILES-path and
// graph-path projectors share this architecture but never share
// parameter storage.

#include <string>
#include <vector>

#include "rxncond/nn.hpp"

namespace rxncond {

struct ProjectorConfig {
    int out_tokens = 128;  // 128 for the SMILES path, 3 for the graph path
    int in_tokens = 128;   // reaction rows kept before the table concat (pad/truncate)
    int in_width = 64;     // encoder output channels
    int llm_width = 64;    // decoder channel width
    int heads = 4;
    int tower_blocks = 2;
    int ffn_mult = 4;
};

class PerceiverProjector {
public:
    PerceiverProjector() = default;
    PerceiverProjector(ProjectorConfig cfg, std::string prefix);

    // vocab_rows is the word-table height V; the token-axis resize weight
    // spans in_tokens + V columns.
    void init(ParamStore& store, Rng& rng, int vocab_rows);

    // x: [n x in_width] reaction embedding (any n >= 1);
    // word_table: [V x llm_width]. Returns [out_tokens x llm_width].
    Tensor project(const ParamStore& store, const Tensor& x, const Tensor& word_table) const;

    const ProjectorConfig& config() const { return cfg_; }
    const std::string& prefix() const { return prefix_; }

private:
    ProjectorConfig cfg_;
    std::string prefix_;
    nn::Linear input_adapt_;  // in_width -> llm_width
    nn::Linear word_proj_;    // llm_width -> llm_width applied to the table
    nn::TransformerBlock cross_;
    std::vector<nn::TransformerBlock> tower_;
};

// ordered concatenation [smiles_tokens; graph_tokens; text_tokens]
Tensor assemble_context(const Tensor& smiles_tokens, const Tensor& graph_tokens,
                        const Tensor* text_tokens);

}  // namespace rxncond
