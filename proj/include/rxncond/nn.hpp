#pragma once

// Small parameterized layers shared by the encoders, projector, and
// decoder. Layers hold parameter names only; tensors live in the
// ParamStore so freezing and checkpointing stay name-based.

#include <string>

#include "rxncond/autograd.hpp"
#include "rxncond/params.hpp"

namespace rxncond::nn {

struct Linear {
    std::string w, b;
    bool has_bias = true;

    static Linear create(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng,
                         bool bias = true);
    // x [m x in] -> [m x out]
    Tensor operator()(const ParamStore& store, const Tensor& x) const;
};

struct LayerNorm {
    std::string gain, bias;

    static LayerNorm create(ParamStore& store, const std::string& prefix, int width);
    Tensor operator()(const ParamStore& store, const Tensor& x) const;
};

struct MultiHeadAttention {
    Linear wq, wk, wv, wo;
    int heads = 1;
    int width = 0;

    static MultiHeadAttention create(ParamStore& store, const std::string& prefix, int width,
                                     int heads, Rng& rng);
    // q_in [Lq x C], kv_in [Lk x C]; additive_mask (optional) is [Lq x Lk]
    // added to the attention scores before softmax.
    Tensor operator()(const ParamStore& store, const Tensor& q_in, const Tensor& kv_in,
                      const Tensor* additive_mask = nullptr) const;
};

// Post-norm transformer block: x = LN(x + Attn(x)); x = LN(x + FFN(x)).
struct TransformerBlock {
    MultiHeadAttention attn;
    Linear ffn1, ffn2;
    LayerNorm ln1, ln2;

    static TransformerBlock create(ParamStore& store, const std::string& prefix, int width,
                                   int heads, int ffn_mult, Rng& rng);
    Tensor operator()(const ParamStore& store, const Tensor& x,
                      const Tensor* additive_mask = nullptr) const;
    // cross-attention variant: queries q, keys/values kv
    Tensor cross(const ParamStore& store, const Tensor& q, const Tensor& kv,
                 const Tensor* additive_mask = nullptr) const;
};

// value used to mask out attention logits; finite so buffers stay NaN-free
inline constexpr double kMaskValue = -1e9;

}  // namespace rxncond::nn
