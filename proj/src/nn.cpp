#include "rxncond/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace rxncond::nn {

Linear Linear::create(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng,
                      bool bias) {
    Linear l;
    l.w = prefix + ".w";
    l.has_bias = bias;
    store.create(l.w, {in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)));
    if (bias) {
        l.b = prefix + ".b";
        store.create_zeros(l.b, {out});
    }
    return l;
}

Tensor Linear::operator()(const ParamStore& store, const Tensor& x) const {
    Tensor y = matmul(x, store.get(w));
    if (has_bias) y = add_rowvec(y, store.get(b));
    return y;
}

LayerNorm LayerNorm::create(ParamStore& store, const std::string& prefix, int width) {
    LayerNorm ln;
    ln.gain = prefix + ".g";
    ln.bias = prefix + ".b";
    store.create_full(ln.gain, {width}, 1.0);
    store.create_zeros(ln.bias, {width});
    return ln;
}

Tensor LayerNorm::operator()(const ParamStore& store, const Tensor& x) const {
    return layer_norm(x, store.get(gain), store.get(bias));
}

MultiHeadAttention MultiHeadAttention::create(ParamStore& store, const std::string& prefix,
                                              int width, int heads, Rng& rng) {
    if (width % heads != 0)
        throw std::invalid_argument("attention width must be divisible by head count");
    MultiHeadAttention mha;
    mha.heads = heads;
    mha.width = width;
    mha.wq = Linear::create(store, prefix + ".q", width, width, rng);
    mha.wk = Linear::create(store, prefix + ".k", width, width, rng);
    mha.wv = Linear::create(store, prefix + ".v", width, width, rng);
    mha.wo = Linear::create(store, prefix + ".o", width, width, rng);
    return mha;
}

Tensor MultiHeadAttention::operator()(const ParamStore& store, const Tensor& q_in,
                                      const Tensor& kv_in, const Tensor* additive_mask) const {
    const Tensor q = wq(store, q_in);
    const Tensor k = wk(store, kv_in);
    const Tensor v = wv(store, kv_in);
    const int dh = width / heads;
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
        const Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
        const Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
        Tensor scores = scale(matmul(qh, kh, false, true), 1.0 / std::sqrt(static_cast<double>(dh)));
        if (additive_mask) scores = add(scores, *additive_mask);
        head_outputs.push_back(matmul(softmax(scores), vh));
    }
    return wo(store, concat(head_outputs, 1));
}

TransformerBlock TransformerBlock::create(ParamStore& store, const std::string& prefix, int width,
                                          int heads, int ffn_mult, Rng& rng) {
    TransformerBlock b;
    b.attn = MultiHeadAttention::create(store, prefix + ".attn", width, heads, rng);
    b.ffn1 = Linear::create(store, prefix + ".ffn1", width, width * ffn_mult, rng);
    b.ffn2 = Linear::create(store, prefix + ".ffn2", width * ffn_mult, width, rng);
    b.ln1 = LayerNorm::create(store, prefix + ".ln1", width);
    b.ln2 = LayerNorm::create(store, prefix + ".ln2", width);
    return b;
}

Tensor TransformerBlock::operator()(const ParamStore& store, const Tensor& x,
                                    const Tensor* additive_mask) const {
    return cross(store, x, x, additive_mask);
}

Tensor TransformerBlock::cross(const ParamStore& store, const Tensor& q, const Tensor& kv,
                               const Tensor* additive_mask) const {
    Tensor h = ln1(store, add(q, attn(store, q, kv, additive_mask)));
    Tensor f = ffn2(store, relu(ffn1(store, h)));
    return ln2(store, add(h, f));
}

}  // namespace rxncond::nn
