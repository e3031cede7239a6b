#include "rxncond/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace rxncond {

void DecoderConfig::validate() const {
    if (vocab_size <= 0) throw std::invalid_argument("decoder: vocab_size must be positive");
    if (width % heads != 0) throw std::invalid_argument("decoder: width must be divisible by heads");
}

Decoder::Decoder(DecoderConfig cfg, std::string prefix) : cfg_(cfg), prefix_(std::move(prefix)) {
    cfg_.validate();
}

void Decoder::init(ParamStore& store, Rng& rng) {
    store.create(prefix_ + ".tok_embed", {cfg_.vocab_size, cfg_.width}, rng, 0.1);
    store.create(prefix_ + ".pos_embed", {cfg_.max_positions, cfg_.width}, rng, 0.1);
    blocks_.clear();
    for (int l = 0; l < cfg_.layers; ++l)
        blocks_.push_back(nn::TransformerBlock::create(
            store, prefix_ + ".block" + std::to_string(l), cfg_.width, cfg_.heads, cfg_.ffn_mult,
            rng));
    out_ = nn::Linear::create(store, prefix_ + ".out", cfg_.width, cfg_.vocab_size, rng);
}

Tensor Decoder::word_table(const ParamStore& store) const {
    return store.get(prefix_ + ".tok_embed");
}

namespace {

// 0 where key k is visible to query q, large negative otherwise. Context
// keys are visible to everyone; prefix keys only to queries at or after
// their position.
Tensor build_mask(int ctx_len, int total_len, Dtype dt) {
    Tensor mask = Tensor::zeros({total_len, total_len}, dt);
    for (int q = 0; q < total_len; ++q)
        for (int k = ctx_len; k < total_len; ++k)
            if (k > q) mask.set(q, k, nn::kMaskValue);
    return mask;
}

}  // namespace

Tensor Decoder::run_blocks(const ParamStore& store, const ContextTokens& ctx,
                           const std::vector<int>& prefix) const {
    if (!ctx.tokens.defined() || ctx.tokens.dim(1) != cfg_.width)
        throw std::invalid_argument("decoder: context width mismatch");
    const int ctx_len = ctx.tokens.dim(0);
    const int total = ctx_len + static_cast<int>(prefix.size());
    if (total > cfg_.max_positions)
        throw std::invalid_argument("decoder: sequence exceeds max_positions");

    Tensor x = ctx.tokens;
    if (!prefix.empty()) {
        Tensor embeds = gather_rows(store.get(prefix_ + ".tok_embed"), prefix);
        x = concat({x, embeds}, 0);
    }
    std::vector<int> positions(static_cast<size_t>(total));
    for (int i = 0; i < total; ++i) positions[static_cast<size_t>(i)] = i;
    x = add(x, gather_rows(store.get(prefix_ + ".pos_embed"), positions));

    const Tensor mask = build_mask(ctx_len, total, x.dtype());
    for (const auto& block : blocks_) x = block(store, x, &mask);
    return x;
}

Tensor Decoder::decode_forward(const ParamStore& store, const ContextTokens& ctx,
                               const std::vector<int>& prefix) const {
    if (prefix.empty() || prefix[0] != TokenVocab::kBos)
        throw std::invalid_argument("decode_forward: prefix must begin with BOS");
    for (int id : prefix)
        if (id < 0 || id >= cfg_.vocab_size)
            throw std::out_of_range("decode_forward: prefix token out of vocabulary");
    const int ctx_len = ctx.tokens.dim(0);
    Tensor states = run_blocks(store, ctx, prefix);
    Tensor prefix_states = slice_rows(states, ctx_len, states.dim(0));
    return out_(store, prefix_states);
}

Tensor Decoder::pooled_context_state(const ParamStore& store, const ContextTokens& ctx) const {
    Tensor states = run_blocks(store, ctx, {});
    return reshape(mean_rows(states), {1, cfg_.width});
}

ClassificationHeads::ClassificationHeads(std::array<int, kSlotCount> slot_sizes, int width,
                                         std::string prefix)
    : sizes_(slot_sizes), width_(width), prefix_(std::move(prefix)) {}

void ClassificationHeads::init(ParamStore& store, Rng& rng) {
    for (int s = 0; s < kSlotCount; ++s)
        heads_[static_cast<size_t>(s)] =
            nn::Linear::create(store, prefix_ + "." + kSlotNames[static_cast<size_t>(s)], width_,
                               sizes_[static_cast<size_t>(s)], rng);
}

std::array<Tensor, kSlotCount> ClassificationHeads::slot_logits(const ParamStore& store,
                                                                const Tensor& pooled) const {
    std::array<Tensor, kSlotCount> out;
    for (int s = 0; s < kSlotCount; ++s)
        out[static_cast<size_t>(s)] = heads_[static_cast<size_t>(s)](store, pooled);
    return out;
}

Tensor classification_loss(const ParamStore& store, const Decoder& decoder,
                           const ClassificationHeads& heads, const ContextTokens& ctx,
                           const std::array<int, kSlotCount>& labels) {
    for (int s = 0; s < kSlotCount; ++s)
        if (labels[static_cast<size_t>(s)] < 0 ||
            labels[static_cast<size_t>(s)] >= heads.slot_sizes()[static_cast<size_t>(s)])
            throw std::out_of_range("classification_loss: label out of range for slot " +
                                    std::string(kSlotNames[static_cast<size_t>(s)]));
    const Tensor pooled = decoder.pooled_context_state(store, ctx);
    auto logits = heads.slot_logits(store, pooled);
    Tensor loss;
    for (int s = 0; s < kSlotCount; ++s) {
        Tensor slot_loss = softmax_cross_entropy(logits[static_cast<size_t>(s)],
                                                 {labels[static_cast<size_t>(s)]});
        loss = s == 0 ? slot_loss : add(loss, slot_loss);
    }
    return loss;
}

Tensor generation_loss(const ParamStore& store, const Decoder& decoder, const ContextTokens& ctx,
                       const std::vector<int>& target) {
    if (target.empty() || target.back() != TokenVocab::kEos)
        throw std::invalid_argument("generation_loss: target must end with EOS");
    for (size_t i = 0; i + 1 < target.size(); ++i)
        if (target[i] == TokenVocab::kPad)
            throw std::invalid_argument("generation_loss: target contains interior PAD");
    std::vector<int> prefix;
    prefix.reserve(target.size());
    prefix.push_back(TokenVocab::kBos);
    prefix.insert(prefix.end(), target.begin(), target.end() - 1);
    Tensor logits = decoder.decode_forward(store, ctx, prefix);
    // Eq-style sum over sequence positions (batch averaging happens in
    // the trainer)
    return softmax_cross_entropy(logits, target, Reduction::Sum);
}

std::vector<int> rank_logits_row(const Tensor& logits) {
    std::vector<int> order(static_cast<size_t>(logits.dim(1)));
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double la = logits.at(0, a), lb = logits.at(0, b);
        if (la != lb) return la > lb;
        return a < b;  // ties toward the lower index
    });
    return order;
}

std::array<std::vector<int>, kSlotCount> predict_slots_topk(const ParamStore& store,
                                                            const Decoder& decoder,
                                                            const ClassificationHeads& heads,
                                                            const ContextTokens& ctx, int k) {
    for (int s = 0; s < kSlotCount; ++s)
        if (k > heads.slot_sizes()[static_cast<size_t>(s)])
            throw std::invalid_argument("predict_slots_topk: k exceeds vocabulary of slot " +
                                        std::string(kSlotNames[static_cast<size_t>(s)]));
    const Tensor pooled = decoder.pooled_context_state(store, ctx);
    auto logits = heads.slot_logits(store, pooled);
    std::array<std::vector<int>, kSlotCount> out;
    for (int s = 0; s < kSlotCount; ++s) {
        auto order = rank_logits_row(logits[static_cast<size_t>(s)]);
        order.resize(static_cast<size_t>(k));
        out[static_cast<size_t>(s)] = std::move(order);
    }
    return out;
}

namespace {

// log softmax of the final row of a logits matrix
std::vector<double> last_row_log_probs(const Tensor& logits) {
    const int rows = logits.dim(0), v = logits.dim(1);
    std::vector<double> lp(static_cast<size_t>(v));
    double mx = -1e300;
    for (int j = 0; j < v; ++j) mx = std::max(mx, logits.at(rows - 1, j));
    double sum = 0.0;
    for (int j = 0; j < v; ++j) sum += std::exp(logits.at(rows - 1, j) - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < v; ++j) lp[static_cast<size_t>(j)] = logits.at(rows - 1, j) - lse;
    return lp;
}

}  // namespace

BeamResult beam_search_topk(const ParamStore& store, const Decoder& decoder,
                            const TokenVocab& vocab, const ContextTokens& ctx, int k,
                            int beam_width, int max_len, double length_norm_power) {
    if (beam_width < k) throw std::invalid_argument("beam_search_topk: beam_width must be >= k");
    struct Beam {
        std::vector<int> tokens;  // generated tokens, no BOS
        double sum_logp = 0.0;
    };
    std::vector<Beam> live = {{{}, 0.0}};
    std::vector<BeamCandidate> finished;

    for (int step = 0; step < max_len && !live.empty(); ++step) {
        struct Expansion {
            double sum_logp;
            size_t beam;
            int token;
        };
        std::vector<Expansion> expansions;
        for (size_t b = 0; b < live.size(); ++b) {
            std::vector<int> prefix;
            prefix.reserve(live[b].tokens.size() + 1);
            prefix.push_back(TokenVocab::kBos);
            prefix.insert(prefix.end(), live[b].tokens.begin(), live[b].tokens.end());
            const Tensor logits = decoder.decode_forward(store, ctx, prefix);
            const auto lp = last_row_log_probs(logits);
            for (int t = 0; t < static_cast<int>(lp.size()); ++t) {
                if (t == TokenVocab::kPad || t == TokenVocab::kBos) continue;
                expansions.push_back({live[b].sum_logp + lp[static_cast<size_t>(t)], b, t});
            }
        }
        std::stable_sort(expansions.begin(), expansions.end(),
                         [](const Expansion& a, const Expansion& b) {
                             if (a.sum_logp != b.sum_logp) return a.sum_logp > b.sum_logp;
                             if (a.beam != b.beam) return a.beam < b.beam;
                             return a.token < b.token;
                         });
        // top 2*beam_width expansions compete; EOS endings move to the
        // finished pool, the rest refill the live beam
        std::vector<Beam> next;
        const size_t consider =
            std::min(expansions.size(), static_cast<size_t>(2) * static_cast<size_t>(beam_width));
        for (size_t idx = 0; idx < consider; ++idx) {
            const auto& e = expansions[idx];
            Beam nb = live[e.beam];
            nb.tokens.push_back(e.token);
            nb.sum_logp = e.sum_logp;
            if (e.token == TokenVocab::kEos) {
                const double len = static_cast<double>(nb.tokens.size());
                BeamCandidate cand;
                cand.tokens = nb.tokens;
                cand.score = nb.sum_logp / std::pow(len, length_norm_power);
                std::vector<int> without_eos(nb.tokens.begin(), nb.tokens.end() - 1);
                cand.text = vocab.decode(without_eos);
                finished.push_back(std::move(cand));
            } else if (static_cast<int>(next.size()) < beam_width) {
                next.push_back(std::move(nb));
            }
        }
        live = std::move(next);
    }

    // dedup by detokenized text, best score wins
    std::map<std::string, BeamCandidate> best;
    for (auto& c : finished) {
        auto it = best.find(c.text);
        if (it == best.end() || c.score > it->second.score) best[c.text] = c;
    }
    std::vector<BeamCandidate> ranked;
    ranked.reserve(best.size());
    for (auto& [_, c] : best) ranked.push_back(c);
    std::sort(ranked.begin(), ranked.end(), [](const BeamCandidate& a, const BeamCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.text < b.text;
    });
    BeamResult result;
    result.incomplete = static_cast<int>(ranked.size()) < k;
    if (static_cast<int>(ranked.size()) > k) ranked.resize(static_cast<size_t>(k));
    result.candidates = std::move(ranked);
    return result;
}

std::vector<int> greedy_decode(const ParamStore& store, const Decoder& decoder,
                               const ContextTokens& ctx, int max_len) {
    std::vector<int> prefix = {TokenVocab::kBos};
    std::vector<int> out;
    for (int step = 0; step < max_len; ++step) {
        const Tensor logits = decoder.decode_forward(store, ctx, prefix);
        const auto lp = last_row_log_probs(logits);
        int best = -1;
        double best_lp = -1e300;
        for (int t = 0; t < static_cast<int>(lp.size()); ++t) {
            if (t == TokenVocab::kPad || t == TokenVocab::kBos) continue;
            if (lp[static_cast<size_t>(t)] > best_lp) {
                best_lp = lp[static_cast<size_t>(t)];
                best = t;
            }
        }
        if (best == TokenVocab::kEos) break;
        out.push_back(best);
        prefix.push_back(best);
    }
    return out;
}

double sequence_score(const ParamStore& store, const Decoder& decoder, const ContextTokens& ctx,
                      const std::vector<int>& target, double length_norm_power) {
    if (target.empty() || target.back() != TokenVocab::kEos)
        throw std::invalid_argument("sequence_score: target must end with EOS");
    std::vector<int> prefix = {TokenVocab::kBos};
    double sum_logp = 0.0;
    for (int t : target) {
        const Tensor logits = decoder.decode_forward(store, ctx, prefix);
        const auto lp = last_row_log_probs(logits);
        sum_logp += lp[static_cast<size_t>(t)];
        prefix.push_back(t);
    }
    return sum_logp / std::pow(static_cast<double>(target.size()), length_norm_power);
}

}  // namespace rxncond
