#include "rxncond/vocab.hpp"

#include <sstream>
#include <stdexcept>

namespace rxncond {

uint64_t fnv1a64(const std::string& data, uint64_t seed) {
    uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// ----------------------------------------------------------- CondVocab

CondVocab::CondVocab() {
    for (int s = 0; s < kSlotCount; ++s) {
        to_index_[static_cast<size_t>(s)][kNoneLabel] = 0;
        to_label_[static_cast<size_t>(s)].push_back(kNoneLabel);
    }
}

int CondVocab::add(int slot, const std::string& label) {
    auto& idx = to_index_[static_cast<size_t>(slot)];
    auto it = idx.find(label);
    if (it != idx.end()) return it->second;
    const int id = static_cast<int>(to_label_[static_cast<size_t>(slot)].size());
    idx[label] = id;
    to_label_[static_cast<size_t>(slot)].push_back(label);
    return id;
}

std::optional<int> CondVocab::lookup(int slot, const std::string& label) const {
    const auto& idx = to_index_[static_cast<size_t>(slot)];
    auto it = idx.find(label);
    if (it == idx.end()) return std::nullopt;
    return it->second;
}

const std::string& CondVocab::label(int slot, int index) const {
    return to_label_[static_cast<size_t>(slot)].at(static_cast<size_t>(index));
}

int CondVocab::slot_size(int slot) const {
    return static_cast<int>(to_label_[static_cast<size_t>(slot)].size());
}

uint64_t CondVocab::hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (int s = 0; s < kSlotCount; ++s)
        for (const auto& l : to_label_[static_cast<size_t>(s)]) h = fnv1a64(l + "\x1f", h);
    return h;
}

// ---------------------------------------------------------- TokenVocab

TokenVocab::TokenVocab() {
    const char* reserved[kReserved] = {"<PAD>", "<BOS>", "<EOS>", ".",
                                       "<UNK>", kSentSmilesText, kSentGraphText, ">>"};
    for (const char* t : reserved) {
        to_id_[t] = static_cast<int>(to_token_.size());
        to_token_.emplace_back(t);
    }
}

int TokenVocab::add(const std::string& token) {
    auto it = to_id_.find(token);
    if (it != to_id_.end()) return it->second;
    const int id = static_cast<int>(to_token_.size());
    to_id_[token] = id;
    to_token_.push_back(token);
    return id;
}

int TokenVocab::id(const std::string& token) const {
    auto it = to_id_.find(token);
    return it == to_id_.end() ? kUnk : it->second;
}

bool TokenVocab::contains(const std::string& token) const { return to_id_.count(token) > 0; }

const std::string& TokenVocab::token(int id) const {
    return to_token_.at(static_cast<size_t>(id));
}

void TokenVocab::add_reaction_tokens(const std::string& s) {
    size_t start = 0;
    while (start <= s.size()) {
        size_t arrow = s.find(">>", start);
        const std::string part =
            arrow == std::string::npos ? s.substr(start) : s.substr(start, arrow - start);
        if (!part.empty()) {
            for (const auto& tok : tokenize_smiles(part))
                if (tok.kind != TokKind::Dot) add(tok.text);
        }
        if (arrow == std::string::npos) break;
        start = arrow + 2;
    }
}

void TokenVocab::add_question_tokens(const std::string& text) {
    std::istringstream is(text);
    std::string chunk;
    while (is >> chunk) {
        if (chunk == kSentSmilesText || chunk == kSentGraphText) continue;
        if (chunk.find(">>") != std::string::npos) {
            try {
                add_reaction_tokens(chunk);
            } catch (const SmilesError&) {
                // leave unencodable reaction chunks to UNK
            }
            continue;
        }
        add(chunk);
    }
}

std::vector<int> TokenVocab::encode_smiles(const std::string& s) const {
    std::vector<int> ids;
    for (const auto& tok : tokenize_smiles(s))
        ids.push_back(tok.kind == TokKind::Dot ? kDot : id(tok.text));
    return ids;
}

std::vector<int> TokenVocab::encode_answer(const std::string& joined_conditions) const {
    std::vector<int> ids = encode_smiles(joined_conditions);
    ids.push_back(kEos);
    return ids;
}

std::vector<int> TokenVocab::encode_chunk(const std::string& chunk) const {
    if (chunk == kSentSmilesText) return {kSentSmiles};
    if (chunk == kSentGraphText) return {kSentGraph};
    auto it = to_id_.find(chunk);
    if (it != to_id_.end()) return {it->second};
    if (chunk.find(">>") != std::string::npos) {
        std::vector<int> ids;
        size_t start = 0;
        bool first = true;
        while (start <= chunk.size()) {
            size_t arrow = chunk.find(">>", start);
            const std::string part = arrow == std::string::npos ? chunk.substr(start)
                                                                : chunk.substr(start, arrow - start);
            if (!first) ids.push_back(kArrow);
            first = false;
            if (!part.empty()) {
                try {
                    for (const auto& tok : tokenize_smiles(part))
                        ids.push_back(tok.kind == TokKind::Dot ? kDot : id(tok.text));
                } catch (const SmilesError&) {
                    ids.push_back(kUnk);
                }
            }
            if (arrow == std::string::npos) break;
            start = arrow + 2;
        }
        return ids;
    }
    // last resort: a bare SMILES fragment inside prose
    try {
        std::vector<int> ids;
        for (const auto& tok : tokenize_smiles(chunk))
            ids.push_back(tok.kind == TokKind::Dot ? kDot : id(tok.text));
        return ids;
    } catch (const SmilesError&) {
        return {kUnk};
    }
}

std::vector<int> TokenVocab::encode_question(const std::string& text) const {
    std::vector<int> ids;
    std::istringstream is(text);
    std::string chunk;
    while (is >> chunk) {
        auto part = encode_chunk(chunk);
        ids.insert(ids.end(), part.begin(), part.end());
    }
    return ids;
}

std::string TokenVocab::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id == kEos) break;
        if (id == kPad || id == kBos) continue;
        out += token(id);
    }
    return out;
}

uint64_t TokenVocab::hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& t : to_token_) h = fnv1a64(t + "\x1f", h);
    return h;
}

}  // namespace rxncond
