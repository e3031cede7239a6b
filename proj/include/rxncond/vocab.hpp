#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rxncond/smiles.hpp"

namespace rxncond {

// Per-slot label vocabularies for the classification head. NONE is
// reserved at index 0 in every slot; remaining labels are ordered by
// descending training frequency (ties lexicographic). Labels unseen at
// training time have no index and count as automatic misses at eval.
class CondVocab {
public:
    CondVocab();

    // label -> dense index; NONE stays 0. Idempotent per slot.
    int add(int slot, const std::string& label);
    std::optional<int> lookup(int slot, const std::string& label) const;
    const std::string& label(int slot, int index) const;
    int slot_size(int slot) const;

    uint64_t hash() const;

private:
    std::array<std::map<std::string, int>, kSlotCount> to_index_;
    std::array<std::vector<std::string>, kSlotCount> to_label_;
};

// Sequence token vocabulary shared by the reaction encoder and the
// generation head: SMILES tokens plus specials. PAD/BOS/EOS/DOT occupy
// the fixed ids 0-3; a few more reserved ids follow for the unknown
// token, the modality sentinels, and the reaction arrow.
class TokenVocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kDot = 3;
    static constexpr int kUnk = 4;
    static constexpr int kSentSmiles = 5;
    static constexpr int kSentGraph = 6;
    static constexpr int kArrow = 7;
    static constexpr int kReserved = 8;

    static constexpr const char* kSentSmilesText = "<SMILES>";
    static constexpr const char* kSentGraphText = "<Graph>";

    TokenVocab();

    int add(const std::string& token);     // returns existing id if known
    int id(const std::string& token) const;  // kUnk when missing
    bool contains(const std::string& token) const;
    const std::string& token(int id) const;
    int size() const { return static_cast<int>(to_token_.size()); }

    // Adds every SMILES token of a reaction or condition string
    // (components split on '.', arrow-aware).
    void add_reaction_tokens(const std::string& reaction_or_condition);
    // Adds word tokens from rendered question text.
    void add_question_tokens(const std::string& text);

    // SMILES/condition string -> token ids ('.' maps to DOT). Unknown
    // tokens become UNK.
    std::vector<int> encode_smiles(const std::string& s) const;
    // target sequence for the generation head: tokens + EOS
    std::vector<int> encode_answer(const std::string& joined_conditions) const;
    // question text -> ids; whitespace words, sentinels, embedded
    // reaction strings (">>" chunks fall back to SMILES tokenization)
    std::vector<int> encode_question(const std::string& text) const;
    // inverse of encode_answer up to unknown tokens; stops at EOS,
    // skips PAD/BOS
    std::string decode(const std::vector<int>& ids) const;

    uint64_t hash() const;

private:
    std::vector<int> encode_chunk(const std::string& chunk) const;
    std::map<std::string, int> to_id_;
    std::vector<std::string> to_token_;
};

uint64_t fnv1a64(const std::string& data, uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace rxncond
