#pragma once

// Lexical stand-in retriever: hashed token n-gram fingerprints over the
// reaction string, cosine similarity against an unpaired corpus pool.

#include <cstdint>
#include <string>
#include <vector>

#include "rxncond/smiles.hpp"

namespace rxncond {

inline constexpr int kFingerprintWidth = 2048;
inline constexpr uint64_t kFingerprintSeed = 0x9e3779b97f4a7c15ull;

struct Fingerprint {
    std::vector<float> counts;  // kFingerprintWidth hashed n-gram counts
};

// hashed counts of token n-grams (n in {1,2,3}) over all reactant and
// product components
Fingerprint fingerprint(const ReactionRecord& record);
Fingerprint fingerprint_reaction(const std::string& reaction_smiles);

double cosine_similarity(const Fingerprint& a, const Fingerprint& b);

struct CorpusEntry {
    std::string reaction_smiles;
    std::string corpus;
};

struct RetrievalHit {
    size_t pool_index = 0;
    std::string corpus;
    double score = 0.0;
};

class CorpusIndex {
public:
    void add(CorpusEntry entry);
    // JSONL pool: {"reaction_smiles","corpus"} per line
    static CorpusIndex from_jsonl(const std::string& path);

    // top-k by cosine similarity, descending, ties by pool order. The
    // record's own paired corpus (exact text match) is excluded when the
    // record carries one. k larger than the pool returns the full pool.
    std::vector<RetrievalHit> retrieve_similar(const ReactionRecord& record, size_t k) const;

    size_t size() const { return entries_.size(); }
    const CorpusEntry& entry(size_t i) const { return entries_[i]; }

private:
    std::vector<CorpusEntry> entries_;
    std::vector<Fingerprint> fingerprints_;
};

}  // namespace rxncond
