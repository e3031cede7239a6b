#include "rxncond/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "rxncond/vocab.hpp"

namespace rxncond {

namespace {

void add_component_ngrams(const std::string& component, Fingerprint& fp) {
    const auto tokens = tokenize_smiles(component);
    for (size_t i = 0; i < tokens.size(); ++i) {
        std::string gram;
        for (size_t n = 0; n < 3 && i + n < tokens.size(); ++n) {
            gram += tokens[i + n].text;
            gram += '\x1f';
            const uint64_t h = fnv1a64(gram, kFingerprintSeed);
            fp.counts[h % kFingerprintWidth] += 1.0f;
        }
    }
}

}  // namespace

Fingerprint fingerprint_reaction(const std::string& reaction_smiles) {
    auto [reactants, products] = split_reaction(reaction_smiles);
    Fingerprint fp;
    fp.counts.assign(kFingerprintWidth, 0.0f);
    for (const auto& c : reactants) add_component_ngrams(c, fp);
    for (const auto& c : products) add_component_ngrams(c, fp);
    return fp;
}

Fingerprint fingerprint(const ReactionRecord& record) {
    Fingerprint fp;
    fp.counts.assign(kFingerprintWidth, 0.0f);
    for (const auto& c : record.reactants) add_component_ngrams(c, fp);
    for (const auto& c : record.products) add_component_ngrams(c, fp);
    return fp;
}

double cosine_similarity(const Fingerprint& a, const Fingerprint& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < kFingerprintWidth; ++i) {
        dot += static_cast<double>(a.counts[static_cast<size_t>(i)]) * b.counts[static_cast<size_t>(i)];
        na += static_cast<double>(a.counts[static_cast<size_t>(i)]) * a.counts[static_cast<size_t>(i)];
        nb += static_cast<double>(b.counts[static_cast<size_t>(i)]) * b.counts[static_cast<size_t>(i)];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

void CorpusIndex::add(CorpusEntry entry) {
    fingerprints_.push_back(fingerprint_reaction(entry.reaction_smiles));
    entries_.push_back(std::move(entry));
}

CorpusIndex CorpusIndex::from_jsonl(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open corpus pool: " + path);
    CorpusIndex index;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
        index.add({j.at("reaction_smiles").get<std::string>(), j.at("corpus").get<std::string>()});
    }
    return index;
}

std::vector<RetrievalHit> CorpusIndex::retrieve_similar(const ReactionRecord& record,
                                                        size_t k) const {
    if (entries_.empty()) throw std::invalid_argument("retrieval pool is empty");
    const Fingerprint query = fingerprint(record);
    std::vector<RetrievalHit> hits;
    hits.reserve(entries_.size());
    for (size_t i = 0; i < entries_.size(); ++i) {
        if (!record.corpus.empty() && entries_[i].corpus == record.corpus) continue;  // label leak
        hits.push_back({i, entries_[i].corpus, cosine_similarity(query, fingerprints_[i])});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        return a.score > b.score;  // stable keeps pool order on ties
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

}  // namespace rxncond
