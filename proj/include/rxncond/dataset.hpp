#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rxncond/smiles.hpp"
#include "rxncond/vocab.hpp"

namespace rxncond {

// Maps the loader's logical fields onto whatever column names a given
// CSV release uses.
struct ColumnMapping {
    std::string id = "id";
    std::string reaction = "rxn_smiles";
    std::array<std::string, kSlotCount> slots = {"catalyst", "solvent1", "solvent2", "reagent1",
                                                 "reagent2"};
    std::string conditions = "conditions";  // 500MT flavor
    std::string corpus = "corpus";          // optional in both flavors
};

struct LoadOptions {
    bool strict = false;  // strict: abort on first malformed row; lenient: skip and count
    ColumnMapping columns;
};

struct LoadReport {
    size_t loaded = 0;
    size_t skipped = 0;
    std::vector<std::string> errors;  // "<line>: message"
};

// Slot-flavor CSV (five condition columns; empty cells become NONE).
std::vector<ReactionRecord> load_condition_csv(const std::string& path, const LoadOptions& opts,
                                               LoadReport* report = nullptr);

// Joined-flavor CSV (one dot-joined condition column); species are also
// stored grouped via the curated grouping.
std::vector<ReactionRecord> load_500mt_csv(const std::string& path,
                                           const ConditionGrouping& grouping,
                                           const LoadOptions& opts, LoadReport* report = nullptr);

// RFC-4180 reader used by the loaders (exposed for tests).
std::vector<std::vector<std::string>> read_csv(const std::string& path);

// Writes records back out in the loader's column schema (slot flavor
// when records carry slots, joined flavor otherwise). Fields are quoted
// when they contain separators.
void write_records_csv(const std::string& path, const std::vector<ReactionRecord>& records);

struct SplitIndices {
    std::vector<size_t> train, valid, test;
};

// Seeded shuffle then 80/10/10 with remainders to train. Disjoint and
// exhaustive over [0, n).
SplitIndices split_indices(size_t n, uint64_t seed);

struct Splits {
    std::vector<ReactionRecord> train, valid, test;
};
Splits split_811(const std::vector<ReactionRecord>& records, uint64_t seed);

struct SlotSparsity {
    size_t non_empty = 0;
    double density = 0.0;
};
struct SparsityReport {
    std::array<SlotSparsity, kSlotCount> slots;
    size_t total = 0;
};
SparsityReport sparsity_report(const std::vector<ReactionRecord>& records);

struct PowerLawFit {
    double alpha = 0.0;
    double xmin = 0.0;
    double ks = 0.0;  // Kolmogorov-Smirnov distance of the chosen tail
    size_t tail_count = 0;
};

// Continuous-approximation maximum likelihood: alpha = 1 + n / sum
// ln(x/xmin) over the tail x >= xmin, with xmin swept to minimize the KS
// distance. Requires >= 20 positive counts; throws std::domain_error on
// degenerate (all-equal) input.
PowerLawFit power_law_fit(const std::vector<double>& counts);

// Per-slot label counts of the generation/classification vocabularies,
// e.g. for the power-law report.
std::map<std::string, size_t> species_frequencies(const std::vector<ReactionRecord>& records);

// Vocabularies from the training split only: frequency-ordered slot
// labels and the shared token vocabulary over reaction + condition
// tokens.
std::pair<CondVocab, TokenVocab> build_vocabs(const std::vector<ReactionRecord>& train);

}  // namespace rxncond
